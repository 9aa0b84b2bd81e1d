//! Hidden-unit selection and overfitting diagnostics for one-hidden-layer
//! regression networks.
//!
//! The crate fits networks of the form
//! `f(x) = β + Σᵢ aᵢ·tanh(wᵢᵀx + bᵢ)` by multi-restart BFGS least
//! squares ([`optimize`]), chooses the hidden-unit count by penalized
//! criteria ([`selection`]), reproduces a replication study on a known
//! simulated model ([`simulation`]), and checks an empirical bound on
//! how much an over-parameterized network can overfit ([`bound`]). The
//! [`runner`] module backs the `mlpsel` binary and records a manifest
//! with every run so results can be reproduced bit for bit.
//!
//! ```
//! use mlpsel::mlp::Architecture;
//! use mlpsel::optimize::FitConfig;
//! use mlpsel::selection::{PenaltySpec, select};
//! use mlpsel::simulation::{gen_true_data, noise_variance};
//!
//! let data = gen_true_data(200, 7).unwrap();
//! let spec = PenaltySpec::parse("BIC:known", Some(noise_variance())).unwrap();
//! let result = select(spec, &data, 4, &FitConfig::default()).unwrap();
//! assert!(result.chosen_k >= 1 && result.chosen_k <= 4);
//! ```

pub mod bound;
pub mod error;
pub mod mlp;
pub mod optimize;
pub mod runner;
pub mod seed;
pub mod selection;
pub mod simulation;

pub use error::{Error, Result};
pub use mlp::{Architecture, Dataset, ParamVector};
pub use optimize::{fit, FitConfig, FitResult};
pub use selection::{select, PenaltyFamily, PenaltySpec, SelectionResult, VarianceRegime};
pub use simulation::{gen_true_data, noise_variance, run_study, SimConfig};
