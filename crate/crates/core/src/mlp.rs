//! One-hidden-layer MLP regression family.
//!
//! The regression function with `k` hidden units on `d` inputs is
//!
//! ```text
//! f_theta(x) = beta + sum_i a_i * tanh(w_i . x + b_i)
//! ```
//!
//! with the flat parameter layout `[beta, a_1..a_k, b_1..b_k, w_11..w_1d,
//! ..., w_k1..w_kd]`, so the parameter dimension is `k*(d+2) + 1`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Network shape: `d` inputs feeding `k` tanh hidden units and one
/// linear output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Architecture {
    pub d: usize,
    pub k: usize,
}

impl Architecture {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d < 1 || k < 1 {
            return Err(Error::InvalidConfig(format!(
                "architecture needs d >= 1 and k >= 1, got d={d}, k={k}"
            )));
        }
        Ok(Architecture { d, k })
    }

    /// Number of free parameters, `k*(d+2) + 1`.
    pub fn param_dim(&self) -> usize {
        self.k * (self.d + 2) + 1
    }
}

/// Flat parameter vector tied to an [`Architecture`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    arch: Architecture,
    values: Array1<f64>,
}

impl ParamVector {
    /// Builds a parameter vector, checking length and finiteness.
    pub fn new(arch: Architecture, values: Array1<f64>) -> Result<Self> {
        if values.len() != arch.param_dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters for (d={}, k={}), got {}",
                arch.param_dim(),
                arch.d,
                arch.k,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        Ok(ParamVector { arch, values })
    }

    pub fn from_vec(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        Self::new(arch, Array1::from_vec(values))
    }

    pub fn zeros(arch: Architecture) -> Self {
        ParamVector {
            arch,
            values: Array1::zeros(arch.param_dim()),
        }
    }

    /// Assembles a vector from the structured pieces: intercept, output
    /// weights `a`, hidden biases `b`, and per-unit input weight rows.
    pub fn from_parts(beta: f64, a: &[f64], b: &[f64], w_rows: &[Vec<f64>]) -> Result<Self> {
        let k = a.len();
        if k == 0 || b.len() != k || w_rows.len() != k {
            return Err(Error::DimensionMismatch(
                "a, b, and w must all have one entry per hidden unit".into(),
            ));
        }
        let d = w_rows[0].len();
        let arch = Architecture::new(d, k)?;
        let mut values = Vec::with_capacity(arch.param_dim());
        values.push(beta);
        values.extend_from_slice(a);
        values.extend_from_slice(b);
        for row in w_rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch(
                    "all input weight rows must have length d".into(),
                ));
            }
            values.extend_from_slice(row);
        }
        Self::from_vec(arch, values)
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn beta(&self) -> f64 {
        self.values[0]
    }

    pub fn output_weights(&self) -> ArrayView1<'_, f64> {
        self.values.slice(ndarray::s![1..1 + self.arch.k])
    }

    pub fn hidden_biases(&self) -> ArrayView1<'_, f64> {
        let k = self.arch.k;
        self.values.slice(ndarray::s![1 + k..1 + 2 * k])
    }

    /// Input weights as a `k x d` view.
    pub fn input_weights(&self) -> ndarray::ArrayView2<'_, f64> {
        let (d, k) = (self.arch.d, self.arch.k);
        self.values
            .slice(ndarray::s![1 + 2 * k..])
            .into_shape_with_order((k, d))
            .expect("layout invariant")
    }

    /// Clamps every coordinate into `[-bound, bound]`.
    pub fn clamp(&mut self, bound: f64) {
        self.values.mapv_inplace(|v| v.clamp(-bound, bound));
    }

    /// Evaluates `f_theta(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arch.d {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, architecture expects d={}",
                x.len(),
                self.arch.d
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let (d, k) = (self.arch.d, self.arch.k);
        let v = &self.values;
        let mut out = v[0];
        for i in 0..k {
            let mut z = v[1 + k + i];
            let w = 1 + 2 * k + i * d;
            for j in 0..d {
                z += v[w + j] * x[j];
            }
            out += v[1 + i] * z.tanh();
        }
        out
    }

    /// Evaluates the network on every row of an input matrix.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Array1<f64>> {
        if inputs.ncols() != self.arch.d {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} columns, architecture expects d={}",
                inputs.ncols(),
                self.arch.d
            )));
        }
        let b = self.hidden_biases();
        let mut act = inputs.dot(&self.input_weights().t());
        for mut row in act.rows_mut() {
            row += &b;
        }
        act.mapv_inplace(f64::tanh);
        let mut f = act.dot(&self.output_weights());
        f += self.values[0];
        Ok(f)
    }

    /// Empirical mean squared error over a dataset.
    pub fn mse(&self, data: &Dataset) -> Result<f64> {
        self.check_data(data)?;
        Ok(self.mse_core(data).0)
    }

    /// Analytic gradient of the empirical MSE, in layout order.
    pub fn mse_gradient(&self, data: &Dataset) -> Result<Array1<f64>> {
        self.check_data(data)?;
        Ok(self.mse_core_with_gradient(data).1)
    }

    /// MSE and its gradient in one pass; this is the optimizer's
    /// objective callback.
    pub fn mse_with_gradient(&self, data: &Dataset) -> Result<(f64, Array1<f64>)> {
        self.check_data(data)?;
        Ok(self.mse_core_with_gradient(data))
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.d() != self.arch.d {
            return Err(Error::DimensionMismatch(format!(
                "dataset has d={}, architecture expects d={}",
                data.d(),
                self.arch.d
            )));
        }
        Ok(())
    }

    /// Residual vector `y - f_theta(x)` and MSE without re-validating.
    fn mse_core(&self, data: &Dataset) -> (f64, Array1<f64>, Array2<f64>) {
        let a = self.output_weights();
        let b = self.hidden_biases();
        let w = self.input_weights();

        // t = tanh(X w^T + b), f = beta + t a, r = y - f
        let mut act = data.inputs.dot(&w.t());
        for mut row in act.rows_mut() {
            row += &b;
        }
        act.mapv_inplace(f64::tanh);
        let mut resid = act.dot(&a);
        resid.mapv_inplace(|f| -(f + self.values[0]));
        resid += &data.targets;
        let n = data.n() as f64;
        let mse = resid.dot(&resid) / n;
        (mse, resid, act)
    }

    fn mse_core_with_gradient(&self, data: &Dataset) -> (f64, Array1<f64>) {
        let (d, k) = (self.arch.d, self.arch.k);
        let a = self.output_weights().to_owned();
        let (mse, resid, act) = self.mse_core(data);
        let n = data.n() as f64;

        // dE/df_t = -(2/n) r_t, chained through the tanh layer.
        let coef = resid.mapv(|r| -2.0 * r / n);
        let mut grad = Array1::zeros(self.arch.param_dim());
        grad[0] = coef.sum();
        let grad_a = act.t().dot(&coef);
        // s_{t,i} = coef_t * a_i * (1 - tanh^2)
        let mut s = act.mapv(|t| 1.0 - t * t);
        for (ti, mut col) in s.columns_mut().into_iter().enumerate() {
            col *= a[ti];
            col *= &coef;
        }
        let grad_b = s.sum_axis(ndarray::Axis(0));
        let grad_w = s.t().dot(&data.inputs);
        grad.slice_mut(ndarray::s![1..1 + k]).assign(&grad_a);
        grad.slice_mut(ndarray::s![1 + k..1 + 2 * k]).assign(&grad_b);
        grad.slice_mut(ndarray::s![1 + 2 * k..])
            .assign(&grad_w.into_shape_with_order(k * d).expect("layout"));
        (mse, grad)
    }

    /// One CSV row of the raw values, 17 significant digits.
    pub fn to_csv_row(&self) -> String {
        let cells: Vec<String> = self.values.iter().map(|v| format!("{v:.16e}")).collect();
        cells.join(",")
    }

    /// Parses a row written by [`ParamVector::to_csv_row`].
    pub fn from_csv_row(arch: Architecture, row: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(arch.param_dim());
        for (i, cell) in row.trim().split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::CsvData {
                row: 1,
                column: i + 1,
                message: format!("invalid number {cell:?}"),
            })?;
            values.push(v);
        }
        Self::from_vec(arch, values)
    }
}

/// Regression sample: an `n x d` input matrix and `n` scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    targets: Array1<f64>,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(Error::InvalidConfig(
                "dataset needs at least one row and one input column".into(),
            ));
        }
        if inputs.nrows() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} input rows but {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset".into()));
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("dataset needs at least one row".into()));
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch("ragged input rows".into()));
            }
            flat.extend_from_slice(row);
        }
        let inputs = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(inputs, Array1::from_vec(targets))
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn d(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    pub fn row(&self, t: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(t)
    }

    /// Returns a copy with every target shifted by `c`.
    pub fn with_shifted_targets(&self, c: f64) -> Dataset {
        Dataset {
            inputs: self.inputs.clone(),
            targets: &self.targets + c,
        }
    }

    /// Returns a copy with every target scaled by `c`.
    pub fn with_scaled_targets(&self, c: f64) -> Dataset {
        Dataset {
            inputs: self.inputs.clone(),
            targets: &self.targets * c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    use crate::seed::rng_from;

    /// tanh through the exponential definition, kept separate from the
    /// library path on purpose.
    fn tanh_by_exp(z: f64) -> f64 {
        let e = (2.0 * z).exp();
        if e.is_infinite() {
            1.0
        } else {
            (e - 1.0) / (e + 1.0)
        }
    }

    fn theta0() -> ParamVector {
        ParamVector::from_parts(
            1.5,
            &[1.0, 2.0, -3.0],
            &[0.0, 8.0, 2.0],
            &[vec![6.0, -2.0], vec![-1.0, 3.0], vec![-6.0, -2.0]],
        )
        .unwrap()
    }

    fn random_theta(arch: Architecture, rng: &mut impl Rng, half_width: f64) -> ParamVector {
        let values: Vec<f64> = (0..arch.param_dim())
            .map(|_| rng.gen_range(-half_width..=half_width))
            .collect();
        ParamVector::from_vec(arch, values).unwrap()
    }

    fn random_dataset(d: usize, n: usize, rng: &mut impl Rng) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..=2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        Dataset::from_rows(&rows, targets).unwrap()
    }

    #[test]
    fn param_dim_formula() {
        assert_eq!(Architecture::new(2, 3).unwrap().param_dim(), 13);
        assert_eq!(Architecture::new(1, 1).unwrap().param_dim(), 4);
        assert_eq!(Architecture::new(5, 10).unwrap().param_dim(), 71);
    }

    #[test]
    fn arch_rejects_zero_sizes() {
        assert!(Architecture::new(0, 1).is_err());
        assert!(Architecture::new(1, 0).is_err());
    }

    #[test]
    fn eval_matches_straight_line_oracle_at_origin() {
        let th = theta0();
        // tanh(0) + 2 tanh(8) - 3 tanh(2) + 1.5, evaluated independently
        let oracle = tanh_by_exp(0.0) + 2.0 * tanh_by_exp(8.0) - 3.0 * tanh_by_exp(2.0) + 1.5;
        let got = th.eval(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.6079168096319011, epsilon = 1e-12);
        assert!((got - 0.6079169).abs() < 1e-6);
    }

    #[test]
    fn eval_matches_straight_line_oracle_at_one_one() {
        let th = theta0();
        let oracle = tanh_by_exp(4.0) + 2.0 * tanh_by_exp(10.0) - 3.0 * tanh_by_exp(-6.0) + 1.5;
        let got = th.eval(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 7.499292426446839, epsilon = 1e-12);
    }

    #[test]
    fn zero_output_weights_reduce_to_intercept() {
        let arch = Architecture::new(2, 3).unwrap();
        let mut rng = rng_from(11);
        for _ in 0..20 {
            let mut values = vec![0.0; arch.param_dim()];
            values[0] = rng.gen_range(-5.0..=5.0);
            for v in values.iter_mut().skip(1 + arch.k) {
                *v = rng.gen_range(-3.0..=3.0);
            }
            let th = ParamVector::from_vec(arch, values).unwrap();
            let x = [rng.gen_range(-4.0..=4.0), rng.gen_range(-4.0..=4.0)];
            assert_abs_diff_eq!(th.eval(&x).unwrap(), th.beta(), epsilon = 1e-15);
        }
    }

    #[test]
    fn predict_agrees_with_eval_row_by_row() {
        let arch = Architecture::new(3, 2).unwrap();
        let mut rng = rng_from(29);
        let th = random_theta(arch, &mut rng, 2.0);
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..3).map(|_| rng.gen_range(-4.0..=4.0)).collect())
            .collect();
        let inputs = Array2::from_shape_fn((25, 3), |(i, j)| rows[i][j]);
        let preds = th.predict(&inputs).unwrap();
        for (i, row) in rows.iter().enumerate() {
            assert_abs_diff_eq!(preds[i], th.eval(row).unwrap(), epsilon = 1e-12);
        }
        let wrong = Array2::zeros((4, 2));
        assert!(th.predict(&wrong).is_err());
    }

    #[test]
    fn eval_rejects_wrong_input_length() {
        for d in 1..=5 {
            for k in 1..=4 {
                let arch = Architecture::new(d, k).unwrap();
                let th = ParamVector::zeros(arch);
                assert!(th.eval(&vec![0.0; d]).is_ok());
                assert!(th.eval(&vec![0.0; d + 1]).is_err());
                if d > 1 {
                    assert!(th.eval(&vec![0.0; d - 1]).is_err());
                }
            }
        }
    }

    #[test]
    fn param_vector_rejects_bad_input() {
        let arch = Architecture::new(2, 3).unwrap();
        assert!(ParamVector::from_vec(arch, vec![0.0; 12]).is_err());
        let mut values = vec![0.0; 13];
        values[5] = f64::NAN;
        assert!(ParamVector::from_vec(arch, values).is_err());
    }

    #[test]
    fn eval_bounded_inside_box() {
        let bound = 100.0;
        let mut rng = rng_from(5);
        for _ in 0..50 {
            let arch = Architecture::new(rng.gen_range(1..=4), rng.gen_range(1..=5)).unwrap();
            let th = random_theta(arch, &mut rng, bound);
            let x: Vec<f64> = (0..arch.d).map(|_| rng.gen_range(-50.0..=50.0)).collect();
            let f = th.eval(&x).unwrap();
            assert!(f.abs() <= bound + arch.k as f64 * bound + 1e-9);
        }
    }

    #[test]
    fn mse_zero_on_exact_targets() {
        let mut rng = rng_from(7);
        let arch = Architecture::new(2, 3).unwrap();
        let th = random_theta(arch, &mut rng, 1.0);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)])
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| th.eval(r).unwrap()).collect();
        let data = Dataset::from_rows(&rows, targets).unwrap();
        assert_abs_diff_eq!(th.mse(&data).unwrap(), 0.0, epsilon = 1e-30);
        // gradient of a perfect interpolant at loss zero vanishes
        let g = th.mse_gradient(&data).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn mse_single_point_residual_two() {
        let arch = Architecture::new(1, 1).unwrap();
        // beta = 0 and a = 0 so f == 0; target 2 leaves residual 2
        let th = ParamVector::zeros(arch);
        let data = Dataset::from_rows(&[vec![0.3]], vec![2.0]).unwrap();
        assert_abs_diff_eq!(th.mse(&data).unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn mse_rejects_dimension_mismatch() {
        let th = ParamVector::zeros(Architecture::new(2, 1).unwrap());
        let data = Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        assert!(th.mse(&data).is_err());
        assert!(th.mse_gradient(&data).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rng_from(17);
        let step = 1e-5;
        for _ in 0..25 {
            let arch = Architecture::new(rng.gen_range(1..=3), rng.gen_range(1..=4)).unwrap();
            let th = random_theta(arch, &mut rng, 1.0);
            let data = random_dataset(arch.d, 12, &mut rng);
            let g = th.mse_gradient(&data).unwrap();
            for j in 0..arch.param_dim() {
                let mut hi = th.values.to_vec();
                let mut lo = hi.clone();
                hi[j] += step;
                lo[j] -= step;
                let fhi = ParamVector::from_vec(arch, hi).unwrap().mse(&data).unwrap();
                let flo = ParamVector::from_vec(arch, lo).unwrap().mse(&data).unwrap();
                let fd = (fhi - flo) / (2.0 * step);
                let rel = (g[j] - fd).abs() / fd.abs().max(1.0);
                assert!(
                    rel < 1e-6,
                    "coordinate {j}: analytic {} vs finite difference {fd}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn intercept_gradient_is_twice_mean_signed_error() {
        // a_1 = 0: f == beta, so dE/dbeta = 2 mean(beta - y)
        let th = ParamVector::from_parts(0.7, &[0.0], &[0.4], &[vec![1.3]]).unwrap();
        let data =
            Dataset::from_rows(&[vec![0.1], vec![-0.5], vec![2.0]], vec![1.0, -1.0, 0.5]).unwrap();
        let g = th.mse_gradient(&data).unwrap();
        let mean_resid = (1.0 - 0.7 + (-1.0 - 0.7) + (0.5 - 0.7)) / 3.0;
        assert_abs_diff_eq!(g[0], -2.0 * mean_resid, epsilon = 1e-14);
    }

    #[test]
    fn csv_row_round_trips_exactly() {
        let th = theta0();
        let row = th.to_csv_row();
        let back = ParamVector::from_csv_row(th.arch(), &row).unwrap();
        assert_eq!(th.values, back.values);
    }

    #[test]
    fn csv_row_rejects_garbage() {
        let arch = Architecture::new(1, 1).unwrap();
        let err = ParamVector::from_csv_row(arch, "1.0,x,3.0,4.0").unwrap_err();
        assert!(err.to_string().contains("column 2"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Shifting all targets and the intercept by the same constant
        /// leaves the MSE unchanged.
        #[test]
        fn mse_translation_identity(seed in 0u64..1000, c in -50.0f64..50.0) {
            let mut rng = rng_from(seed);
            let arch = Architecture::new(2, 2).unwrap();
            let th = random_theta(arch, &mut rng, 1.5);
            let data = random_dataset(2, 10, &mut rng);
            let mut shifted = th.values.to_vec();
            shifted[0] += c;
            let th_shifted = ParamVector::from_vec(arch, shifted).unwrap();
            let a = th.mse(&data).unwrap();
            let b = th_shifted.mse(&data.with_shifted_targets(c)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        /// Permuting hidden units leaves eval and MSE unchanged.
        #[test]
        fn hidden_unit_permutation_invariance(seed in 0u64..1000) {
            let mut rng = rng_from(seed);
            let arch = Architecture::new(2, 3).unwrap();
            let th = random_theta(arch, &mut rng, 2.0);
            let a = th.output_weights().to_vec();
            let b = th.hidden_biases().to_vec();
            let w = th.input_weights();
            let perm = [2usize, 0, 1];
            let th_perm = ParamVector::from_parts(
                th.beta(),
                &perm.map(|i| a[i]),
                &perm.map(|i| b[i]),
                &perm.map(|i| w.row(i).to_vec()),
            ).unwrap();
            let data = random_dataset(2, 8, &mut rng);
            for t in 0..data.n() {
                let x = data.row(t).to_vec();
                let lhs = th.eval(&x).unwrap();
                let rhs = th_perm.eval(&x).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
            let (m1, m2) = (th.mse(&data).unwrap(), th_perm.mse(&data).unwrap());
            prop_assert!((m1 - m2).abs() < 1e-12);
        }
    }
}
