//! Gaussian process classification with a logit link.
//!
//! Latent values `θ ∈ R^n` have a zero-mean GP prior with kernel
//! `κ(x_i, x_j) = ξ² + η²·exp(−ρ²‖x_i − x_j‖²) + σ²·δ_ij`, and each binary
//! label is Bernoulli with probability `logistic(θ_i)`. The multiproposal
//! kernels update `θ`; the four hyperparameters are refreshed between
//! iterations by univariate slice sampling on the log scale under independent
//! `LogNormal(0, 3²)` priors.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use super::check_dim;
use super::gaussian::forward_substitute;
use crate::error::{Error, Result};
use crate::geometry::cholesky_lower;
use crate::samplers::slice::SliceSampler;
use crate::ChainRng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Required CSV header, in order.
pub const ELECTION_HEADER: [&str; 5] = ["state_code", "latitude", "longitude", "population", "label"];

/// Number of winner-take-all states in the dataset.
pub const ELECTION_ROWS: usize = 48;

pub const HYPER_NAMES: [&str; 4] = ["eta2", "xi2", "rho2", "sigma2"];

/// Standard deviation of the normal prior on each log-hyperparameter.
pub const HYPER_PRIOR_SD: f64 = 3.0;

/// Parsed election dataset.
#[derive(Debug, Clone)]
pub struct ElectionData {
    pub states: Vec<String>,
    /// Raw `(latitude, longitude, population)` rows.
    pub raw: DMatrix<f64>,
    /// Standardized predictors: latitude, longitude, log population, each
    /// centered and scaled to unit (population) variance.
    pub predictors: DMatrix<f64>,
    /// 1 = Trump, 0 = Clinton.
    pub labels: Vec<u8>,
}

/// Reads and validates the election CSV, then standardizes its predictors.
pub fn load_election_csv(path: impl AsRef<Path>) -> Result<ElectionData> {
    let path = path.as_ref();
    let data_err = |row: Option<usize>, column: Option<&str>, message: String| Error::Data {
        path: path.to_path_buf(),
        row,
        column: column.map(str::to_string),
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => data_err(None, None, format!("{other:?}")),
        })?;

    let header = reader
        .headers()
        .map_err(|e| data_err(None, None, e.to_string()))?
        .clone();
    let header: Vec<&str> = header.iter().collect();
    if header != ELECTION_HEADER {
        return Err(data_err(
            None,
            None,
            format!("expected header `{}`, found `{}`", ELECTION_HEADER.join(","), header.join(",")),
        ));
    }

    let mut states = Vec::new();
    let mut seen = HashSet::new();
    let mut raw_rows: Vec<[f64; 3]> = Vec::new();
    let mut labels = Vec::new();

    for (index, record) in reader.records().enumerate() {
        let row = index + 1;
        let record = record.map_err(|e| data_err(Some(row), None, e.to_string()))?;
        if record.len() != ELECTION_HEADER.len() {
            return Err(data_err(
                Some(row),
                None,
                format!("expected {} columns, found {}", ELECTION_HEADER.len(), record.len()),
            ));
        }
        let code = &record[0];
        if code.len() != 2 || !code.chars().all(|c| c.is_ascii_uppercase()) {
            return Err(data_err(
                Some(row),
                Some("state_code"),
                format!("`{code}` is not a two-letter state code"),
            ));
        }
        if !seen.insert(code.to_string()) {
            return Err(data_err(
                Some(row),
                Some("state_code"),
                format!("duplicate state code `{code}`"),
            ));
        }
        let number = |col: usize| -> Result<f64> {
            let field = &record[col];
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(data_err(
                    Some(row),
                    Some(ELECTION_HEADER[col]),
                    format!("`{field}` is not a finite number"),
                )),
            }
        };
        let latitude = number(1)?;
        let longitude = number(2)?;
        let population = match record[3].parse::<u64>() {
            Ok(p) if p > 0 => p as f64,
            _ => {
                return Err(data_err(
                    Some(row),
                    Some("population"),
                    format!("`{}` is not a positive integer", &record[3]),
                ))
            }
        };
        let label = match &record[4] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(data_err(
                    Some(row),
                    Some("label"),
                    format!("label `{other}` is not 0 or 1"),
                ))
            }
        };
        states.push(code.to_string());
        raw_rows.push([latitude, longitude, population]);
        labels.push(label);
    }

    if raw_rows.len() != ELECTION_ROWS {
        return Err(data_err(
            None,
            None,
            format!("expected {ELECTION_ROWS} data rows, found {}", raw_rows.len()),
        ));
    }

    let raw = DMatrix::from_fn(raw_rows.len(), 3, |i, j| raw_rows[i][j]);
    let predictors = standardize_predictors(&raw);
    Ok(ElectionData {
        states,
        raw,
        predictors,
        labels,
    })
}

/// Log-transforms the population column, then centers and scales every
/// column to unit variance (dividing by `n`).
pub fn standardize_predictors(raw: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = raw.clone();
    for v in x.column_mut(2).iter_mut() {
        *v = v.ln();
    }
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        for v in col.iter_mut() {
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
    }
    x
}

/// Kernel hyperparameters `(η², ξ², ρ², σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub eta2: f64,
    pub xi2: f64,
    pub rho2: f64,
    pub sigma2: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self {
            eta2: 1.0,
            xi2: 1.0,
            rho2: 1.0,
            sigma2: 1.0,
        }
    }
}

impl GpHyper {
    pub fn as_array(&self) -> [f64; 4] {
        [self.eta2, self.xi2, self.rho2, self.sigma2]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            eta2: v[0],
            xi2: v[1],
            rho2: v[2],
            sigma2: v[3],
        }
    }

    pub fn with(&self, index: usize, value: f64) -> Self {
        let mut v = self.as_array();
        v[index] = value;
        Self::from_array(v)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in HYPER_NAMES.iter().zip(self.as_array()) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Log prior density of the log-hyperparameters: independent `N(0, 3²)`.
    pub fn log_prior(&self) -> f64 {
        let var = HYPER_PRIOR_SD * HYPER_PRIOR_SD;
        self.as_array()
            .iter()
            .map(|h| {
                let u = h.ln();
                -0.5 * (u * u / var + var.ln() + LN_2PI)
            })
            .sum()
    }
}

fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let mut acc = 0.0;
            for k in 0..x.ncols() {
                let diff = x[(i, k)] - x[(j, k)];
                acc += diff * diff;
            }
            d[(i, j)] = acc;
            d[(j, i)] = acc;
        }
    }
    d
}

fn kernel_from_sq_distances(sq: &DMatrix<f64>, hyper: &GpHyper) -> DMatrix<f64> {
    let n = sq.nrows();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = hyper.xi2 + hyper.eta2 + hyper.sigma2;
        for i in (j + 1)..n {
            let v = hyper.xi2 + hyper.eta2 * (-hyper.rho2 * sq[(i, j)]).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Builds the `n × n` covariance matrix for predictors stored one observation
/// per row. Both triangles come from one computation, so the result is
/// exactly symmetric.
pub fn build_gp_kernel(x: &DMatrix<f64>, hyper: &GpHyper) -> Result<DMatrix<f64>> {
    hyper.validate()?;
    let k = kernel_from_sq_distances(&squared_distances(x), hyper);
    cholesky_lower(&k)?;
    Ok(k)
}

/// GP classification posterior over the latent vector, with the kernel
/// Cholesky factor cached for the current hyperparameters.
#[derive(Debug, Clone)]
pub struct GpClassificationModel {
    sq_distances: DMatrix<f64>,
    labels: Vec<f64>,
    hyper: GpHyper,
    root: DMatrix<f64>,
    log_det: f64,
    slice: SliceSampler,
}

impl GpClassificationModel {
    pub fn new(x: &DMatrix<f64>, labels: &[u8], hyper: GpHyper) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::dim_mismatch("labels", x.nrows(), labels.len()));
        }
        if x.nrows() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        hyper.validate()?;
        let sq_distances = squared_distances(x);
        let (root, log_det) = factor(&sq_distances, &hyper)?;
        Ok(Self {
            sq_distances,
            labels: labels.iter().map(|&l| l as f64).collect(),
            hyper,
            root,
            log_det,
            slice: SliceSampler::default(),
        })
    }

    pub fn from_data(data: &ElectionData, hyper: GpHyper) -> Result<Self> {
        Self::new(&data.predictors, &data.labels, hyper)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Replaces the hyperparameters and rebuilds the cached factorization.
    pub fn set_hyper(&mut self, hyper: GpHyper) -> Result<()> {
        hyper.validate()?;
        let (root, log_det) = factor(&self.sq_distances, &hyper)?;
        self.hyper = hyper;
        self.root = root;
        self.log_det = log_det;
        Ok(())
    }

    pub fn kernel(&self) -> DMatrix<f64> {
        kernel_from_sq_distances(&self.sq_distances, &self.hyper)
    }

    /// `Σ_i [y_i·θ_i − log(1 + exp θ_i)]`.
    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.n(), theta)?;
        Ok(theta
            .iter()
            .zip(&self.labels)
            .map(|(t, y)| if *y == 1.0 { -softplus(-t) } else { -softplus(*t) })
            .sum())
    }

    /// `log N(θ; 0, K)` for the cached kernel.
    pub fn log_prior_latent(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.n(), theta)?;
        Ok(gaussian_prior(&self.root, self.log_det, theta))
    }
}

fn factor(sq: &DMatrix<f64>, hyper: &GpHyper) -> Result<(DMatrix<f64>, f64)> {
    let k = kernel_from_sq_distances(sq, hyper);
    let root = cholesky_lower(&k)?;
    let log_det = 2.0 * root.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((root, log_det))
}

fn gaussian_prior(root: &DMatrix<f64>, log_det: f64, theta: &[f64]) -> f64 {
    let z = forward_substitute(root, theta);
    let q: f64 = z.iter().map(|v| v * v).sum();
    let value = -0.5 * (q + log_det + theta.len() as f64 * LN_2PI);
    if value.is_nan() {
        f64::NEG_INFINITY
    } else {
        value
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Bernoulli-logit log likelihood plus `log N(θ; 0, K)`, normalizer included.
pub fn gp_latent_log_density(model: &GpClassificationModel, theta: &[f64]) -> Result<f64> {
    Ok(model.log_likelihood(theta)? + model.log_prior_latent(theta)?)
}

/// `log N(θ; 0, K(candidate)) + log prior(candidate)`.
///
/// A candidate whose kernel cannot be factored has zero density.
pub fn gp_hyper_conditional(
    model: &GpClassificationModel,
    candidate: &GpHyper,
    theta: &[f64],
) -> Result<f64> {
    check_dim(model.n(), theta)?;
    if candidate.validate().is_err() {
        return Ok(f64::NEG_INFINITY);
    }
    match factor(&model.sq_distances, candidate) {
        Ok((root, log_det)) => Ok(gaussian_prior(&root, log_det, theta) + candidate.log_prior()),
        Err(_) => Ok(f64::NEG_INFINITY),
    }
}

impl super::Target for GpClassificationModel {
    fn dim(&self) -> usize {
        self.n()
    }

    fn log_density(&self, point: &[f64]) -> Result<f64> {
        gp_latent_log_density(self, point)
    }

    fn descriptor(&self) -> String {
        format!("gp classification, n = {}", self.n())
    }

    fn auxiliary_names(&self) -> &[&'static str] {
        &HYPER_NAMES
    }

    fn auxiliary_values(&self) -> Vec<f64> {
        self.hyper.as_array().to_vec()
    }

    /// One slice-sampling pass over the log-hyperparameters in fixed order.
    fn update_auxiliary(&mut self, position: &[f64], rng: &mut ChainRng) -> Result<bool> {
        check_dim(self.n(), position)?;
        let mut hyper = self.hyper;
        for index in 0..HYPER_NAMES.len() {
            let current = hyper.as_array()[index].ln();
            let model = &*self;
            let base = hyper;
            let conditional = |u: f64| {
                gp_hyper_conditional(model, &base.with(index, u.exp()), position)
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let next = self.slice.step(current, conditional, rng);
            hyper = hyper.with(index, next.exp());
        }
        self.set_hyper(hyper)?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Dense-inverse oracle for `log N(θ; 0, K) + loglik`, independent of the
    /// Cholesky path.
    fn dense_oracle(x: &DMatrix<f64>, labels: &[u8], hyper: &GpHyper, theta: &[f64]) -> (f64, f64) {
        let n = x.nrows();
        let k = DMatrix::from_fn(n, n, |i, j| {
            let mut d2 = 0.0;
            for c in 0..x.ncols() {
                d2 += (x[(i, c)] - x[(j, c)]).powi(2);
            }
            hyper.xi2 + hyper.eta2 * (-hyper.rho2 * d2).exp() + if i == j { hyper.sigma2 } else { 0.0 }
        });
        let inv = k.clone().try_inverse().unwrap();
        let t = nalgebra::DVector::from_column_slice(theta);
        let quad = (t.transpose() * &inv * &t)[(0, 0)];
        let det = k.determinant();
        let prior = -0.5 * quad - 0.5 * ((2.0 * std::f64::consts::PI).powi(n as i32) * det).ln();
        let lik: f64 = theta
            .iter()
            .zip(labels)
            .map(|(t, &y)| {
                let p = 1.0 / (1.0 + (-t).exp());
                if y == 1 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum();
        (prior, lik)
    }

    fn synthetic(n: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>, Vec<f64>) {
        let mut rng = chain_rng(seed);
        let x = DMatrix::from_fn(n, 3, |_, _| StandardNormal.sample(&mut rng));
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        let theta = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        (x, labels, theta)
    }

    #[test]
    fn kernel_diagonal_and_far_limit() {
        let x = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1e3, 0.0, 0.0, 0.0, 2e3, 0.0]);
        let h = GpHyper {
            eta2: 0.7,
            xi2: 0.3,
            rho2: 1.1,
            sigma2: 0.2,
        };
        let k = build_gp_kernel(&x, &h).unwrap();
        for i in 0..3 {
            assert_eq!(k[(i, i)], 0.3 + 0.7 + 0.2);
        }
        assert_eq!(k[(0, 1)], 0.3);
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn kernel_matches_scalar_formula() {
        // Pairwise distances 1, 2 and √5.
        let x = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        let k = build_gp_kernel(&x, &GpHyper::default()).unwrap();
        let kappa = |d2: f64, same: bool| 1.0 + (-d2).exp() + if same { 1.0 } else { 0.0 };
        let expected = [
            [kappa(0.0, true), kappa(1.0, false), kappa(4.0, false)],
            [kappa(1.0, false), kappa(0.0, true), kappa(5.0, false)],
            [kappa(4.0, false), kappa(5.0, false), kappa(0.0, true)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kernel_rejects_nonpositive_hyper() {
        let x = DMatrix::zeros(2, 3);
        let h = GpHyper::default().with(2, 0.0);
        assert!(matches!(build_gp_kernel(&x, &h), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn latent_density_at_zero() {
        let (x, labels, _) = synthetic(6, 1);
        let model = GpClassificationModel::new(&x, &labels, GpHyper::default()).unwrap();
        let theta = vec![0.0; 6];
        let lik = model.log_likelihood(&theta).unwrap();
        assert!((lik + 6.0 * 2.0_f64.ln()).abs() < 1e-14);
        let k = model.kernel();
        let expected_prior = -0.5 * ((2.0 * std::f64::consts::PI).powi(6) * k.determinant()).ln();
        assert!((model.log_prior_latent(&theta).unwrap() - expected_prior).abs() < 1e-10);
    }

    #[test]
    fn likelihood_saturates() {
        let x = DMatrix::zeros(1, 3);
        let model = GpClassificationModel::new(&x, &[1], GpHyper::default()).unwrap();
        let mut last = f64::NEG_INFINITY;
        for t in [1.0, 10.0, 30.0, 100.0] {
            let v = model.log_likelihood(&[t]).unwrap();
            assert!(v < 0.0 && v > last);
            last = v;
        }
        assert!(last > -1e-40);
    }

    #[test]
    fn latent_density_matches_dense_oracle() {
        let (x, labels, theta) = synthetic(4, 2);
        let h = GpHyper {
            eta2: 1.3,
            xi2: 0.4,
            rho2: 0.8,
            sigma2: 0.5,
        };
        let model = GpClassificationModel::new(&x, &labels, h).unwrap();
        let (prior, lik) = dense_oracle(&x, &labels, &h, &theta);
        let v = gp_latent_log_density(&model, &theta).unwrap();
        assert!((v - (prior + lik)).abs() < 1e-8);
    }

    #[test]
    fn hyper_conditional_consistency_and_ratio() {
        let (x, labels, theta) = synthetic(4, 3);
        let h = GpHyper::default();
        let model = GpClassificationModel::new(&x, &labels, h).unwrap();
        let same = gp_hyper_conditional(&model, &h, &theta).unwrap();
        let expected = model.log_prior_latent(&theta).unwrap() + h.log_prior();
        assert!((same - expected).abs() < 1e-12);

        let a = h.with(0, 2.5);
        let b = h.with(2, 0.3);
        let ratio = gp_hyper_conditional(&model, &a, &theta).unwrap()
            - gp_hyper_conditional(&model, &b, &theta).unwrap();
        let oracle = (dense_oracle(&x, &labels, &a, &theta).0 + a.log_prior())
            - (dense_oracle(&x, &labels, &b, &theta).0 + b.log_prior());
        assert!((ratio - oracle).abs() < 1e-8);
    }

    #[test]
    fn hyper_conditional_degenerate_nugget() {
        // Duplicate predictors make the kernel singular without the nugget.
        let x = DMatrix::from_row_slice(2, 3, &[0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let model = GpClassificationModel::new(&x, &[0, 1], GpHyper::default()).unwrap();
        let theta = [1.0, -1.0];
        let mut last = f64::INFINITY;
        for s in [1e-2, 1e-6, 1e-12, 1e-300] {
            let v = gp_hyper_conditional(&model, &GpHyper::default().with(3, s), &theta).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last == f64::NEG_INFINITY || last < -1e10, "got {last}");
        let zero = gp_hyper_conditional(&model, &GpHyper::default().with(3, 0.0), &theta).unwrap();
        assert_eq!(zero, f64::NEG_INFINITY);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let (x, labels, _) = synthetic(4, 5);
        let model = GpClassificationModel::new(&x, &labels, GpHyper::default()).unwrap();
        assert!(gp_latent_log_density(&model, &[0.0; 3]).is_err());
        assert!(gp_hyper_conditional(&model, &GpHyper::default(), &[0.0; 5]).is_err());
    }

    #[test]
    fn auxiliary_sweep_updates_hyper_and_cache() {
        use crate::targets::Target;
        let (x, labels, theta) = synthetic(8, 6);
        let mut model = GpClassificationModel::new(&x, &labels, GpHyper::default()).unwrap();
        let mut rng = chain_rng(1);
        let before = model.hyper();
        assert!(model.update_auxiliary(&theta, &mut rng).unwrap());
        let after = model.hyper();
        assert_ne!(before, after);
        let fresh = GpClassificationModel::new(&x, &labels, after).unwrap();
        assert_eq!(
            model.log_density(&theta).unwrap(),
            fresh.log_density(&theta).unwrap()
        );
    }
}
