use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::check_dim;
use crate::error::{Error, Result};
use crate::geometry::sample_haar_rotation;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKind {
    Spherical(f64),
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

/// A multivariate normal with its root and log-determinant cached.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    mean: Vec<f64>,
    kind: CovarianceKind,
    // Lower Cholesky factor, only for full covariances.
    root: Option<DMatrix<f64>>,
    log_det: f64,
}

impl GaussianSpec {
    pub fn standard(dim: usize) -> Result<Self> {
        Self::spherical(vec![0.0; dim], 1.0)
    }

    pub fn spherical(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("variance must be positive, got {variance}")));
        }
        let log_det = mean.len() as f64 * variance.ln();
        Ok(Self {
            mean,
            kind: CovarianceKind::Spherical(variance),
            root: None,
            log_det,
        })
    }

    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if variances.len() != mean.len() {
            return Err(Error::dim_mismatch("variances", mean.len(), variances.len()));
        }
        if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("diagonal variances must be strictly positive"));
        }
        let log_det = variances.iter().map(|v| v.ln()).sum();
        Ok(Self {
            mean,
            kind: CovarianceKind::Diagonal(variances),
            root: None,
            log_det,
        })
    }

    pub fn full(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(Error::dim_mismatch("covariance", mean.len(), covariance.nrows()));
        }
        let root = crate::geometry::spd_root(&covariance)?.matrix().clone();
        let log_det = 2.0 * root.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            mean,
            kind: CovarianceKind::Full(covariance),
            root: Some(root),
            log_det,
        })
    }

    /// Zero-mean diagonal Gaussian with variances `1, 2, …, dim`.
    pub fn ill_conditioned_diagonal(dim: usize) -> Result<Self> {
        Self::diagonal(vec![0.0; dim], (1..=dim).map(|v| v as f64).collect())
    }

    /// Zero-mean Gaussian with spectrum `1, 2, …, dim` under a random
    /// orthogonal conjugation `U·diag(1..dim)·Uᵀ`, `U` Haar.
    pub fn ill_conditioned_full<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let u = sample_haar_rotation(dim, rng)?.into_inner();
        let spectrum = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| (i + 1) as f64));
        let mut cov = &u * spectrum * u.transpose();
        // Symmetrize away rounding so the covariance is exactly symmetric.
        for j in 0..dim {
            for i in (j + 1)..dim {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
        }
        Self::full(vec![0.0; dim], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn kind(&self) -> &CovarianceKind {
        &self.kind
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let dim = self.dim();
        match &self.kind {
            CovarianceKind::Spherical(v) => DMatrix::identity(dim, dim) * *v,
            CovarianceKind::Diagonal(vs) => DMatrix::from_diagonal(&DVector::from_column_slice(vs)),
            CovarianceKind::Full(c) => c.clone(),
        }
    }

    /// Per-coordinate marginal variances.
    pub fn marginal_variances(&self) -> Vec<f64> {
        match &self.kind {
            CovarianceKind::Spherical(v) => vec![*v; self.dim()],
            CovarianceKind::Diagonal(vs) => vs.clone(),
            CovarianceKind::Full(c) => c.diagonal().iter().copied().collect(),
        }
    }

    /// Squared Mahalanobis distance of `point` from the mean.
    pub fn mahalanobis_sq(&self, point: &[f64]) -> Result<f64> {
        check_dim(self.dim(), point)?;
        let q = match &self.kind {
            CovarianceKind::Spherical(v) => {
                point
                    .iter()
                    .zip(&self.mean)
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
                    / v
            }
            CovarianceKind::Diagonal(vs) => point
                .iter()
                .zip(&self.mean)
                .zip(vs)
                .map(|((x, m), v)| (x - m) * (x - m) / v)
                .sum(),
            CovarianceKind::Full(_) => {
                let root = self.root.as_ref().expect("full covariance has a root");
                let centered: Vec<f64> = point.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
                forward_substitute(root, &centered).iter().map(|z| z * z).sum()
            }
        };
        Ok(q)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        match &self.kind {
            CovarianceKind::Spherical(v) => {
                let sd = v.sqrt();
                z.iter().zip(&self.mean).map(|(z, m)| m + sd * z).collect()
            }
            CovarianceKind::Diagonal(vs) => z
                .iter()
                .zip(&self.mean)
                .zip(vs)
                .map(|((z, m), v)| m + v.sqrt() * z)
                .collect(),
            CovarianceKind::Full(_) => {
                let root = self.root.as_ref().expect("full covariance has a root");
                let lz = root * DVector::from_vec(z);
                lz.iter().zip(&self.mean).map(|(a, m)| a + m).collect()
            }
        }
    }
}

/// `log N(point; mean, Σ)` including the normalizing constant.
pub fn gaussian_log_density(spec: &GaussianSpec, point: &[f64]) -> Result<f64> {
    let q = spec.mahalanobis_sq(point)?;
    Ok(-0.5 * (q + spec.log_det + spec.dim() as f64 * LN_2PI))
}

/// Solves `L·z = b` for lower-triangular `L`.
pub(crate) fn forward_substitute(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[(i, k)] * z[k];
        }
        z[i] = acc / l[(i, i)];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;
    use crate::geometry::cholesky_lower;

    #[test]
    fn standard_normal_at_mode() {
        let g = GaussianSpec::standard(2).unwrap();
        let v = gaussian_log_density(&g, &[0.0, 0.0]).unwrap();
        assert!((v + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn univariate_at_one() {
        let g = GaussianSpec::standard(1).unwrap();
        let v = gaussian_log_density(&g, &[1.0]).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matches_closed_form() {
        let lambdas = [1.0, 2.0, 3.0];
        let g = GaussianSpec::diagonal(vec![0.0; 3], lambdas.to_vec()).unwrap();
        let x = [1.0, 1.0, 1.0];
        let oracle: f64 = lambdas
            .iter()
            .zip(&x)
            .map(|(l, xi)| -0.5 * xi * xi / l - 0.5 * (2.0 * std::f64::consts::PI * l).ln())
            .sum();
        let v = gaussian_log_density(&g, &x).unwrap();
        assert!((v - oracle).abs() < 1e-10);
    }

    #[test]
    fn full_matches_whitened_spherical() {
        let mut rng = chain_rng(4);
        for dim in [2, 5, 9] {
            let g = GaussianSpec::ill_conditioned_full(dim, &mut rng).unwrap();
            let standard = GaussianSpec::standard(dim).unwrap();
            let root = cholesky_lower(&g.covariance_matrix()).unwrap();
            for _ in 0..10 {
                let x: Vec<f64> = (0..dim).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
                let whitened = forward_substitute(&root, &x);
                let lhs = gaussian_log_density(&g, &x).unwrap();
                let rhs = gaussian_log_density(&standard, &whitened).unwrap() - 0.5 * g.log_det();
                assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn ill_conditioned_full_has_requested_spectrum() {
        let mut rng = chain_rng(9);
        let g = GaussianSpec::ill_conditioned_full(6, &mut rng).unwrap();
        let mut eig: Vec<f64> = g.covariance_matrix().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (i, e) in eig.iter().enumerate() {
            assert!((e - (i + 1) as f64).abs() < 1e-9, "eigenvalue {e}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GaussianSpec::diagonal(vec![0.0; 2], vec![1.0, 0.0]).is_err());
        assert!(GaussianSpec::spherical(vec![], 1.0).is_err());
        let g = GaussianSpec::standard(3).unwrap();
        assert!(gaussian_log_density(&g, &[0.0; 2]).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianSpec::full(vec![0.0; 2], not_pd),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn never_nan_for_extreme_points() {
        let g = GaussianSpec::ill_conditioned_diagonal(4).unwrap();
        let v = gaussian_log_density(&g, &[1e200, -1e200, 0.0, 1.0]).unwrap();
        assert!(!v.is_nan());
    }
}
