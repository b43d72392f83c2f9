//! Target distributions.

mod gaussian;
mod gp;
mod mixture;

pub use gaussian::{gaussian_log_density, CovarianceKind, GaussianSpec};
pub use gp::{
    build_gp_kernel, gp_hyper_conditional, gp_latent_log_density, load_election_csv,
    ElectionData, GpClassificationModel, GpHyper, ELECTION_HEADER, ELECTION_ROWS,
    HYPER_NAMES, HYPER_PRIOR_SD,
};
pub use mixture::{mixture_log_density, MixtureSpec};

use crate::error::{Error, Result};
use crate::ChainRng;

/// A log-density over `R^dim`.
///
/// `log_density` returns `-inf` for zero-density points and never NaN.
/// Evaluation must be deterministic. Targets with parameters that are updated
/// by a separate Gibbs-style step (the GP hyperparameters) expose them through
/// the `auxiliary_*` methods; everything else keeps the defaults.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, point: &[f64]) -> Result<f64>;

    fn descriptor(&self) -> String;

    fn auxiliary_names(&self) -> &[&'static str] {
        &[]
    }

    fn auxiliary_values(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Updates auxiliary parameters conditional on `position`. Returns `true`
    /// when the log density of `position` may have changed.
    fn update_auxiliary(&mut self, _position: &[f64], _rng: &mut ChainRng) -> Result<bool> {
        Ok(false)
    }
}

pub(crate) fn check_dim(expected: usize, point: &[f64]) -> Result<()> {
    if point.len() != expected {
        return Err(Error::dim_mismatch("point", expected, point.len()));
    }
    Ok(())
}

/// Uniform density on the box `[-half_width, half_width]^dim`.
#[derive(Debug, Clone)]
pub struct FlatTarget {
    dim: usize,
    half_width: f64,
}

impl FlatTarget {
    pub fn new(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { dim, half_width })
    }
}

impl Target for FlatTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, point: &[f64]) -> Result<f64> {
        check_dim(self.dim, point)?;
        if point.iter().all(|x| x.abs() <= self.half_width) {
            Ok(-(self.dim as f64) * (2.0 * self.half_width).ln())
        } else {
            Ok(f64::NEG_INFINITY)
        }
    }

    fn descriptor(&self) -> String {
        format!("uniform box, dim {}, half-width {}", self.dim, self.half_width)
    }
}

impl Target for GaussianSpec {
    fn dim(&self) -> usize {
        GaussianSpec::dim(self)
    }

    fn log_density(&self, point: &[f64]) -> Result<f64> {
        gaussian_log_density(self, point)
    }

    fn descriptor(&self) -> String {
        let kind = match self.kind() {
            CovarianceKind::Spherical(v) => format!("spherical variance {v}"),
            CovarianceKind::Diagonal(_) => "diagonal covariance".to_string(),
            CovarianceKind::Full(_) => "full covariance".to_string(),
        };
        format!("gaussian, dim {}, {kind}", self.dim())
    }
}

impl Target for MixtureSpec {
    fn dim(&self) -> usize {
        MixtureSpec::dim(self)
    }

    fn log_density(&self, point: &[f64]) -> Result<f64> {
        mixture_log_density(self, point)
    }

    fn descriptor(&self) -> String {
        format!(
            "gaussian mixture, dim {}, {} components",
            self.dim(),
            self.components().len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_target_box() {
        let t = FlatTarget::new(3, 2.0).unwrap();
        let inside = t.log_density(&[0.0, 1.9, -2.0]).unwrap();
        assert!((inside + 3.0 * 4.0_f64.ln()).abs() < 1e-15);
        assert_eq!(t.log_density(&[0.0, 2.1, 0.0]).unwrap(), f64::NEG_INFINITY);
        assert!(t.log_density(&[0.0]).is_err());
        assert!(FlatTarget::new(0, 1.0).is_err());
    }
}
