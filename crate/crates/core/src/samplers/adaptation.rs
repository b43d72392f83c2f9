//! Diminishing adaptation of the proposal scale and preconditioner.
//!
//! The scale (simplex edge length or random-walk standard deviation) follows
//! a Robbins–Monro recursion on its logarithm,
//! `log λ ← log λ + s^(−κ)·(1[moved] − target)`, so the per-step adjustment
//! vanishes as the step count `s` grows. The preconditioner is the running
//! empirical covariance of the chain plus `ε·I`, re-factored every
//! `refresh_every` updates and frozen after a fixed number of updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{spd_root, PreconditionRoot};

pub const DEFAULT_DECAY_EXPONENT: f64 = 0.6;
pub const DEFAULT_REFRESH_EVERY: u64 = 100;
pub const DEFAULT_COVARIANCE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct AdaptationState {
    target_acceptance: Option<f64>,
    log_scale: f64,
    step_count: u64,
    decay_exponent: f64,
    covariance: Option<CovarianceAdaptation>,
}

#[derive(Debug, Clone)]
struct CovarianceAdaptation {
    running_mean: DVector<f64>,
    // Sum of outer products of deviations (Welford).
    scatter: DMatrix<f64>,
    count: u64,
    epsilon: f64,
    refresh_every: u64,
    freeze_after: Option<u64>,
    root: PreconditionRoot,
}

impl AdaptationState {
    /// Fixed scale, no covariance adaptation.
    pub fn fixed(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(Self {
            target_acceptance: None,
            log_scale: scale.ln(),
            step_count: 0,
            decay_exponent: DEFAULT_DECAY_EXPONENT,
            covariance: None,
        })
    }

    /// Adapts the scale towards `target_acceptance`.
    pub fn with_target_acceptance(mut self, target_acceptance: f64) -> Result<Self> {
        if !(target_acceptance > 0.0 && target_acceptance < 1.0) {
            return Err(Error::invalid(format!(
                "target acceptance must lie in (0, 1), got {target_acceptance}"
            )));
        }
        self.target_acceptance = Some(target_acceptance);
        Ok(self)
    }

    pub fn with_decay_exponent(mut self, exponent: f64) -> Result<Self> {
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::invalid(format!(
                "decay exponent must lie in (0.5, 1], got {exponent}"
            )));
        }
        self.decay_exponent = exponent;
        Ok(self)
    }

    /// Enables running-covariance preconditioning in `dim` dimensions.
    pub fn with_covariance(mut self, dim: usize, epsilon: f64, refresh_every: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("covariance epsilon must be positive, got {epsilon}")));
        }
        if refresh_every == 0 {
            return Err(Error::invalid("covariance refresh interval must be positive"));
        }
        self.covariance = Some(CovarianceAdaptation {
            running_mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
            count: 0,
            epsilon,
            refresh_every,
            freeze_after: None,
            root: spd_root(&DMatrix::identity(dim, dim))?,
        });
        Ok(self)
    }

    /// Stops refreshing the preconditioner after `updates` covariance updates.
    pub fn freeze_covariance_after(&mut self, updates: u64) {
        if let Some(cov) = self.covariance.as_mut() {
            cov.freeze_after = Some(updates);
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn target_acceptance(&self) -> Option<f64> {
        self.target_acceptance
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn adapts_covariance(&self) -> bool {
        self.covariance.is_some()
    }

    /// Preconditioner root, if covariance adaptation is enabled.
    pub fn root(&self) -> Option<&PreconditionRoot> {
        self.covariance.as_ref().map(|c| &c.root)
    }

    /// Step size `γ_s = s^(−κ)` for the next scale update.
    pub fn gain(&self) -> f64 {
        ((self.step_count + 1) as f64).powf(-self.decay_exponent)
    }

    /// One Robbins–Monro update of the log scale. A no-op without a target
    /// acceptance rate.
    pub fn adapt_edge_length(&mut self, accepted: bool) {
        let Some(target) = self.target_acceptance else {
            return;
        };
        let indicator = if accepted { 1.0 } else { 0.0 };
        self.log_scale += self.gain() * (indicator - target);
        self.step_count += 1;
    }

    /// Rank-one update of the running mean and covariance, refreshing the
    /// preconditioner root on schedule.
    pub fn adapt_covariance(&mut self, position: &[f64]) -> Result<()> {
        let Some(cov) = self.covariance.as_mut() else {
            return Ok(());
        };
        if cov.freeze_after.is_some_and(|limit| cov.count >= limit) {
            return Ok(());
        }
        if position.len() != cov.running_mean.len() {
            return Err(Error::dim_mismatch("adapted position", cov.running_mean.len(), position.len()));
        }
        cov.count += 1;
        let x = DVector::from_column_slice(position);
        let delta = &x - &cov.running_mean;
        cov.running_mean += &delta / cov.count as f64;
        let delta_after = &x - &cov.running_mean;
        cov.scatter.ger(1.0, &delta, &delta_after, 1.0);
        if cov.count % cov.refresh_every == 0 {
            let c = cov.effective_covariance();
            // Keep the previous root if rounding breaks positive definiteness.
            match spd_root(&symmetrized(c)) {
                Ok(root) => cov.root = root,
                Err(e) => log::warn!("covariance refresh skipped: {e}"),
            }
        }
        Ok(())
    }

    /// Running covariance (normalized by the update count).
    pub fn running_covariance(&self) -> Option<DMatrix<f64>> {
        self.covariance.as_ref().map(|c| c.running_covariance())
    }

    pub fn running_mean(&self) -> Option<&DVector<f64>> {
        self.covariance.as_ref().map(|c| &c.running_mean)
    }

    /// `running covariance + ε·I`, the matrix whose root preconditions proposals.
    pub fn effective_covariance(&self) -> Option<DMatrix<f64>> {
        self.covariance.as_ref().map(|c| c.effective_covariance())
    }
}

impl CovarianceAdaptation {
    fn running_covariance(&self) -> DMatrix<f64> {
        if self.count == 0 {
            return DMatrix::zeros(self.scatter.nrows(), self.scatter.ncols());
        }
        &self.scatter / self.count as f64
    }

    fn effective_covariance(&self) -> DMatrix<f64> {
        let n = self.scatter.nrows();
        self.running_covariance() + DMatrix::identity(n, n) * self.epsilon
    }
}

fn symmetrized(mut c: DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn persistent_acceptance_grows_edge() {
        let mut a = AdaptationState::fixed(1.0)
            .unwrap()
            .with_target_acceptance(0.675)
            .unwrap();
        let mut last = a.scale();
        for _ in 0..100 {
            a.adapt_edge_length(true);
            assert!(a.scale() > last);
            last = a.scale();
        }
    }

    #[test]
    fn gain_diminishes() {
        let mut a = AdaptationState::fixed(1.0)
            .unwrap()
            .with_target_acceptance(0.5)
            .unwrap();
        let first = a.gain();
        for _ in 0..10_000 {
            a.adapt_edge_length(false);
        }
        assert!(a.gain() < first * 0.01);
        assert!((a.gain() - 10_001f64.powf(-0.6)).abs() < 1e-15);
    }

    #[test]
    fn fixed_scale_does_not_move() {
        let mut a = AdaptationState::fixed(2.0).unwrap();
        a.adapt_edge_length(true);
        assert_eq!(a.scale(), 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AdaptationState::fixed(0.0).is_err());
        let a = AdaptationState::fixed(1.0).unwrap();
        assert!(a.clone().with_target_acceptance(1.0).is_err());
        assert!(a.clone().with_decay_exponent(0.5).is_err());
        assert!(a.clone().with_decay_exponent(1.0).is_ok());
        assert!(a.with_covariance(3, 0.0, 100).is_err());
    }

    #[test]
    fn running_covariance_of_iid_normals() {
        let dim = 4;
        let mut a = AdaptationState::fixed(1.0)
            .unwrap()
            .with_covariance(dim, 1e-6, 100)
            .unwrap();
        let mut rng = chain_rng(6);
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            a.adapt_covariance(&x).unwrap();
        }
        let c = a.running_covariance().unwrap();
        let identity = DMatrix::<f64>::identity(dim, dim);
        let rel = (&c - &identity).norm() / identity.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
        let root_cov = a.root().unwrap().covariance();
        assert!((root_cov - a.effective_covariance().unwrap()).amax() < 0.05);
    }

    #[test]
    fn constant_stream_regularizes_to_epsilon() {
        let mut a = AdaptationState::fixed(1.0)
            .unwrap()
            .with_covariance(3, 1e-4, 10)
            .unwrap();
        for _ in 0..1000 {
            a.adapt_covariance(&[1.0, -2.0, 3.0]).unwrap();
        }
        let c = a.effective_covariance().unwrap();
        let expected = DMatrix::<f64>::identity(3, 3) * 1e-4;
        assert!((c - &expected).amax() < 1e-15);
        let root = a.root().unwrap();
        assert!((root.covariance() - expected).amax() < 1e-15);
    }

    #[test]
    fn frozen_covariance_stops_updating() {
        let mut a = AdaptationState::fixed(1.0)
            .unwrap()
            .with_covariance(1, 1e-6, 1)
            .unwrap();
        a.freeze_covariance_after(2);
        a.adapt_covariance(&[1.0]).unwrap();
        a.adapt_covariance(&[3.0]).unwrap();
        let before = a.root().unwrap().clone();
        a.adapt_covariance(&[100.0]).unwrap();
        assert_eq!(a.root().unwrap(), &before);
        assert_eq!(a.running_mean().unwrap()[0], 2.0);
    }
}
