use rand::Rng;
use rand_distr::StandardNormal;

use super::{AdaptationState, ChainState, Kernel, Transition};
use crate::error::{Error, Result};
use crate::geometry::PreconditionRoot;
use crate::targets::Target;
use crate::ChainRng;

/// Gaussian random-walk proposal `center + scale·L·z`.
pub(crate) fn gaussian_proposal(
    center: &[f64],
    scale: f64,
    root: Option<&PreconditionRoot>,
    rng: &mut ChainRng,
) -> Vec<f64> {
    let z: Vec<f64> = (0..center.len()).map(|_| rng.sample(StandardNormal)).collect();
    match root {
        None => center.iter().zip(&z).map(|(c, z)| c + scale * z).collect(),
        Some(root) => {
            let l = root.matrix();
            center
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    // L is lower triangular.
                    let lz: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                    c + scale * lz
                })
                .collect()
        }
    }
}

pub(crate) fn check_scale(scale: f64, dim: usize, state: &ChainState, root: Option<&PreconditionRoot>) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("proposal scale must be positive, got {scale}")));
    }
    if state.dim() != dim {
        return Err(Error::dim_mismatch("chain state", dim, state.dim()));
    }
    if let Some(root) = root {
        if root.dim() != dim {
            return Err(Error::dim_mismatch("precondition root", dim, root.dim()));
        }
    }
    Ok(())
}

/// One random-walk Metropolis step. `selected` is 0 for the proposal and 1
/// for the current state.
pub fn rwm_step(
    state: &ChainState,
    target: &dyn Target,
    scale: f64,
    root: Option<&PreconditionRoot>,
    rng: &mut ChainRng,
) -> Result<Transition> {
    check_scale(scale, target.dim(), state, root)?;
    let proposal = gaussian_proposal(state.position(), scale, root, rng);
    let log_density = target.log_density(&proposal)?;
    let u: f64 = rng.random();
    if u.ln() < log_density - state.log_density() {
        Ok(Transition {
            state: state.advance(proposal, log_density),
            selected: 0,
            accepted: true,
        })
    } else {
        Ok(Transition {
            state: state.stay(),
            selected: 1,
            accepted: false,
        })
    }
}

/// Random-walk Metropolis with optional scale and covariance adaptation.
#[derive(Debug, Clone)]
pub struct RwmKernel {
    name: String,
    adaptation: AdaptationState,
    freeze_fraction: f64,
}

impl RwmKernel {
    pub fn new(name: impl Into<String>, adaptation: AdaptationState) -> Self {
        Self {
            name: name.into(),
            adaptation,
            freeze_fraction: 0.5,
        }
    }

    pub fn with_freeze_fraction(mut self, fraction: f64) -> Self {
        self.freeze_fraction = fraction;
        self
    }

    pub fn adaptation(&self) -> &AdaptationState {
        &self.adaptation
    }
}

impl Kernel for RwmKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn prepare(&mut self, _dim: usize, n_iterations: usize) -> Result<()> {
        let freeze = (n_iterations as f64 * self.freeze_fraction).ceil() as u64;
        self.adaptation.freeze_covariance_after(freeze);
        Ok(())
    }

    fn step(&mut self, state: &ChainState, target: &dyn Target, rng: &mut ChainRng) -> Result<Transition> {
        let transition = rwm_step(state, target, self.adaptation.scale(), self.adaptation.root(), rng)?;
        self.adaptation.adapt_edge_length(transition.accepted);
        self.adaptation.adapt_covariance(transition.state.position())?;
        Ok(transition)
    }

    fn tuning(&self) -> f64 {
        self.adaptation.scale()
    }

    fn evaluations_per_step(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;
    use crate::geometry::spd_root;
    use crate::targets::{FlatTarget, GaussianSpec};
    use nalgebra::DMatrix;

    #[test]
    fn flat_target_always_accepts() {
        let target = FlatTarget::new(4, 1e9).unwrap();
        let mut state = ChainState::new(&target, vec![0.0; 4]).unwrap();
        let mut rng = chain_rng(1);
        for _ in 0..10_000 {
            let t = rwm_step(&state, &target, 1.0, None, &mut rng).unwrap();
            assert!(t.accepted);
            state = t.state;
        }
    }

    #[test]
    fn univariate_variance() {
        let target = GaussianSpec::standard(1).unwrap();
        let mut state = ChainState::new(&target, vec![0.0]).unwrap();
        let mut rng = chain_rng(2);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            state = rwm_step(&state, &target, 2.38, None, &mut rng).unwrap().state;
            let x = state.position()[0];
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn preconditioned_proposal_uses_root() {
        let c = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let root = spd_root(&c).unwrap();
        let mut rng = chain_rng(3);
        let n = 200_000;
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            let x = gaussian_proposal(&[0.0, 0.0], 1.0, Some(&root), &mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    cov[(i, j)] += x[i] * x[j] / n as f64;
                }
            }
        }
        assert!((cov - c).amax() < 0.05);
    }

    #[test]
    fn rejects_non_positive_scale() {
        let target = GaussianSpec::standard(2).unwrap();
        let state = ChainState::new(&target, vec![0.0; 2]).unwrap();
        assert!(rwm_step(&state, &target, 0.0, None, &mut chain_rng(1)).is_err());
    }
}
