use rand::Rng;

use super::gaussian::{gaussian_log_density, GaussianSpec};
use crate::error::{Error, Result};
use crate::samplers::log_sum_exp;

/// A finite mixture of Gaussians. Weights are positive and sum to one.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    components: Vec<(f64, GaussianSpec)>,
    log_weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(components: Vec<(f64, GaussianSpec)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::invalid("mixture needs at least one component"));
        };
        let dim = first.dim();
        if components.iter().any(|(_, g)| g.dim() != dim) {
            return Err(Error::invalid("mixture components have different dimensions"));
        }
        if components.iter().any(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let log_weights = components.iter().map(|(w, _)| w.ln()).collect();
        Ok(Self {
            components,
            log_weights,
        })
    }

    /// Equal-weight mixture of `N(0, I)` and `N(separation·1, I)`.
    pub fn bimodal(dim: usize, separation: f64) -> Result<Self> {
        let near = GaussianSpec::standard(dim)?;
        let far = GaussianSpec::spherical(vec![separation; dim], 1.0)?;
        Self::new(vec![(0.5, near), (0.5, far)])
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    pub fn components(&self) -> &[(f64, GaussianSpec)] {
        &self.components
    }

    /// Component means, in order.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|(_, g)| g.mean().to_vec()).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, g) in &self.components {
            acc += w;
            if u < acc {
                return g.sample(rng);
            }
        }
        self.components[self.components.len() - 1].1.sample(rng)
    }
}

/// `log Σ_k w_k N_k(point)`, evaluated with a max-shifted log-sum-exp.
pub fn mixture_log_density(spec: &MixtureSpec, point: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(spec.components.len());
    for ((_, g), lw) in spec.components.iter().zip(&spec.log_weights) {
        terms.push(lw + gaussian_log_density(g, point)?);
    }
    Ok(log_sum_exp(&terms))
}
