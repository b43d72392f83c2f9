use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::adaptation::{DEFAULT_COVARIANCE_EPSILON, DEFAULT_DECAY_EXPONENT, DEFAULT_REFRESH_EVERY};
use super::{AdaptationState, Kernel, MtmKernel, RwmKernel, SimplicialConfig, SimplicialKernel};
use crate::error::{Error, Result};

/// Declarative description of a kernel, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Registered algorithm name, e.g. `simpl` or `pc-rwm`.
    pub algorithm: String,
    /// Display name; defaults to the algorithm name.
    #[serde(default)]
    pub label: Option<String>,
    /// Initial edge length or proposal standard deviation.
    #[serde(default)]
    pub scale: Option<f64>,
    /// Enables Robbins–Monro scale adaptation towards this rate.
    #[serde(default)]
    pub target_acceptance: Option<f64>,
    /// Simplex dimension `P` for simplicial kernels (defaults to `D`).
    #[serde(default)]
    pub proposals: Option<usize>,
    /// Number of tries for multiple-try Metropolis (defaults to `D + 1`).
    #[serde(default)]
    pub n_tries: Option<usize>,
    #[serde(default)]
    pub decay_exponent: Option<f64>,
    #[serde(default)]
    pub covariance_refresh: Option<u64>,
    #[serde(default)]
    pub covariance_epsilon: Option<f64>,
    /// Fraction of the run after which covariance adaptation stops.
    #[serde(default)]
    pub covariance_freeze_fraction: Option<f64>,
}

impl KernelSpec {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            label: None,
            scale: None,
            target_acceptance: None,
            proposals: None,
            n_tries: None,
            decay_exponent: None,
            covariance_refresh: None,
            covariance_epsilon: None,
            covariance_freeze_fraction: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn with_target_acceptance(mut self, rate: f64) -> Self {
        self.target_acceptance = Some(rate);
        self
    }

    pub fn with_proposals(mut self, proposals: usize) -> Self {
        self.proposals = Some(proposals);
        self
    }

    pub fn with_tries(mut self, n_tries: usize) -> Self {
        self.n_tries = Some(n_tries);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn display_name(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.algorithm)
    }

    fn freeze_fraction(&self) -> Result<f64> {
        let f = self.covariance_freeze_fraction.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid(format!("covariance freeze fraction must lie in [0, 1], got {f}")));
        }
        Ok(f)
    }

    fn adaptation(&self, dim: usize, default_scale: f64, covariance: bool) -> Result<AdaptationState> {
        let mut a = AdaptationState::fixed(self.scale.unwrap_or(default_scale))?
            .with_decay_exponent(self.decay_exponent.unwrap_or(DEFAULT_DECAY_EXPONENT))?;
        if let Some(rate) = self.target_acceptance {
            a = a.with_target_acceptance(rate)?;
        }
        if covariance {
            a = a.with_covariance(
                dim,
                self.covariance_epsilon.unwrap_or(DEFAULT_COVARIANCE_EPSILON),
                self.covariance_refresh.unwrap_or(DEFAULT_REFRESH_EVERY),
            )?;
        }
        Ok(a)
    }
}

/// Default initial simplex edge length.
pub const DEFAULT_EDGE_LENGTH: f64 = 2.4;

/// Default random-walk standard deviation `2.38/√D`.
pub fn default_walk_scale(dim: usize) -> f64 {
    2.38 / (dim as f64).sqrt()
}

/// Builds a kernel for a target of dimension `dim`.
pub type KernelFactory = Box<dyn Fn(&KernelSpec, usize) -> Result<Box<dyn Kernel>> + Send + Sync>;

/// Kernel constructors by algorithm name.
pub struct KernelRegistry {
    factories: BTreeMap<String, KernelFactory>,
}

impl std::fmt::Debug for KernelRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelRegistry")
            .field("names", &self.names())
            .finish()
    }
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl KernelRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with every built-in kernel.
    ///
    /// | name | kernel |
    /// |---|---|
    /// | `simpl` | simplicial, fixed edge scaling |
    /// | `g-simpl` | simplicial, χ² edge scaling |
    /// | `pc-simpl` | `simpl` with running-covariance preconditioning |
    /// | `pcg-simpl` | `g-simpl` with running-covariance preconditioning |
    /// | `xd-simpl` | extra-dimensional simplicial (`proposals` ≥ `D`) |
    /// | `rwm`, `pc-rwm` | random-walk Metropolis |
    /// | `mtm`, `pc-mtm` | multiple-try Metropolis |
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        for (name, gaussian, covariance) in [
            ("simpl", false, false),
            ("g-simpl", true, false),
            ("pc-simpl", false, true),
            ("pcg-simpl", true, true),
        ] {
            r.register(
                name,
                Box::new(move |spec, dim| simplicial(spec, dim, gaussian, covariance, false)),
            );
        }
        r.register("xd-simpl", Box::new(|spec, dim| simplicial(spec, dim, false, false, true)));
        for (name, covariance) in [("rwm", false), ("pc-rwm", true)] {
            r.register(
                name,
                Box::new(move |spec, dim| {
                    let a = spec.adaptation(dim, default_walk_scale(dim), covariance)?;
                    let k = RwmKernel::new(spec.display_name(), a).with_freeze_fraction(spec.freeze_fraction()?);
                    Ok(Box::new(k) as Box<dyn Kernel>)
                }),
            );
        }
        for (name, covariance) in [("mtm", false), ("pc-mtm", true)] {
            r.register(
                name,
                Box::new(move |spec, dim| {
                    let a = spec.adaptation(dim, default_walk_scale(dim), covariance)?;
                    let tries = spec.n_tries.unwrap_or(dim + 1);
                    let k = MtmKernel::new(spec.display_name(), tries, a)?
                        .with_freeze_fraction(spec.freeze_fraction()?);
                    Ok(Box::new(k) as Box<dyn Kernel>)
                }),
            );
        }
        r
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: impl Into<String>, factory: KernelFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, spec: &KernelSpec, dim: usize) -> Result<Box<dyn Kernel>> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let factory = self.factories.get(&spec.algorithm).ok_or_else(|| {
            Error::invalid(format!(
                "unknown algorithm `{}` (known: {})",
                spec.algorithm,
                self.names().join(", ")
            ))
        })?;
        factory(spec, dim)
    }
}

fn simplicial(
    spec: &KernelSpec,
    dim: usize,
    gaussian: bool,
    covariance: bool,
    extra_dimensional: bool,
) -> Result<Box<dyn Kernel>> {
    let p = spec.proposals.unwrap_or(dim);
    if p == 0 {
        return Err(Error::invalid("simplex dimension must be positive"));
    }
    if extra_dimensional && p < dim {
        return Err(Error::invalid(format!(
            "extra-dimensional sampler needs proposals >= {dim}, got {p}"
        )));
    }
    let a = spec.adaptation(dim, DEFAULT_EDGE_LENGTH, covariance)?;
    let mut cfg = SimplicialConfig::with_simplex_dim(dim, p, a.scale())?;
    if gaussian {
        cfg = cfg.gaussian_scaled();
    }
    let k = SimplicialKernel::new(spec.display_name(), cfg, a).with_freeze_fraction(spec.freeze_fraction()?);
    Ok(Box::new(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_every_builtin() {
        let r = KernelRegistry::builtin();
        assert_eq!(r.names().len(), 9);
        for name in r.names() {
            let spec = KernelSpec::new(name).with_target_acceptance(0.4);
            let k = r.build(&spec, 4).unwrap();
            assert_eq!(k.name(), name);
        }
    }

    #[test]
    fn defaults() {
        let r = KernelRegistry::builtin();
        let k = r.build(&KernelSpec::new("mtm"), 4).unwrap();
        assert_eq!(k.evaluations_per_step(), 9);
        assert!((k.tuning() - 1.19).abs() < 1e-12);
        let k = r.build(&KernelSpec::new("simpl"), 4).unwrap();
        assert_eq!(k.evaluations_per_step(), 4);
        assert_eq!(k.tuning(), DEFAULT_EDGE_LENGTH);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let r = KernelRegistry::builtin();
        assert!(r.build(&KernelSpec::new("hmc"), 2).is_err());
        assert!(r.build(&KernelSpec::new("xd-simpl").with_proposals(1), 2).is_err());
        assert!(r.build(&KernelSpec::new("rwm").with_scale(-1.0), 2).is_err());
        assert!(r.build(&KernelSpec::new("rwm").with_target_acceptance(1.2), 2).is_err());
    }

    #[test]
    fn custom_registration() {
        let mut r = KernelRegistry::empty();
        r.register(
            "plain",
            Box::new(|spec, dim| {
                Ok(Box::new(RwmKernel::new(spec.display_name(), AdaptationState::fixed(1.0 / dim as f64)?))
                    as Box<dyn Kernel>)
            }),
        );
        let k = r.build(&KernelSpec::new("plain").with_label("mine"), 2).unwrap();
        assert_eq!(k.name(), "mine");
    }
}
