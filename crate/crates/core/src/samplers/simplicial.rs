use nalgebra::DMatrix;

use super::{select_index, AdaptationState, ChainState, Kernel, Transition};
use crate::error::{Error, Result};
use crate::geometry::{
    build_base_simplex, chi_square_edge_scale, column, project_simplex, sample_haar_frame,
    PreconditionRoot, SimplexVertexSet,
};
use crate::targets::Target;
use crate::ChainRng;

/// How the edge length is scaled on each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeScaling {
    /// Every edge has length `λ`.
    Fixed,
    /// Edges are scaled by `√r`, `r ~ χ²`, giving Gaussian proposal marginals
    /// with covariance `λ²·I`.
    ChiSquare,
}

/// Configuration of a simplicial multiproposal.
///
/// `simplex_dim` is the dimension `P` of the rotated simplex, which yields
/// `P` new proposals. `P = D` is the standard sampler. `P < D` rotates a
/// lower-dimensional simplex inside `R^D`. `P > D` is the extra-dimensional
/// sampler: the simplex is rotated in `R^P` around `(θ, 0)` and every vertex
/// is projected onto the first `D` coordinates.
#[derive(Debug, Clone)]
pub struct SimplicialConfig {
    target_dim: usize,
    edge_length: f64,
    scaling: EdgeScaling,
    precondition: Option<PreconditionRoot>,
    // Unit-edge template, rescaled by the edge length on every step.
    base: SimplexVertexSet,
}

impl SimplicialConfig {
    pub fn new(target_dim: usize, edge_length: f64) -> Result<Self> {
        Self::with_simplex_dim(target_dim, target_dim, edge_length)
    }

    pub fn with_simplex_dim(target_dim: usize, simplex_dim: usize, edge_length: f64) -> Result<Self> {
        if target_dim == 0 {
            return Err(Error::InvalidDimension(target_dim));
        }
        if !(edge_length > 0.0 && edge_length.is_finite()) {
            return Err(Error::invalid(format!("edge length must be positive, got {edge_length}")));
        }
        Ok(Self {
            target_dim,
            edge_length,
            scaling: EdgeScaling::Fixed,
            precondition: None,
            base: build_base_simplex(simplex_dim, 1.0)?,
        })
    }

    pub fn gaussian_scaled(mut self) -> Self {
        self.scaling = EdgeScaling::ChiSquare;
        self
    }

    pub fn preconditioned(mut self, root: PreconditionRoot) -> Result<Self> {
        if root.dim() != self.target_dim {
            return Err(Error::dim_mismatch("precondition root", self.target_dim, root.dim()));
        }
        self.precondition = Some(root);
        Ok(self)
    }

    pub fn set_edge_length(&mut self, edge_length: f64) -> Result<()> {
        if !(edge_length > 0.0 && edge_length.is_finite()) {
            return Err(Error::invalid(format!("edge length must be positive, got {edge_length}")));
        }
        self.edge_length = edge_length;
        Ok(())
    }

    pub fn set_precondition(&mut self, root: Option<PreconditionRoot>) {
        self.precondition = root;
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn simplex_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn scaling(&self) -> EdgeScaling {
        self.scaling
    }

    pub fn precondition(&self) -> Option<&PreconditionRoot> {
        self.precondition.as_ref()
    }

    pub fn is_extra_dimensional(&self) -> bool {
        self.simplex_dim() > self.target_dim
    }

    /// Number of new proposals per step.
    pub fn proposals(&self) -> usize {
        self.simplex_dim()
    }

    pub fn base(&self) -> &SimplexVertexSet {
        &self.base
    }
}

/// Draws one proposal set around `center`: a `D × (P+1)` matrix whose last
/// column is `center` itself.
pub fn propose_simplex(center: &[f64], cfg: &SimplicialConfig, rng: &mut ChainRng) -> Result<DMatrix<f64>> {
    let d = cfg.target_dim;
    let p = cfg.simplex_dim();
    if center.len() != d {
        return Err(Error::dim_mismatch("chain state", d, center.len()));
    }
    let frame = if p > d {
        // The first D rows of a Haar element of O_P are distributed as the
        // transpose of the first D columns of one.
        sample_haar_frame(p, d, rng)?.transpose()
    } else {
        sample_haar_frame(d, p, rng)?
    };
    let mut scale = cfg.edge_length;
    if cfg.scaling == EdgeScaling::ChiSquare {
        scale *= chi_square_edge_scale(p.max(d), rng)?;
    }
    project_simplex(&cfg.base, &frame, scale, cfg.precondition.as_ref(), center)
}

/// The unrotated simplex at `center`, projected onto the target coordinates:
/// `W·(λ·v_p) + center`. In the extra-dimensional case the `P − D` vertices
/// beyond the target dimension all land on the same point.
pub fn unrotated_projection(center: &[f64], cfg: &SimplicialConfig) -> Result<DMatrix<f64>> {
    let d = cfg.target_dim;
    let p = cfg.simplex_dim();
    let selector = DMatrix::from_fn(d, p, |i, j| if i == j { 1.0 } else { 0.0 });
    project_simplex(&cfg.base, &selector, cfg.edge_length, cfg.precondition.as_ref(), center)
}

/// One simplicial transition: rotate the simplex about the current state,
/// evaluate the target at the new vertices and select one of all `P + 1`
/// vertices in proportion to its density.
pub fn simplicial_step(
    state: &ChainState,
    target: &dyn Target,
    cfg: &SimplicialConfig,
    rng: &mut ChainRng,
) -> Result<Transition> {
    if target.dim() != cfg.target_dim {
        return Err(Error::dim_mismatch("target", cfg.target_dim, target.dim()));
    }
    let vertices = propose_simplex(state.position(), cfg, rng)?;
    let current = vertices.ncols() - 1;
    let mut log_densities = Vec::with_capacity(vertices.ncols());
    for j in 0..current {
        log_densities.push(target.log_density(column(&vertices, j))?);
    }
    // The origin vertex is the current state; reuse its cached density.
    log_densities.push(state.log_density());

    let selected = select_index(&log_densities, rng)?;
    if selected == current {
        return Ok(Transition {
            state: state.stay(),
            selected,
            accepted: false,
        });
    }
    Ok(Transition {
        state: state.advance(column(&vertices, selected).to_vec(), log_densities[selected]),
        selected,
        accepted: true,
    })
}

/// Extra-dimensional transition; `cfg` must use a simplex of dimension at
/// least the target dimension.
pub fn extra_dimensional_step(
    state: &ChainState,
    target: &dyn Target,
    cfg: &SimplicialConfig,
    rng: &mut ChainRng,
) -> Result<Transition> {
    if cfg.simplex_dim() < cfg.target_dim {
        return Err(Error::invalid(format!(
            "extra-dimensional sampler needs P >= D, got P = {} and D = {}",
            cfg.simplex_dim(),
            cfg.target_dim
        )));
    }
    simplicial_step(state, target, cfg, rng)
}

/// Simplicial kernel with optional edge-length and covariance adaptation.
#[derive(Debug, Clone)]
pub struct SimplicialKernel {
    name: String,
    config: SimplicialConfig,
    adaptation: AdaptationState,
    freeze_fraction: f64,
}

impl SimplicialKernel {
    pub fn new(name: impl Into<String>, config: SimplicialConfig, adaptation: AdaptationState) -> Self {
        Self {
            name: name.into(),
            config,
            adaptation,
            freeze_fraction: 0.5,
        }
    }

    /// Fraction of the run after which covariance adaptation stops.
    pub fn with_freeze_fraction(mut self, fraction: f64) -> Self {
        self.freeze_fraction = fraction;
        self
    }

    pub fn config(&self) -> &SimplicialConfig {
        &self.config
    }

    pub fn adaptation(&self) -> &AdaptationState {
        &self.adaptation
    }
}

impl Kernel for SimplicialKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn prepare(&mut self, dim: usize, n_iterations: usize) -> Result<()> {
        if dim != self.config.target_dim {
            return Err(Error::dim_mismatch("target", self.config.target_dim, dim));
        }
        let freeze = (n_iterations as f64 * self.freeze_fraction).ceil() as u64;
        self.adaptation.freeze_covariance_after(freeze);
        Ok(())
    }

    fn step(&mut self, state: &ChainState, target: &dyn Target, rng: &mut ChainRng) -> Result<Transition> {
        self.config.set_edge_length(self.adaptation.scale())?;
        if let Some(root) = self.adaptation.root() {
            self.config.set_precondition(Some(root.clone()));
        }
        let transition = simplicial_step(state, target, &self.config, rng)?;
        self.adaptation.adapt_edge_length(transition.accepted);
        self.adaptation.adapt_covariance(transition.state.position())?;
        Ok(transition)
    }

    fn tuning(&self) -> f64 {
        self.adaptation.scale()
    }

    fn evaluations_per_step(&self) -> usize {
        self.config.proposals()
    }
}
