//! Simplex geometry and random rotations.
//!
//! Every multiproposal in this crate is built the same way: a fixed regular
//! simplex with one vertex at the origin is rotated by a Haar-distributed
//! orthogonal matrix, optionally scaled and preconditioned, and translated to
//! the current chain state. Vertex sets are stored column-wise: column `d` of
//! the matrix is vertex `d`, and the last column is always the origin vertex.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Tolerance for the orthogonality check `‖QᵀQ − I‖_max`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Symmetry tolerance, relative to `max(1, ‖C‖_max)`, accepted by [`spd_root`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A square matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    matrix: DMatrix<f64>,
}

impl OrthogonalMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps `matrix` after checking it is square and orthogonal.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid(format!(
                "orthogonal matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let err = orthogonality_error(&matrix);
        if err > ORTHOGONALITY_TOL {
            return Err(Error::invalid(format!(
                "matrix is not orthogonal: max |QᵀQ - I| = {err:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.matrix
    }
}

/// `max_ij |(QᵀQ − I)_ij|` for a matrix with orthonormal columns.
pub fn orthogonality_error(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let n = gram.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Draws the first `cols` columns of a Haar-distributed element of `O_rows`.
///
/// A `rows × cols` matrix of independent standard normals is QR-factored and
/// each column of the orthogonal factor is multiplied by the sign of the
/// matching diagonal entry of the triangular factor. Without the sign
/// correction the result is not Haar-uniform.
///
/// With `cols == rows` this is a full Haar rotation. With `cols < rows` it is
/// an exact draw of the leading columns, which is all that lower-dimensional
/// and projected simplices need.
pub fn sample_haar_frame<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if rows == 0 {
        return Err(Error::InvalidDimension(rows));
    }
    if cols == 0 || cols > rows {
        return Err(Error::invalid(format!(
            "frame needs 1 <= cols <= rows, got {cols} columns for {rows} rows"
        )));
    }
    let gaussian = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        // A zero diagonal has probability zero; treat it as positive.
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Draws `Q` uniformly from the orthogonal group `O_dim` (reflections included).
pub fn sample_haar_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    let matrix = sample_haar_frame(dim, dim, rng)?;
    Ok(OrthogonalMatrix { matrix })
}

/// `D + 1` points in `R^D`, pairwise `edge_length` apart, the last one at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVertexSet {
    edge_length: f64,
    vertices: DMatrix<f64>,
}

impl SimplexVertexSet {
    pub fn dim(&self) -> usize {
        self.vertices.nrows()
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    /// Number of vertices, `dim + 1`.
    pub fn len(&self) -> usize {
        self.vertices.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Vertices as columns.
    pub fn vertices(&self) -> &DMatrix<f64> {
        &self.vertices
    }

    pub fn vertex(&self, index: usize) -> &[f64] {
        column(&self.vertices, index)
    }
}

/// Builds the regular simplex used as the fixed multiproposal template.
///
/// Starts from `{e_1, …, e_D, α·1}` with `α = (1 − √(D+1))/D`, whose points
/// are pairwise `√2` apart, translates by `−α·1` so the last vertex sits at
/// the origin, then rescales to the requested edge length.
pub fn build_base_simplex(dim: usize, edge_length: f64) -> Result<SimplexVertexSet> {
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(edge_length > 0.0 && edge_length.is_finite()) {
        return Err(Error::invalid(format!(
            "edge length must be positive and finite, got {edge_length}"
        )));
    }
    let d = dim as f64;
    let alpha = (1.0 - (d + 1.0).sqrt()) / d;
    let scale = edge_length / std::f64::consts::SQRT_2;
    let vertices = DMatrix::from_fn(dim, dim + 1, |i, j| {
        if j == dim {
            0.0
        } else {
            let unit = if i == j { 1.0 } else { 0.0 };
            scale * (unit - alpha)
        }
    });
    Ok(SimplexVertexSet {
        edge_length,
        vertices,
    })
}

/// A root `L` of a symmetric positive-definite matrix, `L·Lᵀ = C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionRoot {
    root: DMatrix<f64>,
}

impl PreconditionRoot {
    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.root
    }

    /// Reconstructs `C = L·Lᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.root * self.root.transpose()
    }
}

/// Lower-triangular Cholesky root of a symmetric positive-definite matrix.
pub fn spd_root(c: &DMatrix<f64>) -> Result<PreconditionRoot> {
    if !c.is_square() || c.nrows() == 0 {
        return Err(Error::invalid(format!(
            "covariance must be square and non-empty, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let scale = c.amax().max(1.0);
    let n = c.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let root = cholesky_lower(c)?;
    Ok(PreconditionRoot { root })
}

/// Cholesky factor with an explicit failure on non-positive or non-finite pivots.
pub(crate) fn cholesky_lower(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(c.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.unpack();
    if l.diagonal().iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(l)
}

/// Returns `√r` with `r ~ χ²(dim)`.
pub fn chi_square_edge_scale<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<f64> {
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    let chi = ChiSquared::new(dim as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(chi.sample(rng).sqrt())
}

/// Rotates, scales, optionally preconditions and translates the base simplex.
///
/// Column `d` of the result is `root·(scale·Q·v_d) + center` (or
/// `scale·Q·v_d + center` without a root). The last column equals `center`.
pub fn map_simplex(
    base: &SimplexVertexSet,
    q: &OrthogonalMatrix,
    scale: f64,
    root: Option<&PreconditionRoot>,
    center: &[f64],
) -> Result<DMatrix<f64>> {
    if q.dim() != base.dim() {
        return Err(Error::dim_mismatch("rotation", base.dim(), q.dim()));
    }
    project_simplex(base, q.matrix(), scale, root, center)
}

/// Like [`map_simplex`] but with a `D × P` frame in place of the square
/// rotation, mapping a `P`-dimensional simplex into `R^D`.
///
/// With `P > D` the frame is the first `D` rows of a rotation in `O_P`
/// (rotate then project); with `P < D` it is the first `P` columns of a
/// rotation in `O_D` (a lower-dimensional simplex embedded and rotated).
pub fn project_simplex(
    base: &SimplexVertexSet,
    frame: &DMatrix<f64>,
    scale: f64,
    root: Option<&PreconditionRoot>,
    center: &[f64],
) -> Result<DMatrix<f64>> {
    if frame.ncols() != base.dim() {
        return Err(Error::dim_mismatch("frame columns", base.dim(), frame.ncols()));
    }
    let out_dim = frame.nrows();
    if center.len() != out_dim {
        return Err(Error::dim_mismatch("center", out_dim, center.len()));
    }
    if let Some(root) = root {
        if root.dim() != out_dim {
            return Err(Error::dim_mismatch("precondition root", out_dim, root.dim()));
        }
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let mut mapped = frame * base.vertices();
    if scale != 1.0 {
        mapped *= scale;
    }
    if let Some(root) = root {
        mapped = root.matrix() * mapped;
    }
    let last = mapped.ncols() - 1;
    for (j, mut col) in mapped.column_iter_mut().enumerate() {
        if j == last {
            col.copy_from_slice(center);
        } else {
            for (x, c) in col.iter_mut().zip(center) {
                *x += c;
            }
        }
    }
    Ok(mapped)
}

/// The affine reflection through the hyperplane bisecting two points.
///
/// It exchanges the two points and fixes every point equidistant from both.
#[derive(Debug, Clone)]
pub struct BisectingReflection {
    normal: DVector<f64>,
    offset: f64,
}

impl BisectingReflection {
    pub fn exchanging(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::dim_mismatch("reflection endpoint", a.len(), b.len()));
        }
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        let diff = &b - &a;
        let norm = diff.norm();
        if norm == 0.0 {
            return Err(Error::invalid("reflection endpoints coincide"));
        }
        let normal = diff / norm;
        let midpoint = (&a + &b) * 0.5;
        let offset = normal.dot(&midpoint);
        Ok(Self { normal, offset })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        let signed = self.normal.dot(&x) - self.offset;
        (x - &self.normal * (2.0 * signed)).iter().copied().collect()
    }
}

/// Borrow column `j` of a column-major matrix as a slice.
pub fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pairwise_distances(points: &DMatrix<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..points.ncols() {
            for j in (i + 1)..points.ncols() {
                out.push(euclidean(column(points, i), column(points, j)));
            }
        }
        out
    }

    #[test]
    fn haar_dim_one_is_plus_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mut positive = 0usize;
        for _ in 0..n {
            let q = sample_haar_rotation(1, &mut rng).unwrap();
            let v = q.matrix()[(0, 0)];
            assert!(v == 1.0 || v == -1.0, "got {v}");
            if v > 0.0 {
                positive += 1;
            }
        }
        let freq = positive as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "frequency of +1 was {freq}");
    }

    #[test]
    fn haar_dim_four_is_orthogonal() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = sample_haar_rotation(4, &mut rng).unwrap();
            assert!(orthogonality_error(q.matrix()) < 1e-12);
            assert!((q.matrix().determinant().abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn haar_rejects_zero_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_haar_rotation(0, &mut rng),
            Err(Error::InvalidDimension(0))
        ));
    }

    fn sphere_moments(samples: &[[f64; 3]]) -> ([f64; 3], [[f64; 3]; 3]) {
        let n = samples.len() as f64;
        let mut mean = [0.0; 3];
        for s in samples {
            for k in 0..3 {
                mean[k] += s[k] / n;
            }
        }
        let mut cov = [[0.0; 3]; 3];
        for s in samples {
            for a in 0..3 {
                for b in 0..3 {
                    cov[a][b] += (s[a] - mean[a]) * (s[b] - mean[b]) / n;
                }
            }
        }
        (mean, cov)
    }

    #[test]
    fn haar_first_column_matches_uniform_sphere_oracle() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let haar: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let q = sample_haar_rotation(3, &mut rng).unwrap();
                [q.matrix()[(0, 0)], q.matrix()[(1, 0)], q.matrix()[(2, 0)]]
            })
            .collect();
        // Oracle: normalized Gaussian vectors are uniform on the sphere.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let oracle: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let g: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                [g[0] / norm, g[1] / norm, g[2] / norm]
            })
            .collect();
        for (label, samples) in [("haar", &haar), ("oracle", &oracle)] {
            let (mean, cov) = sphere_moments(samples);
            for a in 0..3 {
                assert!(mean[a].abs() < 0.01, "{label} mean[{a}] = {}", mean[a]);
                for b in 0..3 {
                    let expected = if a == b { 1.0 / 3.0 } else { 0.0 };
                    assert!(
                        (cov[a][b] - expected).abs() < 0.02,
                        "{label} cov[{a}][{b}] = {}",
                        cov[a][b]
                    );
                }
            }
        }
    }

    #[test]
    fn haar_frame_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = sample_haar_frame(50, 3, &mut rng).unwrap();
        assert_eq!(frame.shape(), (50, 3));
        assert!(orthogonality_error(&frame) < 1e-12);
        assert!(sample_haar_frame(3, 4, &mut rng).is_err());
    }

    #[test]
    fn simplex_dim_one() {
        let s = build_base_simplex(1, 2.0).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.vertex(0)[0] - 2.0).abs() < 1e-12);
        assert_eq!(s.vertex(1), &[0.0]);
    }

    #[test]
    fn simplex_dim_two_is_equilateral() {
        let s = build_base_simplex(2, 1.0).unwrap();
        for d in pairwise_distances(s.vertices()) {
            assert!((d - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.vertex(2), &[0.0, 0.0]);
    }

    #[test]
    fn simplex_dim_64_all_pairs() {
        let s = build_base_simplex(64, 3.0).unwrap();
        let distances = pairwise_distances(s.vertices());
        assert_eq!(distances.len(), 2080);
        let worst = distances
            .iter()
            .map(|d| (d - 3.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-9, "worst deviation {worst}");
        assert!(s.vertex(64).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn simplex_rejects_bad_arguments() {
        assert!(build_base_simplex(0, 1.0).is_err());
        assert!(build_base_simplex(3, 0.0).is_err());
        assert!(build_base_simplex(3, -1.0).is_err());
        assert!(build_base_simplex(3, f64::NAN).is_err());
    }

    #[test]
    fn map_identity_returns_base() {
        let base = build_base_simplex(4, 1.5).unwrap();
        let q = OrthogonalMatrix::identity(4);
        let mapped = map_simplex(&base, &q, 1.0, None, &[0.0; 4]).unwrap();
        assert_eq!(&mapped, base.vertices());
    }

    #[test]
    fn map_is_isometric_and_keeps_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [1, 2, 5, 17] {
            let base = build_base_simplex(dim, 0.7).unwrap();
            let q = sample_haar_rotation(dim, &mut rng).unwrap();
            let center: Vec<f64> = (0..dim).map(|i| i as f64 - 2.5).collect();
            let mapped = map_simplex(&base, &q, 1.0, None, &center).unwrap();
            let before = pairwise_distances(base.vertices());
            let after = pairwise_distances(&mapped);
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() < 1e-9);
            }
            assert_eq!(column(&mapped, dim), center.as_slice());
        }
    }

    #[test]
    fn map_with_scaled_identity_root() {
        let base = build_base_simplex(3, 1.0).unwrap();
        let root = spd_root(&(DMatrix::identity(3, 3) * 4.0)).unwrap();
        let q = OrthogonalMatrix::identity(3);
        let mapped = map_simplex(&base, &q, 1.0, Some(&root), &[1.0, 2.0, 3.0]).unwrap();
        // Oracle: direct distance computation.
        for d in pairwise_distances(&mapped) {
            assert!((d - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn map_rejects_mismatched_dimensions() {
        let base = build_base_simplex(3, 1.0).unwrap();
        let q = OrthogonalMatrix::identity(2);
        assert!(map_simplex(&base, &q, 1.0, None, &[0.0; 2]).is_err());
        let q = OrthogonalMatrix::identity(3);
        assert!(map_simplex(&base, &q, 1.0, None, &[0.0; 2]).is_err());
        let root = spd_root(&DMatrix::identity(2, 2)).unwrap();
        assert!(map_simplex(&base, &q, 1.0, Some(&root), &[0.0; 3]).is_err());
    }

    #[test]
    fn spd_root_identity_and_diagonal() {
        let root = spd_root(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(root.matrix(), &DMatrix::identity(5, 5));

        let dim = 6;
        let c = DMatrix::from_fn(dim, dim, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let root = spd_root(&c).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let expected = if i == j { ((i + 1) as f64).sqrt() } else { 0.0 };
                assert!((root.matrix()[(i, j)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spd_root_reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2, 7, 20] {
            let a: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let c = &a * a.transpose() + DMatrix::identity(dim, dim);
            let root = spd_root(&c).unwrap();
            let err = (root.covariance() - &c).amax();
            assert!(err < 1e-8 * c.amax(), "reconstruction error {err}");
        }
    }

    #[test]
    fn spd_root_errors() {
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(spd_root(&asym), Err(Error::InvalidArgument(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(spd_root(&indefinite), Err(Error::NotPositiveDefinite)));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_root(&singular), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn chi_square_moments() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r2: Vec<f64> = (0..n)
            .map(|_| chi_square_edge_scale(2, &mut rng).unwrap().powi(2))
            .collect();
        let mean = r2.iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02 * 2.0, "mean {mean}");

        let r10: Vec<f64> = (0..n)
            .map(|_| chi_square_edge_scale(10, &mut rng).unwrap().powi(2))
            .collect();
        let mean = r10.iter().sum::<f64>() / n as f64;
        let var = r10.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 20.0).abs() < 0.05 * 20.0, "variance {var}");
        assert!(chi_square_edge_scale(0, &mut rng).is_err());
    }

    #[test]
    fn reflection_exchanges_endpoints() {
        let r = BisectingReflection::exchanging(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        let a = r.apply(&[0.0, 0.0]);
        let b = r.apply(&[2.0, 0.0]);
        assert!(euclidean(&a, &[2.0, 0.0]) < 1e-15);
        assert!(euclidean(&b, &[0.0, 0.0]) < 1e-15);
        assert!(euclidean(&r.apply(&[1.0, 5.0]), &[1.0, 5.0]) < 1e-15);
    }
}
