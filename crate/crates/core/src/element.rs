//! Element stiffness blocks and load vector in closed form.
//!
//! For a cell with N edges and edge-indicator basis, row i of every block is
//! the test function on edge i and column j the trial function on edge j:
//!
//! * `A = E − E M D` (stabilizer, scaled later by κ/h)
//! * `b_ij = |e_i||e_j|/|T|² ∫_T n_iᵀ α n_j`
//! * `r_ij = |e_j|/|T| ∫_T (β·n_j) ζ_i`
//! * `c_ij = ∫_T c ζ_i ζ_j`
//! * `f_i  = ∫_T f ζ_i`
//!
//! where ζ_i is the linear extension of the indicator of edge i.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Result, SwgError};
use crate::localops::GeomMatrices;
use crate::mesh::{LocalGeometry, Point2};
use crate::quadrature::CellQuadRule;

pub type ScalarFn = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point2) -> Vector2<f64> + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point2) -> Matrix2<f64> + Send + Sync>;

/// Coefficients and data of −∇·(α∇u) + β·∇u + cu = f, u = g on the boundary.
#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: TensorFn,
    pub beta: VectorFn,
    pub c: ScalarFn,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub exact: Option<ScalarFn>,
    pub grad_exact: Option<VectorFn>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("exact", &self.exact.is_some())
            .field("grad_exact", &self.grad_exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Constant coefficients with the given load and boundary data.
    pub fn constant(alpha: Matrix2<f64>, beta: Vector2<f64>, c: f64, f: ScalarFn, g: ScalarFn) -> Self {
        ProblemSpec {
            alpha: Arc::new(move |_| alpha),
            beta: Arc::new(move |_| beta),
            c: Arc::new(move |_| c),
            f,
            g,
            exact: None,
            grad_exact: None,
        }
    }

    pub fn with_exact(mut self, u: ScalarFn, grad: VectorFn) -> Self {
        self.exact = Some(u);
        self.grad_exact = Some(grad);
        self
    }

    /// Samples α on `points` and returns the smallest eigenvalue seen, or
    /// `None` if some sample is not symmetric.
    pub fn min_alpha_eigenvalue(&self, points: impl IntoIterator<Item = Point2>) -> Option<f64> {
        let mut lo = f64::INFINITY;
        for p in points {
            let a = (self.alpha)(p);
            if (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 * a.amax().max(1.0) {
                return None;
            }
            lo = lo.min(a.symmetric_eigenvalues().min());
        }
        Some(lo)
    }
}

/// The closed-form blocks of one element.
#[derive(Debug, Clone)]
pub struct ElementBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub f: DVector<f64>,
}

/// A = E − EM(MᵀEM)⁻¹MᵀE = E (I − M D).
pub fn stab_a(gm: &GeomMatrices) -> DMatrix<f64> {
    let n = gm.num_edges();
    let md = &gm.m * &gm.d;
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        gm.lengths[i] * (delta - md[(i, j)])
    })
}

pub fn diff_b(geo: &LocalGeometry, alpha: &TensorFn, rule: &CellQuadRule) -> DMatrix<f64> {
    let mut int_alpha = Matrix2::zeros();
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        int_alpha += *w * alpha(*p);
    }
    let n = geo.num_edges();
    let scale = 1.0 / (geo.area * geo.area);
    DMatrix::from_fn(n, n, |i, j| {
        geo.normals[i].dot(&(int_alpha * geo.normals[j])) * geo.lengths[i] * geo.lengths[j] * scale
    })
}

pub fn conv_r(geo: &LocalGeometry, gm: &GeomMatrices, beta: &VectorFn, rule: &CellQuadRule) -> DMatrix<f64> {
    let n = geo.num_edges();
    let mut r = DMatrix::zeros(n, n);
    let mut flux = DVector::zeros(n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let b = beta(*p);
        for j in 0..n {
            flux[j] = b.dot(&geo.normals[j]) * geo.lengths[j];
        }
        let z = gm.zetas(*p);
        r.ger(*w / geo.area, &z, &flux, 1.0);
    }
    r
}

pub fn reac_c(gm: &GeomMatrices, c: &ScalarFn, rule: &CellQuadRule) -> DMatrix<f64> {
    let n = gm.num_edges();
    let mut m = DMatrix::zeros(n, n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let cv = c(*p);
        if cv == 0.0 {
            continue;
        }
        let z = gm.zetas(*p);
        m.ger(*w * cv, &z, &z, 1.0);
    }
    m
}

pub fn load_f(gm: &GeomMatrices, f: &ScalarFn, rule: &CellQuadRule) -> DVector<f64> {
    let mut out = DVector::zeros(gm.num_edges());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        out.axpy(*w * f(*p), &gm.zetas(*p), 1.0);
    }
    out
}

impl ElementBlocks {
    pub fn compute(geo: &LocalGeometry, gm: &GeomMatrices, problem: &ProblemSpec, rule: &CellQuadRule) -> Self {
        ElementBlocks {
            a: stab_a(gm),
            b: diff_b(geo, &problem.alpha, rule),
            r: conv_r(geo, gm, &problem.beta, rule),
            c: reac_c(gm, &problem.c, rule),
            f: load_f(gm, &problem.f, rule),
        }
    }
}

/// Element matrix κh⁻¹Aᵀ + B + R + C and load F.
pub fn element_system(blocks: &ElementBlocks, kappa: f64, h: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if !(kappa > 0.0) {
        return Err(SwgError::InvalidArgument(format!(
            "stabilization parameter must be positive, got {kappa}"
        )));
    }
    if !(h > 0.0) {
        return Err(SwgError::InvalidArgument(format!("mesh size must be positive, got {h}")));
    }
    let at = blocks.a.transpose();
    let asym = (&at - &blocks.a).amax();
    // A vanishes on triangles, so measure against the edge-length scale h too
    if asym > 1e-12 * blocks.a.amax().max(h) {
        return Err(SwgError::DegenerateGeometry(format!(
            "stabilizer matrix is not symmetric ({asym:e})"
        )));
    }
    let k = at * (kappa / h) + &blocks.b + &blocks.r + &blocks.c;
    Ok((k, blocks.f.clone()))
}
