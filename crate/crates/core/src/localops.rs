//! Per-cell operators acting on edgewise constants: the weak gradient and the
//! length-weighted least-squares linear extension.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector2, Vector3};

use crate::error::{Result, SwgError};
use crate::mesh::{LocalGeometry, Point2};

/// Largest accepted condition number of MᵀEM.
pub const MAX_CONDITION: f64 = 1e12;

/// Midpoint matrix M (N×3), edge lengths (diagonal of E) and the
/// least-squares operator D = (MᵀEM)⁻¹MᵀE (3×N).
#[derive(Debug, Clone)]
pub struct GeomMatrices {
    pub m: DMatrix<f64>,
    pub lengths: DVector<f64>,
    pub d: DMatrix<f64>,
    pub center: Point2,
}

impl GeomMatrices {
    /// M, E and D with the expansion point at the cell centroid.
    pub fn new(geo: &LocalGeometry) -> Result<Self> {
        let n = geo.num_edges();
        if n < 3 {
            return Err(SwgError::DegenerateGeometry(format!("cell with {n} edges")));
        }
        let c = geo.centroid;
        let m = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => geo.midpoints[i].x - c.x,
            _ => geo.midpoints[i].y - c.y,
        });
        let lengths = DVector::from_column_slice(&geo.lengths);
        // MᵀE, then the 3×3 normal matrix MᵀEM
        let mte = DMatrix::from_fn(3, n, |j, i| m[(i, j)] * lengths[i]);
        let gram: Matrix3<f64> = Matrix3::from_fn(|a, b| (0..n).map(|i| mte[(a, i)] * m[(i, b)]).sum());

        let eig = SymmetricEigen::new(gram).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0) || hi / lo > MAX_CONDITION {
            return Err(SwgError::DegenerateGeometry(format!(
                "MᵀEM is singular or ill-conditioned (eigenvalues {lo:e}..{hi:e})"
            )));
        }
        let chol = gram.cholesky().ok_or_else(|| {
            SwgError::DegenerateGeometry("MᵀEM is not positive definite".into())
        })?;
        let mut d = DMatrix::zeros(3, n);
        for i in 0..n {
            let col = chol.solve(&Vector3::new(mte[(0, i)], mte[(1, i)], mte[(2, i)]));
            d.set_column(i, &col);
        }
        Ok(GeomMatrices { m, lengths, d, center: c })
    }

    pub fn num_edges(&self) -> usize {
        self.lengths.len()
    }

    /// ζ_i evaluated at p: the extension of the indicator of edge i.
    pub fn zeta(&self, i: usize, p: Point2) -> f64 {
        self.d[(0, i)] + self.d[(1, i)] * (p.x - self.center.x) + self.d[(2, i)] * (p.y - self.center.y)
    }

    /// All ζ_i at p.
    pub fn zetas(&self, p: Point2) -> DVector<f64> {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        DVector::from_fn(self.num_edges(), |i, _| {
            self.d[(0, i)] + self.d[(1, i)] * dx + self.d[(2, i)] * dy
        })
    }
}

/// Affine function γ0 + γ1 (x − x_T) + γ2 (y − y_T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionCoeffs {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

impl ExtensionCoeffs {
    pub fn eval(&self, center: Point2, p: Point2) -> f64 {
        eval_extension(self, center, p)
    }

    pub fn gradient(&self) -> Vector2<f64> {
        Vector2::new(self.g1, self.g2)
    }
}

fn check_len(vals: &[f64], n: usize) -> Result<()> {
    if vals.len() != n {
        return Err(SwgError::SizeMismatch {
            expected: n,
            actual: vals.len(),
        });
    }
    Ok(())
}

/// ∇_w v = (1/|T|) Σ v_i |e_i| n_i.
pub fn weak_gradient(vals: &[f64], geo: &LocalGeometry) -> Result<Vector2<f64>> {
    check_len(vals, geo.num_edges())?;
    let sum = vals
        .iter()
        .zip(&geo.lengths)
        .zip(&geo.normals)
        .fold(Vector2::zeros(), |acc, ((v, l), n)| acc + (v * l) * n);
    Ok(sum / geo.area)
}

/// Least-squares linear extension of edge values: (γ0, γ1, γ2) = D v.
pub fn extension(vals: &[f64], gm: &GeomMatrices) -> Result<ExtensionCoeffs> {
    check_len(vals, gm.num_edges())?;
    let mut g = [0.0; 3];
    for (k, gk) in g.iter_mut().enumerate() {
        *gk = vals.iter().enumerate().map(|(i, v)| gm.d[(k, i)] * v).sum();
    }
    Ok(ExtensionCoeffs {
        g0: g[0],
        g1: g[1],
        g2: g[2],
    })
}

pub fn eval_extension(coeffs: &ExtensionCoeffs, center: Point2, p: Point2) -> f64 {
    coeffs.g0 + coeffs.g1 * (p.x - center.x) + coeffs.g2 * (p.y - center.y)
}
