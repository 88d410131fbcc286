//! Quadrature on polygons (fan triangulation from the centroid) and on edges.

use crate::error::{Result, SwgError};
use crate::mesh::{LocalGeometry, Point2};

/// Quadrature settings shared by assembly and post-processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Polynomial exactness on each fan triangle.
    pub cell_degree: usize,
    /// Gauss–Legendre points per edge.
    pub edge_points: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            cell_degree: 5,
            edge_points: 3,
        }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A rule on a triangle in barycentric coordinates; weights sum to one.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub bary: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Smallest tabulated rule with at least the requested exactness. Above
    /// degree 5 a collapsed Gauss product rule is used.
    pub fn with_degree(degree: usize) -> Result<Self> {
        match degree {
            0 => Err(SwgError::Quadrature("degree must be >= 1".into())),
            1 => Ok(TriangleRule {
                degree: 1,
                bary: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
            }),
            2 => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                Ok(TriangleRule {
                    degree: 2,
                    bary: vec![[a, b, b], [b, a, b], [b, b, a]],
                    weights: vec![1.0 / 3.0; 3],
                })
            }
            3..=5 => {
                let r15 = 15f64.sqrt();
                let a1 = (6.0 - r15) / 21.0;
                let a2 = (6.0 + r15) / 21.0;
                let w1 = (155.0 - r15) / 1200.0;
                let w2 = (155.0 + r15) / 1200.0;
                let (b1, b2) = (1.0 - 2.0 * a1, 1.0 - 2.0 * a2);
                Ok(TriangleRule {
                    degree: 5,
                    bary: vec![
                        [1.0 / 3.0; 3],
                        [a1, a1, b1],
                        [a1, b1, a1],
                        [b1, a1, a1],
                        [a2, a2, b2],
                        [a2, b2, a2],
                        [b2, a2, a2],
                    ],
                    weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
                })
            }
            d => Ok(Self::collapsed(d)),
        }
    }

    /// Conical product rule: exact to `degree` via the map
    /// (u, v) ↦ (u, (1 − u) v) of the unit square onto the triangle.
    pub fn collapsed(degree: usize) -> Self {
        let q = (degree + 3) / 2;
        let (x, w) = gauss_legendre(q);
        let mut bary = Vec::with_capacity(q * q);
        let mut weights = Vec::with_capacity(q * q);
        for i in 0..q {
            let u = 0.5 * (x[i] + 1.0);
            for j in 0..q {
                let v = 0.5 * (x[j] + 1.0);
                let xi = u;
                let eta = (1.0 - u) * v;
                bary.push([1.0 - xi - eta, xi, eta]);
                // reference area 1/2, so normalized weight = 2 * (w_i/2)(w_j/2)(1 − u)
                weights.push(0.5 * w[i] * w[j] * (1.0 - u));
            }
        }
        TriangleRule {
            degree,
            bary,
            weights,
        }
    }
}

/// Points and weights covering one polygonal cell.
#[derive(Debug, Clone)]
pub struct CellQuadRule {
    pub degree: usize,
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl CellQuadRule {
    /// Fan-triangulates the cell from its centroid and maps `rule` onto each
    /// triangle.
    pub fn from_rule(geo: &LocalGeometry, rule: &TriangleRule) -> Result<Self> {
        let n = geo.vertices.len();
        let c = geo.centroid;
        let mut points = Vec::with_capacity(n * rule.weights.len());
        let mut weights = Vec::with_capacity(n * rule.weights.len());
        for i in 0..n {
            let p = geo.vertices[i];
            let q = geo.vertices[(i + 1) % n];
            let area = 0.5 * (p - c).perp(&(q - c));
            if !(area > 0.0) {
                return Err(SwgError::Quadrature(format!(
                    "fan triangle {i} has non-positive area {area:e}"
                )));
            }
            for (b, w) in rule.bary.iter().zip(&rule.weights) {
                points.push(Point2::from(b[0] * c.coords + b[1] * p.coords + b[2] * q.coords));
                weights.push(w * area);
            }
        }
        Ok(CellQuadRule {
            degree: rule.degree,
            points,
            weights,
        })
    }

    pub fn new(geo: &LocalGeometry, degree: usize) -> Result<Self> {
        Self::from_rule(geo, &TriangleRule::with_degree(degree)?)
    }

    pub fn integrate(&self, mut f: impl FnMut(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Integral of `f` over a polygonal cell.
pub fn cell_integrate(geo: &LocalGeometry, f: impl FnMut(Point2) -> f64, degree: usize) -> Result<f64> {
    Ok(CellQuadRule::new(geo, degree)?.integrate(f))
}

/// Gauss–Legendre rule mapped to a segment; weights include the length.
#[derive(Debug, Clone)]
pub struct EdgeQuadRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl EdgeQuadRule {
    pub fn new(a: Point2, b: Point2, npts: usize) -> Result<Self> {
        if npts == 0 {
            return Err(SwgError::Quadrature("edge rule needs at least one point".into()));
        }
        let len = (b - a).norm();
        if !(len > 0.0) {
            return Err(SwgError::Quadrature("zero-length edge".into()));
        }
        let (x, w) = gauss_legendre(npts);
        let mid = nalgebra::center(&a, &b);
        let half = 0.5 * (b - a);
        Ok(EdgeQuadRule {
            points: x.iter().map(|t| mid + *t * half).collect(),
            weights: w.iter().map(|w| 0.5 * len * w).collect(),
        })
    }

    pub fn integrate(&self, mut f: impl FnMut(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Integral of `f` along the segment a–b (length factor included).
pub fn edge_integrate(a: Point2, b: Point2, f: impl FnMut(Point2) -> f64, npts: usize) -> Result<f64> {
    Ok(EdgeQuadRule::new(a, b, npts)?.integrate(f))
}
