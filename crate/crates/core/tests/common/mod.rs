//! Definition-level evaluation of the local bilinear forms, written without
//! the library's closed-form element blocks. Geometry, least squares and
//! quadrature are all redone here.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use swg::element::ProblemSpec;
use swg::mesh::Point2;

pub struct Forms {
    pub stab: f64,
    pub diffusion: f64,
    pub convection: f64,
    pub reaction: f64,
    pub load: f64,
}

struct Edges {
    mid: Vec<Point2>,
    len: Vec<f64>,
    normal: Vec<Vector2<f64>>,
    area: f64,
}

fn edges(p: &[Point2]) -> Edges {
    let n = p.len();
    let mut e = Edges {
        mid: vec![],
        len: vec![],
        normal: vec![],
        area: 0.0,
    };
    for i in 0..n {
        let a = p[i];
        let b = p[(i + 1) % n];
        e.mid.push(Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        let l = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        e.len.push(l);
        e.normal.push(Vector2::new((b.y - a.y) / l, (a.x - b.x) / l));
        e.area += 0.5 * (a.x * b.y - b.x * a.y);
    }
    e
}

/// Gauss–Legendre on [0, 1] by Golub–Welsch.
fn gauss01(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| (0.5 * (eig.eigenvalues[k] + 1.0), eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// ∫ over the polygon as a signed sum of triangles (0, a, b), each by a
/// collapsed tensor Gauss rule.
pub fn integrate(p: &[Point2], g: impl Fn(Point2) -> f64) -> f64 {
    let (x, w) = gauss01(10);
    let o = p[0];
    let n = p.len();
    let mut total = 0.0;
    for i in 1..n - 1 {
        let a = p[i];
        let b = p[i + 1];
        let det = (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
        for (s, ws) in x.iter().zip(&w) {
            for (t, wt) in x.iter().zip(&w) {
                let q = Point2::new(
                    o.x + s * (a.x - o.x) + s * t * (b.x - a.x),
                    o.y + s * (a.y - o.y) + s * t * (b.y - a.y),
                );
                total += ws * wt * s * det * g(q);
            }
        }
    }
    total
}

/// Weighted least-squares line through the midpoint values.
fn extension(e: &Edges, v: &[f64]) -> impl Fn(Point2) -> f64 {
    let n = v.len();
    let c = e.mid[0];
    let mut a = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let s = e.len[i].sqrt();
        a[(i, 0)] = s;
        a[(i, 1)] = s * (e.mid[i].x - c.x);
        a[(i, 2)] = s * (e.mid[i].y - c.y);
        rhs[i] = s * v[i];
    }
    let g = a.svd(true, true).solve(&rhs, 1e-14).unwrap();
    move |p: Point2| g[0] + g[1] * (p.x - c.x) + g[2] * (p.y - c.y)
}

fn weak_gradient(e: &Edges, v: &[f64]) -> Vector2<f64> {
    let mut g = Vector2::zeros();
    for i in 0..v.len() {
        g += e.normal[i] * (v[i] * e.len[i]);
    }
    g / e.area
}

#[allow(clippy::too_many_arguments)]
pub fn forms(
    poly: &[Point2],
    alpha: &dyn Fn(Point2) -> Matrix2<f64>,
    beta: &dyn Fn(Point2) -> Vector2<f64>,
    c: &dyn Fn(Point2) -> f64,
    f: &dyn Fn(Point2) -> f64,
    h: f64,
    x: &[f64],
    y: &[f64],
) -> Forms {
    let e = edges(poly);
    let sx = extension(&e, x);
    let sy = extension(&e, y);
    let gx = weak_gradient(&e, x);
    let gy = weak_gradient(&e, y);
    let stab = (0..x.len())
        .map(|i| (sx(e.mid[i]) - x[i]) * (sy(e.mid[i]) - y[i]) * e.len[i])
        .sum::<f64>()
        / h;
    Forms {
        stab,
        diffusion: integrate(poly, |p| (alpha(p) * gx).dot(&gy)),
        convection: integrate(poly, |p| beta(p).dot(&gx) * sy(p)),
        reaction: integrate(poly, |p| c(p) * sx(p) * sy(p)),
        load: integrate(poly, |p| f(p) * sy(p)),
    }
}

/// Counter-clockwise polygon with jittered angles around `center`.
pub fn star_polygon(center: (f64, f64), scale: f64, aspect: f64, jitter: &[f64], radii: &[f64]) -> Vec<Point2> {
    let n = jitter.len();
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * (k as f64 + 0.6 * jitter[k]) / n as f64;
            Point2::new(
                center.0 + scale * radii[k] * t.cos(),
                center.1 + aspect * scale * radii[k] * t.sin(),
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub poly: Vec<Point2>,
    pub k: [f64; 9],
    pub kappa: f64,
    pub h: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Random cell with 3 to 8 edges over several orders of magnitude in size,
/// random coefficients, κ, h and edge vectors X, Y.
pub fn sample() -> impl Strategy<Value = Sample> {
    (
        3usize..9,
        (-2.0f64..2.0, -2.0f64..2.0),
        0.02f64..3.0,
        0.4f64..1.0,
        proptest::array::uniform9(-1.0f64..1.0),
        0.01f64..50.0,
        0.5f64..4.0,
    )
        .prop_flat_map(|(n, center, scale, aspect, k, kappa, hfac)| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0.8f64..1.2, n),
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
                .prop_map(move |(jitter, radii, x, y)| Sample {
                    poly: star_polygon(center, scale, aspect, &jitter, &radii),
                    k,
                    kappa,
                    h: hfac * scale,
                    x,
                    y,
                })
        })
}

/// Linear α (symmetric positive definite near the cell), linear β, linear c
/// and a cubic load, so a degree-5 cell rule is exact.
pub fn problem(k: [f64; 9], center: Point2) -> ProblemSpec {
    let c0 = center;
    ProblemSpec {
        alpha: Arc::new(move |p| {
            let dx = p.x - c0.x;
            let dy = p.y - c0.y;
            Matrix2::new(2.0 + 0.1 * k[0] * dx, 0.3 * k[1], 0.3 * k[1], 1.5 + 0.1 * k[2] * dy)
        }),
        beta: Arc::new(move |p| Vector2::new(k[3] + k[4] * p.y, k[5] - k[4] * p.x)),
        c: Arc::new(move |p| 1.0 + 0.2 * k[6] * (p.x - c0.x)),
        f: Arc::new(move |p| k[7] * p.x * p.x * p.y + k[8] * p.y - 0.5),
        g: Arc::new(|_| 0.0),
        exact: None,
        grad_exact: None,
    }
}
