//! Manufactured-solution test problems. Each load f = −∇·(α∇u) + β·∇u + cu
//! is differentiated by hand; `tests::loads_match_finite_differences` guards
//! the derivations.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::element::ProblemSpec;
use crate::error::{Result, SwgError};

/// Registry entries: 1–4 are the reference problems, 0 is the affine patch test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaseId(pub u8);

impl CaseId {
    pub const PATCH: CaseId = CaseId(0);
    pub const ALL: [CaseId; 4] = [CaseId(1), CaseId(2), CaseId(3), CaseId(4)];
}

pub struct TestCase {
    pub id: CaseId,
    pub description: &'static str,
    pub problem: ProblemSpec,
    /// Smallest eigenvalue of α on the closed unit square; zero for case 4,
    /// whose α₂₂ = 3xy vanishes on the edges x = 0 and y = 0.
    pub alpha_lower_bound: f64,
    /// Whether c − ½∇·β ≥ 0 holds on the unit square.
    pub reaction_condition: bool,
}

impl std::fmt::Debug for TestCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestCase")
            .field("id", &self.id)
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

pub fn test_case(id: CaseId) -> Result<TestCase> {
    let tc = match id.0 {
        0 => TestCase {
            id,
            description: "u = x + 2y, α = I, β = (1,1), c = 1",
            problem: ProblemSpec::constant(
                Matrix2::identity(),
                Vector2::new(1.0, 1.0),
                1.0,
                Arc::new(|p| 3.0 + p.x + 2.0 * p.y),
                Arc::new(|p| p.x + 2.0 * p.y),
            )
            .with_exact(Arc::new(|p| p.x + 2.0 * p.y), Arc::new(|_| Vector2::new(1.0, 2.0))),
            alpha_lower_bound: 1.0,
            reaction_condition: true,
        },
        1 => {
            let u = |x: f64, y: f64| x * y;
            TestCase {
                id,
                description: "u = xy, α = I, β = (1,1), c = 1",
                problem: ProblemSpec::constant(
                    Matrix2::identity(),
                    Vector2::new(1.0, 1.0),
                    1.0,
                    Arc::new(|p| p.y + p.x + p.x * p.y),
                    Arc::new(move |p| u(p.x, p.y)),
                )
                .with_exact(Arc::new(move |p| u(p.x, p.y)), Arc::new(|p| Vector2::new(p.y, p.x))),
                alpha_lower_bound: 1.0,
                reaction_condition: true,
            }
        }
        2 => {
            let u = |x: f64, y: f64| 3.0 * x * x + 2.0 * x * y;
            TestCase {
                id,
                description: "u = 3x² + 2xy, α = diag(2,1), β = (1,1), c = 1",
                problem: ProblemSpec::constant(
                    Matrix2::new(2.0, 0.0, 0.0, 1.0),
                    Vector2::new(1.0, 1.0),
                    1.0,
                    Arc::new(move |p| -12.0 + 8.0 * p.x + 2.0 * p.y + u(p.x, p.y)),
                    Arc::new(move |p| u(p.x, p.y)),
                )
                .with_exact(
                    Arc::new(move |p| u(p.x, p.y)),
                    Arc::new(|p| Vector2::new(6.0 * p.x + 2.0 * p.y, 2.0 * p.x)),
                ),
                alpha_lower_bound: 1.0,
                reaction_condition: true,
            }
        }
        3 => {
            let u = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin() + x * x - y * y;
            let grad = |x: f64, y: f64| {
                Vector2::new(
                    PI * (PI * x).cos() * (PI * y).sin() + 2.0 * x,
                    PI * (PI * x).sin() * (PI * y).cos() - 2.0 * y,
                )
            };
            TestCase {
                id,
                description: "u = sin(πx)sin(πy) + x² − y², α = I, β = (1,2), c = 1",
                problem: ProblemSpec::constant(
                    Matrix2::identity(),
                    Vector2::new(1.0, 2.0),
                    1.0,
                    Arc::new(move |p| {
                        let ss = (PI * p.x).sin() * (PI * p.y).sin();
                        let g = grad(p.x, p.y);
                        2.0 * PI * PI * ss + g.x + 2.0 * g.y + u(p.x, p.y)
                    }),
                    Arc::new(move |p| u(p.x, p.y)),
                )
                .with_exact(Arc::new(move |p| u(p.x, p.y)), Arc::new(move |p| grad(p.x, p.y))),
                alpha_lower_bound: 1.0,
                reaction_condition: true,
            }
        }
        4 => {
            let u = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
            let grad = |x: f64, y: f64| {
                Vector2::new(
                    PI * (PI * x).cos() * (PI * y).sin(),
                    PI * (PI * x).sin() * (PI * y).cos(),
                )
            };
            let beta = |x: f64, y: f64| Vector2::new(x * x * x * y + x * y + 1.0, 3.0 * x * x * y + x * y + 2.0);
            let c = |x: f64, y: f64| x.powi(4) * y * y + x * y + 1.0;
            TestCase {
                id,
                description: "u = sin(πx)sin(πy), α = diag(xy+1, 3xy), variable β and c",
                problem: ProblemSpec {
                    alpha: Arc::new(|p| Matrix2::new(p.x * p.y + 1.0, 0.0, 0.0, 3.0 * p.x * p.y)),
                    beta: Arc::new(move |p| beta(p.x, p.y)),
                    c: Arc::new(move |p| c(p.x, p.y)),
                    f: Arc::new(move |p| {
                        let (x, y) = (p.x, p.y);
                        let g = grad(x, y);
                        let uxx = -PI * PI * u(x, y);
                        // ∇·(α∇u) = y u_x + (xy+1) u_xx + 3x u_y + 3xy u_yy
                        let div = y * g.x + (x * y + 1.0) * uxx + 3.0 * x * g.y + 3.0 * x * y * uxx;
                        -div + beta(x, y).dot(&g) + c(x, y) * u(x, y)
                    }),
                    g: Arc::new(move |p| u(p.x, p.y)),
                    exact: Some(Arc::new(move |p| u(p.x, p.y))),
                    grad_exact: Some(Arc::new(move |p| grad(p.x, p.y))),
                },
                alpha_lower_bound: 0.0,
                // c − ½∇·β = x⁴y² + xy + 1 − ½(3x²y + y + 3x² + x) < 0 near (1,1)
                reaction_condition: false,
            }
        }
        other => return Err(SwgError::InvalidArgument(format!("unknown test case {other}"))),
    };
    Ok(tc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point2;

    /// −∇·(α∇u) + β·∇u + cu by central differences of u and of the flux α∇u.
    fn fd_operator(p: &ProblemSpec, x: f64, y: f64) -> f64 {
        let u = p.exact.as_ref().unwrap();
        let h = 1e-4;
        let uat = |x: f64, y: f64| u(Point2::new(x, y));
        let grad = |x: f64, y: f64| {
            Vector2::new(
                (uat(x + h, y) - uat(x - h, y)) / (2.0 * h),
                (uat(x, y + h) - uat(x, y - h)) / (2.0 * h),
            )
        };
        let flux = |x: f64, y: f64| (p.alpha)(Point2::new(x, y)) * grad(x, y);
        let div = (flux(x + h, y).x - flux(x - h, y).x) / (2.0 * h) + (flux(x, y + h).y - flux(x, y - h).y) / (2.0 * h);
        let q = Point2::new(x, y);
        -div + (p.beta)(q).dot(&grad(x, y)) + (p.c)(q) * uat(x, y)
    }

    #[test]
    fn loads_match_finite_differences() {
        for id in [CaseId::PATCH, CaseId(1), CaseId(2), CaseId(3), CaseId(4)] {
            let tc = test_case(id).unwrap();
            let p = &tc.problem;
            let u = p.exact.as_ref().unwrap();
            let gu = p.grad_exact.as_ref().unwrap();
            for k in 0..100u32 {
                // low-discrepancy interior sample
                let x = 0.05 + 0.9 * ((k as f64 * 0.618_033_988_75) % 1.0);
                let y = 0.05 + 0.9 * ((k as f64 * 0.754_877_666_25) % 1.0);
                let q = Point2::new(x, y);
                let want = fd_operator(p, x, y);
                let got = (p.f)(q);
                assert!((got - want).abs() <= 1e-6 * (1.0 + want.abs()), "case {id:?} at ({x},{y}): {got} vs {want}");
                assert_eq!((p.g)(q), u(q));
                let h = 1e-6;
                let fd = Vector2::new(
                    (u(Point2::new(x + h, y)) - u(Point2::new(x - h, y))) / (2.0 * h),
                    (u(Point2::new(x, y + h)) - u(Point2::new(x, y - h))) / (2.0 * h),
                );
                assert!((fd - gu(q)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn unknown_case() {
        assert!(test_case(CaseId(9)).is_err());
    }

    #[test]
    fn case_four_violates_the_ellipticity_bound() {
        let tc = test_case(CaseId(4)).unwrap();
        let corners = [Point2::new(0.0, 0.5), Point2::new(0.5, 0.0), Point2::new(0.5, 0.5)];
        let lo = tc.problem.min_alpha_eigenvalue(corners).unwrap();
        assert_eq!(lo, 0.0);
        assert_eq!(tc.alpha_lower_bound, 0.0);
    }
}
