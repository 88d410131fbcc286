//! Acceptance report. Prints one PASS/FAIL line per criterion with the
//! sub-checks indented below it. Exits non-zero on infrastructure errors, and
//! on failed criteria only when SWG_ACCEPTANCE_STRICT=1.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector2};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRng, TestRunner};

use common::{problem, sample, Sample};
use swg::cases::{test_case, CaseId};
use swg::element::{element_system, stab_a, ElementBlocks};
use swg::harness::{run_convergence, solve_level, ConvergenceTable, ReferenceTable, RunConfig, TableKey};
use swg::localops::{extension, weak_gradient, GeomMatrices};
use swg::mesh::{generate_mesh, Domain, Family, LocalGeometry, Point2};
use swg::quadrature::{CellQuadRule, EdgeQuadRule};
use swg::system::{assemble, AssemblyOptions};

const SQUARE_NS: [usize; 5] = [8, 16, 32, 64, 128];
const KAPPAS: [f64; 5] = [0.1, 1.0, 4.0, 6.0, 20.0];
const RANDOM_CELLS: u32 = 100;

struct Check {
    ok: bool,
    text: String,
}

struct Criterion {
    name: String,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(name: impl Into<String>) -> Self {
        Criterion {
            name: name.into(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn check(&mut self, ok: bool, text: impl Into<String>) {
        self.checks.push(Check { ok, text: text.into() });
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    fn print(&self) {
        println!("{} {}", tag(self.passed()), self.name);
        for c in &self.checks {
            println!("       {} {}", tag(c.ok), c.text);
        }
        for n in &self.notes {
            println!("       note: {n}");
        }
    }
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "[PASS]"
    } else {
        "[FAIL]"
    }
}

fn study(case: u8, family: Family, domain: Domain, kappa: f64, ns: &[usize]) -> swg::Result<ConvergenceTable> {
    run_convergence(&RunConfig::new(case, family, domain, ns, kappa))
}

fn key(table: u8, case: u8, family: Family, domain: Domain, kappa: f64) -> TableKey {
    TableKey {
        table,
        case: CaseId(case),
        family,
        domain,
        kappa,
    }
}

fn fmt_rates(r: &[Option<f64>]) -> String {
    r.iter().flatten().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

/// Relative deviation of each observed error from the reference for the
/// listed mesh sizes.
fn value_check(
    c: &mut Criterion,
    t: &ConvergenceTable,
    refs: &ReferenceTable,
    k: &TableKey,
    ns: &[usize],
    quantities: &[&str],
    rel: f64,
) -> swg::Result<()> {
    for &q in quantities {
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for row in t.rows.iter().filter(|r| ns.contains(&r.n)) {
            let e = refs
                .get(k, row.n)
                .ok_or_else(|| swg::SwgError::MissingReference(format!("{k} n={}", row.n)))?;
            let (obs, want) = match q {
                "L2" => (row.err_discrete_l2, e.err_l2),
                _ => (row.err_discrete_h1, e.err_h1),
            };
            let dev = (obs - want).abs() / want;
            worst = worst.max(dev);
            parts.push(format!("n={} {obs:.3e}/{want:.2e}", row.n));
        }
        c.check(
            worst <= rel,
            format!("{q} values within {:.0}%: worst {:.1}% ({})", rel * 100.0, worst * 100.0, parts.join(", ")),
        );
    }
    Ok(())
}

/// Absolute deviation of observed rates from the reference rates at the
/// listed mesh sizes.
fn rate_check(
    c: &mut Criterion,
    label: &str,
    t: &ConvergenceTable,
    observed: &[Option<f64>],
    expected: impl Fn(usize) -> Option<f64>,
    ns: &[usize],
    tol: f64,
) {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (row, r) in t.rows.iter().zip(observed) {
        if !ns.contains(&row.n) {
            continue;
        }
        if let (Some(r), Some(x)) = (r, expected(row.n)) {
            worst = worst.max((r - x).abs());
            parts.push(format!("n={} {r:.2}/{x:.2}", row.n));
        }
    }
    c.check(
        !parts.is_empty() && worst <= tol,
        format!("{label} rates within ±{tol}: worst {worst:.3} ({})", parts.join(", ")),
    );
}

fn ref_rate(refs: &ReferenceTable, k: TableKey, h1: bool) -> impl Fn(usize) -> Option<f64> + '_ {
    move |n| refs.get(&k, n).and_then(|e| if h1 { e.rate_h1 } else { e.rate_l2 })
}

fn table1(refs: &ReferenceTable) -> swg::Result<Criterion> {
    let mut c = Criterion::new("Exact reproduction on uniform squares, kappa = 4");
    let sq = (Family::Square, Domain::UnitSquare);

    let t = study(1, sq.0, sq.1, 4.0, &[8, 16, 32])?;
    let worst = t
        .rows
        .iter()
        .map(|r| r.err_discrete_l2.max(r.err_discrete_h1))
        .fold(0.0, f64::max);
    c.check(worst <= 1e-10, format!("case 1 L2 and H1 errors <= 1e-10 for n = 8, 16, 32: max {worst:.2e}"));

    let k2 = key(1, 2, sq.0, sq.1, 4.0);
    let t = study(2, sq.0, sq.1, 4.0, &SQUARE_NS)?;
    value_check(&mut c, &t, refs, &k2, &[8, 16, 32, 64], &["L2"], 0.05)?;
    rate_check(&mut c, "case 2 L2", &t, &t.rate_l2, ref_rate(refs, k2, false), &SQUARE_NS, 0.05);
    rate_check(&mut c, "case 2 H1", &t, &t.rate_h1, ref_rate(refs, k2, true), &SQUARE_NS, 0.05);

    for case in [3u8, 4] {
        let k = key(1, case, sq.0, sq.1, 4.0);
        let t = study(case, sq.0, sq.1, 4.0, &SQUARE_NS)?;
        let before = c.checks.len();
        value_check(&mut c, &t, refs, &k, &[8], &["L2", "H1"], 0.05)?;
        for ch in &mut c.checks[before..] {
            ch.text = format!("case {case} {}", ch.text);
        }
        rate_check(&mut c, &format!("case {case} L2"), &t, &t.rate_l2, ref_rate(refs, k, false), &SQUARE_NS, 0.05);
        rate_check(&mut c, &format!("case {case} H1"), &t, &t.rate_h1, ref_rate(refs, k, true), &SQUARE_NS, 0.05);
    }
    Ok(c)
}

fn kappa_sweep(refs: &ReferenceTable) -> swg::Result<Criterion> {
    let mut c = Criterion::new("Stabilization parameter sweep, cases 3 and 4 on uniform squares");
    let sq = (Family::Square, Domain::UnitSquare);
    for (case, table) in [(3u8, 2u8), (4, 3)] {
        for kappa in KAPPAS {
            let k = key(table, case, sq.0, sq.1, kappa);
            let t = study(case, sq.0, sq.1, kappa, &SQUARE_NS)?;
            let before = c.checks.len();
            value_check(&mut c, &t, refs, &k, &SQUARE_NS, &["L2", "H1"], 0.10)?;
            rate_check(&mut c, "final L2", &t, &t.rate_l2, ref_rate(refs, k, false), &[128], 0.05);
            rate_check(&mut c, "final H1", &t, &t.rate_h1, ref_rate(refs, k, true), &[128], 0.05);
            for ch in &mut c.checks[before..] {
                ch.text = format!("case {case} kappa {kappa}: {}", ch.text);
            }
        }
        let k = key(table, case, sq.0, sq.1, 0.01);
        let t = study(case, sq.0, sq.1, 0.01, &SQUARE_NS)?;
        let before = c.checks.len();
        value_check(&mut c, &t, refs, &k, &SQUARE_NS, &["L2", "H1"], 0.20)?;
        rate_check(&mut c, "coarse L2", &t, &t.rate_l2, ref_rate(refs, k, false), &[16, 32], 0.2);
        rate_check(&mut c, "coarse H1", &t, &t.rate_h1, ref_rate(refs, k, true), &[16, 32], 0.2);
        for ch in &mut c.checks[before..] {
            ch.text = format!("case {case} kappa 0.01: {}", ch.text);
        }
    }
    Ok(c)
}

fn polygonal(refs: &ReferenceTable) -> swg::Result<Criterion> {
    let mut c = Criterion::new("Case 3 on triangular, hexagonal and octagonal meshes");
    let k = key(4, 3, Family::Triangular, Domain::UnitSquare, 4.0);
    let t = study(3, Family::Triangular, Domain::UnitSquare, 4.0, &SQUARE_NS)?;
    let before = c.checks.len();
    value_check(&mut c, &t, refs, &k, &SQUARE_NS, &["L2", "H1"], 0.05)?;
    rate_check(&mut c, "L2", &t, &t.rate_l2, |_| Some(2.0), &SQUARE_NS, 0.05);
    rate_check(&mut c, "H1", &t, &t.rate_h1, |_| Some(1.0), &SQUARE_NS, 0.05);
    for ch in &mut c.checks[before..] {
        ch.text = format!("triangular: {}", ch.text);
    }

    let ns = [8, 16, 32, 64];
    for family in [Family::Hexagonal, Family::Octagonal] {
        let t = study(3, family, Domain::UnitSquare, 4.0, &ns)?;
        let before = c.checks.len();
        rate_check(&mut c, "L2", &t, &t.rate_l2, |_| Some(2.0), &ns, 0.15);
        rate_check(&mut c, "weak-gradient H1", &t, &t.rate_wg_h1, |_| Some(1.0), &ns, 0.15);
        for ch in &mut c.checks[before..] {
            ch.text = format!("{family}: {}", ch.text);
        }
        c.note(format!("{family}: cell-centred discrete H1 rates {}", fmt_rates(&t.rate_h1)));
    }
    Ok(c)
}

fn lshape() -> swg::Result<Criterion> {
    let mut c = Criterion::new("Case 3 on the L-shaped domain");
    let mut finals = Vec::new();
    for family in [Family::Square, Family::Triangular] {
        let t = study(3, family, Domain::LShape, 4.0, &SQUARE_NS)?;
        rate_check(&mut c, &format!("{family} L2"), &t, &t.rate_l2, |_| Some(2.0), &SQUARE_NS, 0.1);
        let last = t.rate_h1.last().copied().flatten().unwrap_or(f64::NAN);
        c.note(format!("{family} H1 rates {}", fmt_rates(&t.rate_h1)));
        finals.push((family, last));
    }
    let mut sorted: Vec<f64> = finals.iter().map(|f| f.1).collect();
    sorted.sort_by(f64::total_cmp);
    let ok = (sorted[0] - 1.0).abs() <= 0.1 && (sorted[1] - 2.0).abs() <= 0.1;
    let mapping = finals
        .iter()
        .map(|(f, r)| format!("{f} -> {:.0}", r.round()))
        .collect::<Vec<_>>()
        .join(", ");
    c.check(
        ok,
        format!("final H1 rates {{{:.2}, {:.2}}} match {{1, 2}} within ±0.1; observed mapping {mapping}", sorted[0], sorted[1]),
    );
    Ok(c)
}

fn random_cells(seed: u8) -> Vec<Sample> {
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::from_seed(Default::default(), &[seed; 32]));
    let strat = sample();
    (0..RANDOM_CELLS)
        .map(|_| strat.new_tree(&mut runner).expect("sample").current())
        .collect()
}

fn oracle(cells: &[Sample]) -> swg::Result<Check> {
    let mut worst = 0.0f64;
    for s in cells {
        let geo = LocalGeometry::from_polygon(&s.poly)?;
        let gm = GeomMatrices::new(&geo)?;
        let rule = CellQuadRule::new(&geo, 5)?;
        let p = problem(s.k, geo.centroid);
        let blocks = ElementBlocks::compute(&geo, &gm, &p, &rule);
        let (k, _) = element_system(&blocks, s.kappa, s.h)?;
        let x = DVector::from_column_slice(&s.x);
        let y = DVector::from_column_slice(&s.y);
        let o = common::forms(&s.poly, &*p.alpha, &*p.beta, &*p.c, &*p.f, s.h, &s.x, &s.y);
        let defined = s.kappa * o.stab + o.diffusion + o.convection + o.reaction;
        let scale = (s.kappa * o.stab).abs() + o.diffusion.abs() + o.convection.abs() + o.reaction.abs();
        worst = worst.max((y.dot(&(&k * &x)) - defined).abs() / scale);
    }
    Ok(Check {
        ok: worst <= 1e-9,
        text: format!("element oracle over {} random cells: worst relative deviation {worst:.2e} (tol 1e-9)", cells.len()),
    })
}

fn identities(cells: &[Sample]) -> swg::Result<Check> {
    let mut worst = 0.0f64;
    for s in cells {
        let geo = LocalGeometry::from_polygon(&s.poly)?;
        let gm = GeomMatrices::new(&geo)?;
        let rule = CellQuadRule::new(&geo, 5)?;
        let p = problem(s.k, geo.centroid);
        let b = ElementBlocks::compute(&geo, &gm, &p, &rule);
        let n = geo.num_edges();
        let ones = DVector::from_element(n, 1.0);
        let a = stab_a(&gm);
        let rel = |m: &DMatrix<f64>, v: f64| v / m.amax().max(1e-300);
        let lmax = gm.lengths.amax();
        let c_eig = b.c.clone().symmetric_eigen().eigenvalues.min();
        let devs = [
            (&a - a.transpose()).amax() / lmax,
            (&a * &gm.m).amax() / lmax,
            (&gm.d * &gm.m - DMatrix::<f64>::identity(3, 3)).amax(),
            rel(&b.b, (&b.b * &ones).amax()),
            rel(&b.r, (&b.r * &ones).amax()),
            rel(&b.c, (-c_eig).max(0.0)),
        ];
        worst = devs.iter().fold(worst, |w, d| w.max(*d));
    }
    Ok(Check {
        ok: worst <= 1e-10,
        text: format!("A symmetric, A M = 0, D M = I, B 1 = 0, R 1 = 0, C >= 0 on random cells: worst {worst:.2e} (tol 1e-10)"),
    })
}

fn patch_test() -> swg::Result<Check> {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for family in [Family::Square, Family::Triangular, Family::Hexagonal, Family::Octagonal] {
        let domains: &[Domain] = match family {
            Family::Square | Family::Triangular => &[Domain::UnitSquare, Domain::LShape],
            _ => &[Domain::UnitSquare],
        };
        for &domain in domains {
            for n in [4, 7] {
                let r = solve_level(&RunConfig::new(0, family, domain, &[n], 4.0), n)?.report;
                for v in [r.err_discrete_l2, r.err_discrete_h1, r.err_l2_recon, r.err_wg_h1] {
                    worst = worst.max(v);
                }
                runs += 1;
            }
        }
    }
    Ok(Check {
        ok: worst <= 1e-10,
        text: format!("patch test on {runs} meshes of every family: max error in any norm {worst:.2e} (tol 1e-10)"),
    })
}

fn affine(cells: &[Sample]) -> swg::Result<Check> {
    let mut rng = TestRunner::new_with_rng(Config::default(), TestRng::from_seed(Default::default(), &[7; 32]));
    let coef = proptest::array::uniform3(-3.0f64..3.0);
    let unit = (0.0f64..1.0, 0.0f64..1.0);
    let (mut w_rep, mut w_grad) = (0.0f64, 0.0f64);
    for s in cells {
        let geo = LocalGeometry::from_polygon(&s.poly)?;
        let gm = GeomMatrices::new(&geo)?;
        let [a0, a1, a2] = coef.new_tree(&mut rng).expect("coef").current();
        let phi = |p: Point2| a0 + a1 * p.x + a2 * p.y;
        let vals: Vec<f64> = geo.midpoints.iter().map(|m| phi(*m)).collect();
        let ext = extension(&vals, &gm)?;
        let scale = a0.abs() + (a1.abs() + a2.abs()) * (geo.centroid.coords.abs().max() + geo.diameter);
        let tri = &geo.vertices[..3];
        for _ in 0..100 {
            let (u, v) = unit.new_tree(&mut rng).expect("point").current();
            let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
            let p = Point2::from(tri[0].coords + u * (tri[1] - tri[0]) + v * (tri[2] - tri[0]));
            w_rep = w_rep.max((ext.eval(gm.center, p) - phi(p)).abs() / scale);
        }
        let g = weak_gradient(&vals, &geo)?;
        let exact = Vector2::new(a1, a2);
        // edge values carry round-off of size |φ|, amplified by perimeter/area
        let gscale = exact.norm() + scale / geo.diameter;
        w_grad = w_grad.max((g - exact).norm() / gscale);
    }
    Ok(Check {
        ok: w_rep <= 1e-12 && w_grad <= 1e-12,
        text: format!("affine fields: extension deviation {w_rep:.2e}, weak gradient deviation {w_grad:.2e} (tol 1e-12)"),
    })
}

fn coercivity() -> swg::Result<Check> {
    let mesh = generate_mesh(Family::Square, 4, Domain::UnitSquare)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for case in 1..=4u8 {
        let tc = test_case(CaseId(case))?;
        let asm = assemble(&mesh, &tc.problem, &AssemblyOptions::default())?;
        let k = asm.system.matrix.to_dense();
        let lo = ((&k + k.transpose()) * 0.5).symmetric_eigen().eigenvalues.min();
        ok &= lo > 0.0;
        parts.push(format!("case {case} {lo:.3e}"));
    }
    Ok(Check {
        ok,
        text: format!("smallest eigenvalue of the symmetric part, n = 4 squares: {}", parts.join(", ")),
    })
}

fn quadrature(cells: &[Sample]) -> swg::Result<Check> {
    let mut worst = 0.0f64;
    for s in cells.iter().take(20) {
        let geo = LocalGeometry::from_polygon(&s.poly)?;
        let c = geo.centroid;
        let r = geo.diameter;
        for degree in 1..=12 {
            let rule = CellQuadRule::new(&geo, degree)?;
            for a in 0..=degree as i32 {
                for b in 0..=(degree as i32 - a) {
                    let f = |p: Point2| ((p.x - c.x) / r).powi(a) * ((p.y - c.y) / r).powi(b);
                    let want = common::integrate(&s.poly, f);
                    let got = rule.integrate(f);
                    worst = worst.max((got - want).abs() / geo.area);
                }
            }
        }
        let (p, q) = (geo.vertices[0], geo.vertices[1]);
        let len = (q - p).norm();
        for npts in 1..=10 {
            let rule = EdgeQuadRule::new(p, q, npts)?;
            for k in 0..2 * npts as i32 {
                let got = rule.integrate(|x| ((x - p).norm() / len).powi(k));
                worst = worst.max((got - len / (k + 1) as f64).abs() / len);
            }
        }
    }
    Ok(Check {
        ok: worst <= 1e-12,
        text: format!("cell rules of degree 1..12 and edge rules of 1..10 points on random cells: worst {worst:.2e} (tol 1e-12)"),
    })
}

fn properties() -> swg::Result<Criterion> {
    let mut c = Criterion::new("Property suite");
    let cells = random_cells(1);
    for check in [oracle(&cells)?, identities(&cells)?, patch_test()?, affine(&cells)?, coercivity()?, quadrature(&cells)?] {
        c.checks.push(check);
    }
    Ok(c)
}

fn kappa_robustness() -> swg::Result<Criterion> {
    let mut c = Criterion::new("Invariant: case 3 errors at n = 128 insensitive to kappa");
    let mut errs = Vec::new();
    for kappa in [1.0, 4.0, 6.0, 20.0] {
        let r = solve_level(&RunConfig::new(3, Family::Square, Domain::UnitSquare, &[128], kappa), 128)?.report;
        errs.push((kappa, r.err_discrete_l2));
    }
    let lo = errs.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let hi = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let list = errs.iter().map(|(k, e)| format!("kappa {k}: {e:.3e}")).collect::<Vec<_>>().join(", ");
    c.check(hi / lo <= 2.0, format!("max/min L2 ratio {:.2} (limit 2): {list}", hi / lo));
    Ok(c)
}

fn run() -> swg::Result<bool> {
    let refs = ReferenceTable::embedded()?;
    let sections: Vec<(&str, Box<dyn Fn() -> swg::Result<Criterion> + '_>)> = vec![
        ("square", Box::new(|| table1(&refs))),
        ("kappa", Box::new(|| kappa_sweep(&refs))),
        ("polygon", Box::new(|| polygonal(&refs))),
        ("lshape", Box::new(lshape)),
        ("properties", Box::new(properties)),
        ("invariant", Box::new(kappa_robustness)),
    ];
    let mut passed = 0;
    let total = sections.len();
    for (name, f) in sections {
        let start = Instant::now();
        let c = f()?;
        c.print();
        println!("       ({name}: {:.1} s)", start.elapsed().as_secs_f64());
        passed += c.passed() as usize;
    }
    println!("acceptance: {passed} of {total} criteria passed");
    Ok(passed == total)
}

fn main() -> ExitCode {
    let strict = std::env::var("SWG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    match run() {
        Ok(all) if all || !strict => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("acceptance run failed: {e}");
            ExitCode::from(2)
        }
    }
}
