//! Convergence studies, the embedded reference tables and comparison against
//! them.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::cases::{test_case, CaseId, TestCase};
use crate::error::{Result, SwgError};
use crate::mesh::{generate_mesh, Domain, Family, PolyMesh};
use crate::postprocess::{
    energy_norm, norm_discrete_h1, norm_discrete_l2, norm_l2_recon, norm_wg_h1, rates, reconstruct, uniform_square_spacing,
    CellRecon, ErrorReport, NormMode,
};
use crate::quadrature::QuadOptions;
use crate::sparse::SolveOptions;
use crate::system::{assemble, merge_solution, solve, AssemblyOptions};

const REFERENCE_CSV: &str = include_str!("../data/reference.csv");

/// Layout of a printed convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(SwgError::Parse(format!("unknown table format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseId,
    pub family: Family,
    pub domain: Domain,
    pub ns: Vec<usize>,
    pub kappa: f64,
    pub solver: SolveOptions,
    pub quad: QuadOptions,
    pub local_h: bool,
    /// `None` picks the grid formulas on uniform square meshes and the
    /// area-weighted ones elsewhere.
    pub norm: Option<NormMode>,
    pub format: TableFormat,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: CaseId(3),
            family: Family::Square,
            domain: Domain::UnitSquare,
            ns: vec![8, 16, 32, 64],
            kappa: 4.0,
            solver: SolveOptions::default(),
            quad: QuadOptions::default(),
            local_h: false,
            norm: None,
            format: TableFormat::Markdown,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn new(case: u8, family: Family, domain: Domain, ns: &[usize], kappa: f64) -> Self {
        RunConfig {
            case: CaseId(case),
            family,
            domain,
            ns: ns.to_vec(),
            kappa,
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(SwgError::InvalidArgument(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.ns.is_empty() {
            return Err(SwgError::InvalidArgument("empty list of mesh sizes".into()));
        }
        if self.ns.contains(&0) {
            return Err(SwgError::InvalidArgument("mesh size n must be at least 1".into()));
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SwgError::InvalidArgument(format!(
                "mesh sizes must be strictly increasing, got {:?}",
                self.ns
            )));
        }
        if !(self.solver.tol > 0.0) {
            return Err(SwgError::InvalidArgument(format!("solver tolerance must be positive, got {}", self.solver.tol)));
        }
        test_case(self.case)?;
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        RunConfig {
            ns: vec![n],
            ..self.clone()
        }
    }

    fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions {
            kappa: self.kappa,
            quad: self.quad,
            local_h: self.local_h,
        }
    }
}

/// Everything produced by one mesh level.
pub struct Solved {
    pub mesh: PolyMesh,
    pub ub: Vec<f64>,
    pub recon: CellRecon,
    pub norm: NormMode,
    pub report: ErrorReport,
}

/// mesh → assemble → solve → norms for one n.
pub fn solve_level(cfg: &RunConfig, n: usize) -> Result<Solved> {
    let tc = test_case(cfg.case)?;
    let problem = &tc.problem;
    let mesh = generate_mesh(cfg.family, n, cfg.domain)?;
    let asm = assemble(&mesh, problem, &cfg.assembly())?;
    let (x, stats) = solve(&asm.system, &cfg.solver)?;
    let ub = merge_solution(&asm.dofmap, &x, &asm.boundary_values)?;
    let recon = reconstruct(&mesh, &ub)?;
    let u = problem.exact.as_ref().ok_or(SwgError::MissingReference("exact solution".into()))?;
    let grad = problem.grad_exact.as_ref().ok_or(SwgError::MissingReference("exact gradient".into()))?;
    let norm = match cfg.norm {
        Some(m) => m,
        None if uniform_square_spacing(&mesh).is_some() => NormMode::SquarePaper,
        None => NormMode::General,
    };
    let deg = cfg.quad.cell_degree;
    let report = ErrorReport {
        n,
        h: 1.0 / n as f64,
        err_discrete_l2: norm_discrete_l2(&mesh, &ub, u, norm)?,
        err_discrete_h1: norm_discrete_h1(&mesh, &ub, grad, norm)?,
        err_l2_recon: norm_l2_recon(&mesh, &recon, u, deg)?,
        err_wg_h1: norm_wg_h1(&mesh, &ub, grad, deg)?,
        energy_norm: energy_norm(&mesh, &ub, cfg.kappa, &problem.alpha, deg, cfg.local_h)?,
        solver: stats,
    };
    Ok(Solved {
        mesh,
        ub,
        recon,
        norm,
        report,
    })
}

pub fn run_case(cfg: &RunConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    match cfg.ns.as_slice() {
        [n] => Ok(solve_level(cfg, *n)?.report),
        _ => Err(SwgError::InvalidArgument(format!(
            "run_case takes a single mesh size, got {:?}",
            cfg.ns
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: CaseId,
    pub family: Family,
    pub domain: Domain,
    pub kappa: f64,
    pub norm: NormMode,
    pub rows: Vec<ErrorReport>,
    pub rate_l2: Vec<Option<f64>>,
    pub rate_h1: Vec<Option<f64>>,
    pub rate_l2_recon: Vec<Option<f64>>,
    pub rate_wg_h1: Vec<Option<f64>>,
    /// Conditions of the problem that the theory assumes but the case violates.
    pub notes: Vec<String>,
}

fn case_notes(tc: &TestCase) -> Vec<String> {
    let mut notes = Vec::new();
    if tc.alpha_lower_bound <= 0.0 {
        notes.push(format!(
            "case {}: diffusion tensor is only positive semidefinite on the closed domain (smallest eigenvalue {})",
            tc.id.0, tc.alpha_lower_bound
        ));
    }
    if !tc.reaction_condition {
        notes.push(format!("case {}: c - div(beta)/2 >= 0 does not hold everywhere", tc.id.0));
    }
    notes
}

pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if cfg.ns.len() < 2 {
        return Err(SwgError::InvalidArgument("a convergence study needs at least two mesh sizes".into()));
    }
    let tc = test_case(cfg.case)?;
    let mut rows = Vec::with_capacity(cfg.ns.len());
    let mut norm = NormMode::General;
    for &n in &cfg.ns {
        let solved = solve_level(cfg, n)?;
        norm = solved.norm;
        rows.push(solved.report);
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&ErrorReport) -> f64| rates(&rows.iter().map(f).collect::<Vec<_>>(), &hs);
    Ok(ConvergenceTable {
        case: cfg.case,
        family: cfg.family,
        domain: cfg.domain,
        kappa: cfg.kappa,
        norm,
        rate_l2: col(|r| r.err_discrete_l2)?,
        rate_h1: col(|r| r.err_discrete_h1)?,
        rate_l2_recon: col(|r| r.err_l2_recon)?,
        rate_wg_h1: col(|r| r.err_wg_h1)?,
        rows,
        notes: case_notes(&tc),
    })
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl ConvergenceTable {
    pub fn last_rates(&self) -> (Option<f64>, Option<f64>) {
        (
            self.rate_l2.last().copied().flatten(),
            self.rate_h1.last().copied().flatten(),
        )
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| Observation {
                n: r.n,
                err_l2: r.err_discrete_l2,
                err_h1: r.err_discrete_h1,
                rate_l2: self.rate_l2[k],
                rate_h1: self.rate_h1[k],
            })
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "case {}, {} mesh, {}, kappa = {}, norms: {}\n",
            self.case.0, self.family, self.domain, self.kappa, self.norm
        );
        s.push_str("| n | h | err_l2 | rate_l2 | err_h1 | rate_h1 | err_l2_recon | rate_l2_recon |\n");
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        for (k, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "| {} | {:.4e} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} |",
                r.n,
                r.h,
                r.err_discrete_l2,
                fmt_rate(self.rate_l2[k]),
                r.err_discrete_h1,
                fmt_rate(self.rate_h1[k]),
                r.err_l2_recon,
                fmt_rate(self.rate_l2_recon[k]),
            );
        }
        for note in &self.notes {
            let _ = writeln!(s, "\nnote: {note}");
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| SwgError::Io(e.to_string());
        wr.write_record(["n", "h", "err_l2", "rate_l2", "err_h1", "rate_h1", "err_l2_recon", "rate_l2_recon"])
            .map_err(io)?;
        let opt = |r: Option<f64>| r.map_or_else(String::new, |v| format!("{v:.6}"));
        for (k, r) in self.rows.iter().enumerate() {
            wr.write_record([
                r.n.to_string(),
                format!("{:.12e}", r.h),
                format!("{:.12e}", r.err_discrete_l2),
                opt(self.rate_l2[k]),
                format!("{:.12e}", r.err_discrete_h1),
                opt(self.rate_h1[k]),
                format!("{:.12e}", r.err_l2_recon),
                opt(self.rate_l2_recon[k]),
            ])
            .map_err(io)?;
        }
        let bytes = wr.into_inner().map_err(|e| SwgError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| SwgError::Io(e.to_string()))
    }

    pub fn render(&self, format: TableFormat) -> Result<String> {
        match format {
            TableFormat::Markdown => Ok(self.to_markdown()),
            TableFormat::Csv => self.to_csv(),
        }
    }
}

/// How a reference entry is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TolClass {
    /// Reference values are round-off; the observed errors must be ≤ 1e-10.
    Machine,
    Value5,
    Value10,
    Value20,
    /// Only convergence rates are compared.
    RateOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub machine: f64,
    pub value5: f64,
    pub value10: f64,
    pub value20: f64,
    pub rate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            machine: 1e-10,
            value5: 0.05,
            value10: 0.10,
            value20: 0.20,
            rate: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct RawEntry<'a> {
    table: u8,
    case: u8,
    mesh: &'a str,
    domain: &'a str,
    kappa: f64,
    n: usize,
    err_l2: f64,
    rate_l2: Option<f64>,
    err_h1: f64,
    rate_h1: Option<f64>,
    tol: TolClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceEntry {
    pub table: u8,
    pub case: CaseId,
    pub family: Family,
    pub domain: Domain,
    pub kappa: f64,
    pub n: usize,
    pub err_l2: f64,
    pub rate_l2: Option<f64>,
    pub err_h1: f64,
    pub rate_h1: Option<f64>,
    pub tol: TolClass,
}

/// Selects one column block of a published table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableKey {
    pub table: u8,
    pub case: CaseId,
    pub family: Family,
    pub domain: Domain,
    pub kappa: f64,
}

impl fmt::Display for TableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "table {} case {} {} {} kappa={}",
            self.table, self.case.0, self.family, self.domain, self.kappa
        )
    }
}

impl ReferenceEntry {
    pub fn key(&self) -> TableKey {
        TableKey {
            table: self.table,
            case: self.case,
            family: self.family,
            domain: self.domain,
            kappa: self.kappa,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceTable {
    pub fn embedded() -> Result<Self> {
        Self::parse(REFERENCE_CSV)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let headers = rd.headers().map_err(|e| SwgError::Parse(e.to_string()))?.clone();
        let mut entries = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| SwgError::Parse(e.to_string()))?;
            let raw: RawEntry = rec.deserialize(Some(&headers)).map_err(|e| SwgError::Parse(e.to_string()))?;
            entries.push(ReferenceEntry {
                table: raw.table,
                case: CaseId(raw.case),
                family: raw.mesh.parse()?,
                domain: raw.domain.parse()?,
                kappa: raw.kappa,
                n: raw.n,
                err_l2: raw.err_l2,
                rate_l2: raw.rate_l2,
                err_h1: raw.err_h1,
                rate_h1: raw.rate_h1,
                tol: raw.tol,
            });
        }
        Ok(ReferenceTable { entries })
    }

    /// Distinct column blocks in file order.
    pub fn keys(&self) -> Vec<TableKey> {
        let mut keys: Vec<TableKey> = Vec::new();
        for e in &self.entries {
            let k = e.key();
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys
    }

    pub fn block(&self, key: &TableKey) -> Vec<&ReferenceEntry> {
        self.entries.iter().filter(|e| e.key() == *key).collect()
    }

    pub fn get(&self, key: &TableKey, n: usize) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| e.key() == *key && e.n == n)
    }

    /// The block as if it had been computed, for self-comparison.
    pub fn observations(&self, key: &TableKey) -> Vec<Observation> {
        self.block(key)
            .into_iter()
            .map(|e| Observation {
                n: e.n,
                err_l2: e.err_l2,
                err_h1: e.err_h1,
                rate_l2: e.rate_l2,
                rate_h1: e.rate_h1,
            })
            .collect()
    }
}

/// One computed row in the shape of a reference row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub n: usize,
    pub err_l2: f64,
    pub err_h1: f64,
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryCheck {
    pub n: usize,
    pub quantity: &'static str,
    pub observed: f64,
    pub expected: f64,
    /// Relative deviation for values, absolute for rates.
    pub deviation: f64,
    pub passed: bool,
}

impl fmt::Display for EntryCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} n={:<4} {:<8} observed {:.3e} expected {:.3e} deviation {:.3e}",
            if self.passed { "ok  " } else { "FAIL" },
            self.n,
            self.quantity,
            self.observed,
            self.expected,
            self.deviation
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub key: TableKey,
    pub checks: Vec<EntryCheck>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

/// Checks every observed row against the reference block selected by `key`.
pub fn compare_reference(observed: &[Observation], reference: &ReferenceTable, key: &TableKey, tol: &Tolerances) -> Result<Comparison> {
    let mut checks = Vec::new();
    for obs in observed {
        let e = reference
            .get(key, obs.n)
            .ok_or_else(|| SwgError::MissingReference(format!("{key} n={}", obs.n)))?;
        let mut value = |quantity, observed: f64, expected: f64, rel: f64| {
            let deviation = (observed - expected).abs() / expected.abs();
            checks.push(EntryCheck {
                n: obs.n,
                quantity,
                observed,
                expected,
                deviation,
                passed: deviation <= rel,
            });
        };
        match e.tol {
            TolClass::Machine => {
                for (q, v, x) in [("err_l2", obs.err_l2, e.err_l2), ("err_h1", obs.err_h1, e.err_h1)] {
                    checks.push(EntryCheck {
                        n: obs.n,
                        quantity: q,
                        observed: v,
                        expected: x,
                        deviation: v,
                        passed: v <= tol.machine,
                    });
                }
            }
            TolClass::Value5 | TolClass::Value10 | TolClass::Value20 => {
                let rel = match e.tol {
                    TolClass::Value5 => tol.value5,
                    TolClass::Value10 => tol.value10,
                    _ => tol.value20,
                };
                value("err_l2", obs.err_l2, e.err_l2, rel);
                value("err_h1", obs.err_h1, e.err_h1, rel);
            }
            TolClass::RateOnly => {
                for (q, v, x) in [("rate_l2", obs.rate_l2, e.rate_l2), ("rate_h1", obs.rate_h1, e.rate_h1)] {
                    if let (Some(v), Some(x)) = (v, x) {
                        let deviation = (v - x).abs();
                        checks.push(EntryCheck {
                            n: obs.n,
                            quantity: q,
                            observed: v,
                            expected: x,
                            deviation,
                            passed: deviation <= tol.rate,
                        });
                    }
                }
            }
        }
    }
    Ok(Comparison { key: *key, checks })
}

/// Groups of reference blocks run by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Square,
    Kappa,
    Polygon,
    LShape,
    All,
}

impl FromStr for Suite {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" => Ok(Suite::Square),
            "kappa" => Ok(Suite::Kappa),
            "polygon" | "polygonal" => Ok(Suite::Polygon),
            "lshape" | "l-shape" => Ok(Suite::LShape),
            "all" => Ok(Suite::All),
            other => Err(SwgError::Parse(format!("unknown suite `{other}`"))),
        }
    }
}

impl Suite {
    pub fn tables(self) -> &'static [u8] {
        match self {
            Suite::Square => &[1],
            Suite::Kappa => &[2, 3],
            Suite::Polygon => &[4],
            Suite::LShape => &[5],
            Suite::All => &[1, 2, 3, 4, 5],
        }
    }
}

/// Recomputes every block of the suite's tables on the listed mesh sizes and
/// compares. `base` supplies solver and quadrature settings.
pub fn verify_suite(suite: Suite, ns: &[usize], base: &RunConfig) -> Result<Vec<Comparison>> {
    let reference = ReferenceTable::embedded()?;
    let tol = Tolerances::default();
    let mut out = Vec::new();
    for key in reference.keys().into_iter().filter(|k| suite.tables().contains(&k.table)) {
        let cfg = RunConfig {
            case: key.case,
            family: key.family,
            domain: key.domain,
            kappa: key.kappa,
            ns: ns.to_vec(),
            norm: None,
            ..base.clone()
        };
        let table = run_convergence(&cfg)?;
        out.push(compare_reference(&table.observations(), &reference, &key, &tol)?);
    }
    Ok(out)
}
