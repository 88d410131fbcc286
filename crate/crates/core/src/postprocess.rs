//! Reconstruction, discrete and integral error norms, convergence rates and
//! solution export.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::Vector2;

use crate::element::{ScalarFn, TensorFn, VectorFn};
use crate::error::{Result, SwgError};
use crate::localops::{extension, weak_gradient, ExtensionCoeffs, GeomMatrices};
use crate::mesh::{PolyMesh, Point2};
use crate::quadrature::{CellQuadRule, TriangleRule};
use crate::sparse::SolveStats;

/// Per-cell linear extension of an edge field.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecon {
    pub coeffs: Vec<ExtensionCoeffs>,
    pub centers: Vec<Point2>,
}

impl CellRecon {
    pub fn eval(&self, cell: usize, p: Point2) -> f64 {
        self.coeffs[cell].eval(self.centers[cell], p)
    }
}

fn check_field(mesh: &PolyMesh, ub: &[f64]) -> Result<()> {
    if ub.len() != mesh.num_edges() {
        return Err(SwgError::SizeMismatch {
            expected: mesh.num_edges(),
            actual: ub.len(),
        });
    }
    Ok(())
}

fn degenerate(cell: usize) -> impl Fn(SwgError) -> SwgError {
    move |e| SwgError::DegenerateCell {
        cell,
        reason: e.to_string(),
    }
}

pub fn reconstruct(mesh: &PolyMesh, ub: &[f64]) -> Result<CellRecon> {
    check_field(mesh, ub)?;
    let mut coeffs = Vec::with_capacity(mesh.num_cells());
    let mut centers = Vec::with_capacity(mesh.num_cells());
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell)?;
        let gm = GeomMatrices::new(&geo).map_err(degenerate(cell))?;
        coeffs.push(extension(&mesh.gather(cell, ub), &gm)?);
        centers.push(gm.center);
    }
    Ok(CellRecon { coeffs, centers })
}

/// How the discrete norms on edge values are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Grid formulas for uniform axis-aligned square meshes: weight h per
    /// edge value (L²) and centred differences at cell centres (H¹).
    SquarePaper,
    /// Area-weighted versions valid on any polygonal mesh.
    General,
}

impl FromStr for NormMode {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square_paper" | "square" | "grid" => Ok(NormMode::SquarePaper),
            "general" => Ok(NormMode::General),
            other => Err(SwgError::Parse(format!("unknown norm mode `{other}`"))),
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::SquarePaper => "square_paper",
            NormMode::General => "general",
        })
    }
}

/// Grid spacing if every cell is an axis-aligned square of the same size.
pub fn uniform_square_spacing(mesh: &PolyMesh) -> Option<f64> {
    let first = mesh.cells.first()?;
    if first.len() != 4 {
        return None;
    }
    let h = (mesh.vertices[first[1]] - mesh.vertices[first[0]]).norm();
    let tol = 1e-10 * h;
    for cell in &mesh.cells {
        if cell.len() != 4 {
            return None;
        }
        for i in 0..4 {
            let d = mesh.vertices[cell[(i + 1) % 4]] - mesh.vertices[cell[i]];
            let axis_aligned = d.x.abs() < tol || d.y.abs() < tol;
            if !axis_aligned || (d.norm() - h).abs() > tol {
                return None;
            }
        }
    }
    Some(h)
}

/// Discrete L² error of edge values against point values at edge midpoints.
pub fn norm_discrete_l2(mesh: &PolyMesh, ub: &[f64], u: &ScalarFn, mode: NormMode) -> Result<f64> {
    check_field(mesh, ub)?;
    let diff = |e: usize| ub[e] - u(mesh.edges[e].midpoint);
    match mode {
        NormMode::SquarePaper => {
            let h = uniform_square_spacing(mesh).ok_or_else(|| SwgError::NormModeMismatch(mode.to_string()))?;
            let sum: f64 = (0..mesh.num_edges()).map(|e| diff(e).powi(2)).sum();
            Ok(h * sum.sqrt())
        }
        NormMode::General => {
            let weights = edge_area_weights(mesh)?;
            let sum: f64 = (0..mesh.num_edges()).map(|e| weights[e] * diff(e).powi(2)).sum();
            Ok(sum.sqrt())
        }
    }
}

/// w_e = Σ_{T ∋ e} |T| / N_T.
pub fn edge_area_weights(mesh: &PolyMesh) -> Result<Vec<f64>> {
    let mut w = vec![0.0; mesh.num_edges()];
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell)?;
        let share = geo.area / geo.num_edges() as f64;
        for e in mesh.cell_edge_ids(cell) {
            w[e] += share;
        }
    }
    Ok(w)
}

/// Discrete H¹ error: weak gradient (equivalently, centred differences on
/// squares) against the exact gradient at cell centroids.
pub fn norm_discrete_h1(mesh: &PolyMesh, ub: &[f64], grad: &VectorFn, mode: NormMode) -> Result<f64> {
    check_field(mesh, ub)?;
    match mode {
        NormMode::SquarePaper => {
            let h = uniform_square_spacing(mesh).ok_or_else(|| SwgError::NormModeMismatch(mode.to_string()))?;
            let mut sum = 0.0;
            for cell in 0..mesh.num_cells() {
                let geo = mesh.cell_geometry(cell)?;
                let v = mesh.gather(cell, ub);
                let (mut east, mut west, mut north, mut south) = (0.0, 0.0, 0.0, 0.0);
                for (val, n) in v.iter().zip(&geo.normals) {
                    match (n.x.round() as i32, n.y.round() as i32) {
                        (1, 0) => east = *val,
                        (-1, 0) => west = *val,
                        (0, 1) => north = *val,
                        _ => south = *val,
                    }
                }
                let g = grad(geo.centroid);
                let dx = (east - west) / h - g.x;
                let dy = (north - south) / h - g.y;
                sum += dx * dx + dy * dy;
            }
            Ok(h * sum.sqrt())
        }
        NormMode::General => {
            let mut sum = 0.0;
            for cell in 0..mesh.num_cells() {
                let geo = mesh.cell_geometry(cell)?;
                let wg = weak_gradient(&mesh.gather(cell, ub), &geo)?;
                sum += geo.area * (wg - grad(geo.centroid)).norm_squared();
            }
            Ok(sum.sqrt())
        }
    }
}

fn cell_rule(mesh: &PolyMesh, cell: usize, tri: &TriangleRule) -> Result<CellQuadRule> {
    let geo = mesh.cell_geometry(cell)?;
    CellQuadRule::from_rule(&geo, tri)
}

/// ‖u − s(u_b)‖ over the domain.
pub fn norm_l2_recon(mesh: &PolyMesh, recon: &CellRecon, u: &ScalarFn, degree: usize) -> Result<f64> {
    if recon.coeffs.len() != mesh.num_cells() {
        return Err(SwgError::SizeMismatch {
            expected: mesh.num_cells(),
            actual: recon.coeffs.len(),
        });
    }
    let tri = TriangleRule::with_degree(degree)?;
    let mut sum = 0.0;
    for cell in 0..mesh.num_cells() {
        let rule = cell_rule(mesh, cell, &tri)?;
        sum += rule.integrate(|p| (u(p) - recon.eval(cell, p)).powi(2));
    }
    Ok(sum.sqrt())
}

/// ‖∇_w u_b − ∇u‖ over the domain.
pub fn norm_wg_h1(mesh: &PolyMesh, ub: &[f64], grad: &VectorFn, degree: usize) -> Result<f64> {
    check_field(mesh, ub)?;
    let tri = TriangleRule::with_degree(degree)?;
    let mut sum = 0.0;
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell)?;
        let wg = weak_gradient(&mesh.gather(cell, ub), &geo)?;
        let rule = CellQuadRule::from_rule(&geo, &tri)?;
        sum += rule.integrate(|p| (wg - grad(p)).norm_squared());
    }
    Ok(sum.sqrt())
}

/// |||u_b||| = (Σ_T κ S_T(u_b, u_b) + a_T(u_b, u_b))^{1/2}, evaluated from
/// the definitions of the stabilizer and the diffusion form.
pub fn energy_norm(mesh: &PolyMesh, ub: &[f64], kappa: f64, alpha: &TensorFn, degree: usize, local_h: bool) -> Result<f64> {
    check_field(mesh, ub)?;
    if !(kappa > 0.0) {
        return Err(SwgError::InvalidArgument(format!(
            "stabilization parameter must be positive, got {kappa}"
        )));
    }
    let tri = TriangleRule::with_degree(degree)?;
    let mut sum = 0.0;
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell)?;
        let gm = GeomMatrices::new(&geo).map_err(degenerate(cell))?;
        let vals = mesh.gather(cell, ub);
        let s = extension(&vals, &gm)?;
        let h = if local_h { geo.diameter } else { mesh.h };
        let stab: f64 = (0..geo.num_edges())
            .map(|i| (s.eval(gm.center, geo.midpoints[i]) - vals[i]).powi(2) * geo.lengths[i])
            .sum::<f64>()
            / h;
        let wg = weak_gradient(&vals, &geo)?;
        let rule = CellQuadRule::from_rule(&geo, &tri)?;
        let a = rule.integrate(|p| wg.dot(&(alpha(p) * wg)));
        sum += kappa * stab + a;
    }
    Ok(sum.sqrt())
}

/// Observed orders log(e_{k−1}/e_k) / log(h_{k−1}/h_k); the first entry and
/// any pair with a non-positive error are `None`.
pub fn rates(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() {
        return Err(SwgError::SizeMismatch {
            expected: hs.len(),
            actual: errors.len(),
        });
    }
    if errors.len() < 2 {
        return Err(SwgError::InvalidArgument("rates need at least two levels".into()));
    }
    let mut out = vec![None];
    for k in 1..errors.len() {
        if !(hs[k] < hs[k - 1] && hs[k] > 0.0) {
            return Err(SwgError::InvalidArgument("mesh sizes must be decreasing".into()));
        }
        let (a, b) = (errors[k - 1], errors[k]);
        out.push(if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            Some((a / b).ln() / (hs[k - 1] / hs[k]).ln())
        } else {
            None
        });
    }
    Ok(out)
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub n: usize,
    pub h: f64,
    pub err_discrete_l2: f64,
    pub err_discrete_h1: f64,
    pub err_l2_recon: f64,
    pub err_wg_h1: f64,
    pub energy_norm: f64,
    pub solver: SolveStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    VtkLegacy,
}

impl FromStr for ExportFormat {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "vtk" | "vtk_legacy" => Ok(ExportFormat::VtkLegacy),
            other => Err(SwgError::Parse(format!("unknown export format `{other}`"))),
        }
    }
}

/// CSV: `cell_id,xc,yc,g0,g1,g2,s_center`, one row per cell.
pub fn write_csv<W: Write>(recon: &CellRecon, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| SwgError::Io(e.to_string());
    wr.write_record(["cell_id", "xc", "yc", "g0", "g1", "g2", "s_center"]).map_err(io)?;
    for (cell, (c, g)) in recon.centers.iter().zip(&recon.coeffs).enumerate() {
        wr.write_record(&[
            cell.to_string(),
            format!("{:.16e}", c.x),
            format!("{:.16e}", c.y),
            format!("{:.16e}", g.g0),
            format!("{:.16e}", g.g1),
            format!("{:.16e}", g.g2),
            format!("{:.16e}", g.eval(*c, *c)),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Legacy ASCII VTK polydata. Point data holds the cell-wise linear field
/// sampled at each vertex and averaged over the cells sharing it; cell data
/// holds the value at the centroid and the gradient.
pub fn write_vtk<W: Write>(mesh: &PolyMesh, recon: &CellRecon, mut w: W) -> Result<()> {
    let nv = mesh.vertices.len();
    let mut acc = vec![0.0; nv];
    let mut count = vec![0usize; nv];
    for (cell, verts) in mesh.cells.iter().enumerate() {
        for &v in verts {
            acc[v] += recon.eval(cell, mesh.vertices[v]);
            count[v] += 1;
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "SWG solution")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in &mesh.vertices {
        writeln!(w, "{:.16e} {:.16e} 0", p.x, p.y)?;
    }
    let size: usize = mesh.cells.iter().map(|c| c.len() + 1).sum();
    writeln!(w, "POLYGONS {} {}", mesh.num_cells(), size)?;
    for c in &mesh.cells {
        write!(w, "{}", c.len())?;
        for v in c {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    writeln!(w, "SCALARS s double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for (a, c) in acc.iter().zip(&count) {
        let v = if *c > 0 { a / *c as f64 } else { 0.0 };
        writeln!(w, "{v:.16e}")?;
    }
    writeln!(w, "CELL_DATA {}", mesh.num_cells())?;
    writeln!(w, "SCALARS s_center double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for (c, g) in recon.centers.iter().zip(&recon.coeffs) {
        writeln!(w, "{:.16e}", g.eval(*c, *c))?;
    }
    writeln!(w, "VECTORS grad_s double")?;
    for g in &recon.coeffs {
        writeln!(w, "{:.16e} {:.16e} 0", g.g1, g.g2)?;
    }
    Ok(())
}

pub fn export_solution(mesh: &PolyMesh, recon: &CellRecon, format: ExportFormat, path: &std::path::Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        ExportFormat::Csv => write_csv(recon, file),
        ExportFormat::VtkLegacy => write_vtk(mesh, recon, file),
    }
}

/// Gradient of the reconstruction on a cell.
pub fn recon_gradient(recon: &CellRecon, cell: usize) -> Vector2<f64> {
    recon.coeffs[cell].gradient()
}
