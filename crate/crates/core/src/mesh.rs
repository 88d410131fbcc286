//! Polygonal meshes: storage, per-cell geometry, validation and the
//! structured generators (squares, triangles, hexagons, octagons).

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::Vector2;

use crate::error::{Result, SwgError};

pub type Point2 = nalgebra::Point2<f64>;

/// Mesh family produced by [`generate_mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Square,
    Triangular,
    Hexagonal,
    Octagonal,
}

/// Computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// (0,1)²
    UnitSquare,
    /// (−1,1)² without the quadrant (0,1)×(−1,0)
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }

    pub fn perimeter(self) -> f64 {
        match self {
            Domain::UnitSquare => 4.0,
            Domain::LShape => 8.0,
        }
    }
}

impl FromStr for Family {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" | "rectangular" | "quad" => Ok(Family::Square),
            "triangular" | "triangle" | "tri" => Ok(Family::Triangular),
            "hexagonal" | "hexagon" | "hex" => Ok(Family::Hexagonal),
            "octagonal" | "octagon" | "oct" => Ok(Family::Octagonal),
            other => Err(SwgError::Parse(format!("unknown mesh family `{other}`"))),
        }
    }
}

impl FromStr for Domain {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unit_square" | "unitsquare" | "square" => Ok(Domain::UnitSquare),
            "lshape" | "l_shape" | "l-shape" => Ok(Domain::LShape),
            other => Err(SwgError::Parse(format!("unknown domain `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Square => "square",
            Family::Triangular => "triangular",
            Family::Hexagonal => "hexagonal",
            Family::Octagonal => "octagonal",
        })
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::UnitSquare => "unit_square",
            Domain::LShape => "lshape",
        })
    }
}

/// A mesh edge stored once, directed from its lower to its higher vertex index.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub midpoint: Point2,
    pub length: f64,
    /// Adjacent cells in order of first appearance.
    pub cells: Vec<usize>,
}

/// Reference from a cell to one of its edges. `sign` is +1 when the cell's
/// counter-clockwise traversal runs along the edge's stored direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEdge {
    pub edge: usize,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyMesh {
    pub vertices: Vec<Point2>,
    pub cells: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    /// For each cell, edge `i` joins vertex `i` and vertex `i + 1` of the loop.
    pub cell_edges: Vec<Vec<CellEdge>>,
    pub boundary: Vec<bool>,
    /// Maximum cell diameter.
    pub h: f64,
}

/// Geometric quantities of a single cell, in the cell's boundary order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGeometry {
    pub vertices: Vec<Point2>,
    pub lengths: Vec<f64>,
    pub midpoints: Vec<Point2>,
    pub normals: Vec<Vector2<f64>>,
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
}

impl LocalGeometry {
    /// Builds the geometry of a counter-clockwise polygon.
    pub fn from_polygon(vertices: &[Point2]) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(SwgError::DegenerateGeometry(format!(
                "polygon with {n} vertices"
            )));
        }
        let mut twice_area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut lengths = Vec::with_capacity(n);
        let mut midpoints = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            twice_area += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
            let t = q - p;
            let len = t.norm();
            if len <= 0.0 {
                return Err(SwgError::DegenerateGeometry(format!("zero-length edge {i}")));
            }
            lengths.push(len);
            midpoints.push(nalgebra::center(&p, &q));
            normals.push(Vector2::new(t.y / len, -t.x / len));
        }
        let area = 0.5 * twice_area;
        if !(area > 0.0) {
            return Err(SwgError::DegenerateGeometry(format!(
                "non-positive signed area {area:e}"
            )));
        }
        let centroid = Point2::new(cx / (3.0 * twice_area), cy / (3.0 * twice_area));
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max((vertices[i] - vertices[j]).norm());
            }
        }
        Ok(LocalGeometry {
            vertices: vertices.to_vec(),
            lengths,
            midpoints,
            normals,
            area,
            centroid,
            diameter,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.lengths.len()
    }
}

impl PolyMesh {
    /// Builds the edge structure from vertices and counter-clockwise cell
    /// loops. Only structural problems are rejected here; geometric and
    /// topological checks are left to [`PolyMesh::validate`].
    pub fn new(vertices: Vec<Point2>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(SwgError::InvalidArgument(format!(
                    "cell {c} has {} vertices",
                    cell.len()
                )));
            }
            let m = cell.len();
            let mut local = Vec::with_capacity(m);
            for i in 0..m {
                let a = cell[i];
                let b = cell[(i + 1) % m];
                if a >= vertices.len() || b >= vertices.len() {
                    return Err(SwgError::InvalidArgument(format!(
                        "cell {c} references a missing vertex"
                    )));
                }
                if a == b {
                    return Err(SwgError::InvalidArgument(format!(
                        "cell {c} repeats vertex {a}"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let sign = if a < b { 1.0 } else { -1.0 };
                let idx = *lookup.entry(key).or_insert_with(|| {
                    let p = vertices[key.0];
                    let q = vertices[key.1];
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        midpoint: nalgebra::center(&p, &q),
                        length: (q - p).norm(),
                        cells: Vec::with_capacity(2),
                    });
                    edges.len() - 1
                });
                edges[idx].cells.push(c);
                local.push(CellEdge { edge: idx, sign });
            }
            cell_edges.push(local);
        }
        let boundary = edges.iter().map(|e| e.cells.len() == 1).collect();
        let mut h: f64 = 0.0;
        for cell in &cells {
            for (i, &a) in cell.iter().enumerate() {
                for &b in &cell[i + 1..] {
                    h = h.max((vertices[a] - vertices[b]).norm());
                }
            }
        }
        Ok(PolyMesh {
            vertices,
            cells,
            edges,
            cell_edges,
            boundary,
            h,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    pub fn cell_vertices(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_geometry(&self, cell: usize) -> Result<LocalGeometry> {
        if cell >= self.cells.len() {
            return Err(SwgError::InvalidArgument(format!(
                "cell index {cell} out of range"
            )));
        }
        LocalGeometry::from_polygon(&self.cell_vertices(cell)).map_err(|e| {
            SwgError::DegenerateCell {
                cell,
                reason: e.to_string(),
            }
        })
    }

    /// Global edge indices of a cell, in boundary order.
    pub fn cell_edge_ids(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_edges[cell].iter().map(|ce| ce.edge)
    }

    /// Gathers the values of an edge field onto one cell.
    pub fn gather(&self, cell: usize, field: &[f64]) -> Vec<f64> {
        self.cell_edge_ids(cell).map(|e| field[e]).collect()
    }

    /// Reports every violated mesh invariant. Generator output yields an
    /// empty report.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut report = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            match e.cells.len() {
                1 | 2 => {}
                k => report.push(Diagnostic::new(
                    DiagnosticKind::NonManifoldEdge,
                    format!("non-manifold edge {i}: {k} adjacent cells"),
                )),
            }
            if self.boundary[i] != (e.cells.len() == 1) {
                report.push(Diagnostic::new(
                    DiagnosticKind::BoundaryFlag,
                    format!("edge {i}: boundary flag disagrees with adjacency"),
                ));
            }
            let p = self.vertices[e.vertices[0]];
            let q = self.vertices[e.vertices[1]];
            let mid = nalgebra::center(&p, &q);
            let scale = 1.0 + p.coords.amax().max(q.coords.amax());
            if (mid - e.midpoint).norm() > 4.0 * f64::EPSILON * scale {
                report.push(Diagnostic::new(
                    DiagnosticKind::Midpoint,
                    format!("edge {i}: stored midpoint is not the endpoint average"),
                ));
            }
            if e.cells.len() == 2 {
                let s0 = self.orientation_of(e.cells[0], i);
                let s1 = self.orientation_of(e.cells[1], i);
                if s0 == s1 {
                    report.push(Diagnostic::new(
                        DiagnosticKind::Orientation,
                        format!("edge {i}: both adjacent cells traverse it the same way"),
                    ));
                }
            }
        }
        for c in 0..self.cells.len() {
            let verts = self.cell_vertices(c);
            let signed = signed_area(&verts);
            if !(signed > 0.0) {
                report.push(Diagnostic::new(
                    DiagnosticKind::NegativeArea,
                    format!("cell {c}: negative area {signed:e} (clockwise or degenerate)"),
                ));
                continue;
            }
            if !is_simple(&verts) {
                report.push(Diagnostic::new(
                    DiagnosticKind::NotSimple,
                    format!("cell {c}: boundary loop self-intersects"),
                ));
            }
            if let Ok(geo) = LocalGeometry::from_polygon(&verts) {
                let perimeter: f64 = geo.lengths.iter().sum();
                let closure = geo
                    .lengths
                    .iter()
                    .zip(&geo.normals)
                    .fold(Vector2::zeros(), |acc, (l, n)| acc + *l * n);
                if closure.norm() > 1e-12 * perimeter {
                    report.push(Diagnostic::new(
                        DiagnosticKind::Closure,
                        format!("cell {c}: edge normals do not close ({:e})", closure.norm()),
                    ));
                }
                if geo.normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-14) {
                    report.push(Diagnostic::new(
                        DiagnosticKind::Normal,
                        format!("cell {c}: non-unit normal"),
                    ));
                }
            }
        }
        let mut used = vec![false; self.vertices.len()];
        for cell in &self.cells {
            for &v in cell {
                used[v] = true;
            }
        }
        let unused = used.iter().filter(|&&u| !u).count();
        if unused > 0 {
            report.push(Diagnostic::new(
                DiagnosticKind::UnusedVertex,
                format!("{unused} vertices are not referenced by any cell"),
            ));
        }
        let euler = (self.vertices.len() - unused) as i64 - self.edges.len() as i64
            + self.cells.len() as i64;
        if euler != 1 {
            report.push(Diagnostic::new(
                DiagnosticKind::Euler,
                format!("V - E + C = {euler}, expected 1 for a simply connected domain"),
            ));
        }
        report
    }

    fn orientation_of(&self, cell: usize, edge: usize) -> f64 {
        self.cell_edges[cell]
            .iter()
            .find(|ce| ce.edge == edge)
            .map(|ce| ce.sign)
            .unwrap_or(0.0)
    }

    /// Writes the plain-text mesh format: `vertices K`, K coordinate lines,
    /// `cells C`, C lines `m v1 ... vm`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(w, "{:?} {:?}", p.x, p.y)?;
        }
        writeln!(w, "cells {}", self.cells.len())?;
        for cell in &self.cells {
            write!(w, "{}", cell.len())?;
            for v in cell {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| SwgError::Parse(format!("unexpected end of input, wanted {what}")))
        };
        fn num<T: FromStr>(s: String) -> Result<T> {
            s.parse()
                .map_err(|_| SwgError::Parse(format!("bad number `{s}`")))
        }
        if next("`vertices`")? != "vertices" {
            return Err(SwgError::Parse("expected `vertices` header".into()));
        }
        let k: usize = num(next("vertex count")?)?;
        let mut vertices = Vec::with_capacity(k);
        for _ in 0..k {
            let x: f64 = num(next("x")?)?;
            let y: f64 = num(next("y")?)?;
            vertices.push(Point2::new(x, y));
        }
        if next("`cells`")? != "cells" {
            return Err(SwgError::Parse("expected `cells` header".into()));
        }
        let c: usize = num(next("cell count")?)?;
        let mut cells = Vec::with_capacity(c);
        for _ in 0..c {
            let m: usize = num(next("cell size")?)?;
            let mut cell = Vec::with_capacity(m);
            for _ in 0..m {
                cell.push(num(next("vertex index")?)?);
            }
            cells.push(cell);
        }
        PolyMesh::new(vertices, cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    NonManifoldEdge,
    BoundaryFlag,
    Midpoint,
    Orientation,
    NegativeArea,
    NotSimple,
    Closure,
    Normal,
    UnusedVertex,
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, message: String) -> Self {
        Diagnostic { kind, message }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn signed_area(p: &[Point2]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|i| {
            let q = p[(i + 1) % n];
            p[i].x * q.y - q.x * p[i].y
        })
        .sum::<f64>()
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q - p).perp(&(r - p));
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn is_simple(p: &[Point2]) -> bool {
    let n = p.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Generates one of the structured mesh families.
///
/// * square: n×n squares of side 1/n (side 1/n on the L-shape as well)
/// * triangular: each square split along its SW–NE diagonal
/// * octagonal: truncated-square tiling, n octagons per side, with squares at
///   interior grid vertices and triangles along the boundary
/// * hexagonal: offset rows of hexagons, n per row, clipped to the square
pub fn generate_mesh(family: Family, n: usize, domain: Domain) -> Result<PolyMesh> {
    if n == 0 {
        return Err(SwgError::InvalidArgument("mesh resolution n must be >= 1".into()));
    }
    match (family, domain) {
        (Family::Square, _) | (Family::Triangular, _) => grid_mesh(family, n, domain),
        (Family::Octagonal, Domain::UnitSquare) => octagonal_mesh(n),
        (Family::Hexagonal, Domain::UnitSquare) => hexagonal_mesh(n),
        (f, d) => Err(SwgError::UnsupportedMesh {
            family: f.to_string(),
            domain: d.to_string(),
        }),
    }
}

/// Collects vertices keyed by integer lattice coordinates so that shared
/// vertices are merged exactly.
struct LatticeVertices {
    index: HashMap<(i64, i64), usize>,
    points: Vec<Point2>,
}

impl LatticeVertices {
    fn new() -> Self {
        LatticeVertices {
            index: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn get(&mut self, key: (i64, i64), point: impl FnOnce() -> Point2) -> usize {
        let points = &mut self.points;
        *self.index.entry(key).or_insert_with(|| {
            points.push(point());
            points.len() - 1
        })
    }
}

fn grid_mesh(family: Family, n: usize, domain: Domain) -> Result<PolyMesh> {
    let h = 1.0 / n as f64;
    let (origin, cells_per_side) = match domain {
        Domain::UnitSquare => (0.0, n),
        Domain::LShape => (-1.0, 2 * n),
    };
    let m = cells_per_side as i64;
    let mut verts = LatticeVertices::new();
    let mut cells = Vec::new();
    let coord = |i: i64| origin + i as f64 * h;
    for j in 0..m {
        for i in 0..m {
            if domain == Domain::LShape && i >= m / 2 && j < m / 2 {
                continue;
            }
            let mut v = |a: i64, b: i64| verts.get((a, b), || Point2::new(coord(a), coord(b)));
            let sw = v(i, j);
            let se = v(i + 1, j);
            let ne = v(i + 1, j + 1);
            let nw = v(i, j + 1);
            match family {
                Family::Square => cells.push(vec![sw, se, ne, nw]),
                _ => {
                    cells.push(vec![sw, se, ne]);
                    cells.push(vec![sw, ne, nw]);
                }
            }
        }
    }
    PolyMesh::new(verts.points, cells)
}

fn octagonal_mesh(n: usize) -> Result<PolyMesh> {
    // Regular octagon inscribed in a square of side s: corner cut a = s / (2 + √2).
    // Every coordinate is i*s + p*a with p in {-1, 0, 1}, giving an exact lattice key.
    let s = 1.0 / n as f64;
    let a = s / (2.0 + std::f64::consts::SQRT_2);
    let m = n as i64;
    let mut verts = LatticeVertices::new();
    let value = |i: i64, p: i64| {
        if i == m && p == 0 {
            1.0
        } else {
            i as f64 * s + p as f64 * a
        }
    };
    let mut v = |ix: i64, px: i64, iy: i64, py: i64| {
        verts.get((3 * ix + px, 3 * iy + py), || {
            Point2::new(value(ix, px), value(iy, py))
        })
    };
    let mut cells = Vec::new();
    for j in 0..m {
        for i in 0..m {
            cells.push(vec![
                v(i, 1, j, 0),
                v(i + 1, -1, j, 0),
                v(i + 1, 0, j, 1),
                v(i + 1, 0, j + 1, -1),
                v(i + 1, -1, j + 1, 0),
                v(i, 1, j + 1, 0),
                v(i, 0, j + 1, -1),
                v(i, 0, j, 1),
            ]);
        }
    }
    for j in 0..=m {
        for i in 0..=m {
            let left = i == 0;
            let right = i == m;
            let bottom = j == 0;
            let top = j == m;
            let cell = match (left, right, bottom, top) {
                (true, _, true, _) => vec![v(i, 0, j, 0), v(i, 1, j, 0), v(i, 0, j, 1)],
                (_, true, true, _) => vec![v(i, -1, j, 0), v(i, 0, j, 0), v(i, 0, j, 1)],
                (_, true, _, true) => vec![v(i, 0, j, -1), v(i, 0, j, 0), v(i, -1, j, 0)],
                (true, _, _, true) => vec![v(i, 0, j, -1), v(i, 1, j, 0), v(i, 0, j, 0)],
                (_, _, true, _) => vec![v(i, -1, j, 0), v(i, 1, j, 0), v(i, 0, j, 1)],
                (_, _, _, true) => vec![v(i, 0, j, -1), v(i, 1, j, 0), v(i, -1, j, 0)],
                (true, _, _, _) => vec![v(i, 0, j, -1), v(i, 1, j, 0), v(i, 0, j, 1)],
                (_, true, _, _) => vec![v(i, 0, j, -1), v(i, 0, j, 1), v(i, -1, j, 0)],
                _ => vec![v(i, 0, j, -1), v(i, 1, j, 0), v(i, 0, j, 1), v(i, -1, j, 0)],
            };
            cells.push(cell);
        }
    }
    PolyMesh::new(verts.points, cells)
}

fn hexagonal_mesh(n: usize) -> Result<PolyMesh> {
    // Rows of pointy-top hexagons of width w = 1/n and row spacing 1/n, rows
    // offset by w/2. Half-height b = 2/(3n) and side half-height c = 1/(3n),
    // so every vertex (including clipped ones) lies on the lattice
    // (x, y) = (X/(2n), Y/(3n)).
    let m = n as i64;
    let nf = n as f64;
    let mut verts = LatticeVertices::new();
    let mut cells = Vec::new();
    for row in 0..=m {
        let cy = 3 * row;
        let (first, last, offset) = if row % 2 == 0 { (0, m, 0) } else { (0, m - 1, 1) };
        for i in first..=last {
            let cx = 2 * i + offset;
            let hex: [(i64, i64); 6] = [
                (cx, cy - 2),
                (cx + 1, cy - 1),
                (cx + 1, cy + 1),
                (cx, cy + 2),
                (cx - 1, cy + 1),
                (cx - 1, cy - 1),
            ];
            let clipped = clip_to_box(&hex, 2 * m, 3 * m);
            if clipped.len() < 3 {
                continue;
            }
            let cell = clipped
                .into_iter()
                .map(|(x, y)| {
                    verts.get((x, y), || {
                        Point2::new(lattice_coord(x, 2 * m, 2.0 * nf), lattice_coord(y, 3 * m, 3.0 * nf))
                    })
                })
                .collect();
            cells.push(cell);
        }
    }
    PolyMesh::new(verts.points, cells)
}

fn lattice_coord(k: i64, top: i64, denom: f64) -> f64 {
    if k == top {
        1.0
    } else {
        k as f64 / denom
    }
}

/// Clips a convex lattice polygon to [0, xmax] × [0, ymax]. Every clip line
/// used by the hexagonal generator meets polygon edges at lattice points, so
/// the intersection arithmetic stays in integers.
fn clip_to_box(poly: &[(i64, i64)], xmax: i64, ymax: i64) -> Vec<(i64, i64)> {
    type Pt = (i64, i64);
    fn clip(poly: Vec<Pt>, inside: impl Fn(Pt) -> bool, cut: impl Fn(Pt, Pt) -> Pt) -> Vec<Pt> {
        let mut out = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let p = poly[k];
            let q = poly[(k + 1) % poly.len()];
            match (inside(p), inside(q)) {
                (true, true) => out.push(q),
                (true, false) => out.push(cut(p, q)),
                (false, true) => {
                    out.push(cut(p, q));
                    out.push(q);
                }
                (false, false) => {}
            }
        }
        out.dedup();
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        out
    }
    let at_x = |x0: i64| {
        move |p: Pt, q: Pt| {
            let t_num = x0 - p.0;
            let den = q.0 - p.0;
            debug_assert_eq!((t_num * (q.1 - p.1)) % den, 0);
            (x0, p.1 + t_num * (q.1 - p.1) / den)
        }
    };
    let at_y = |y0: i64| {
        move |p: Pt, q: Pt| {
            let t_num = y0 - p.1;
            let den = q.1 - p.1;
            debug_assert_eq!((t_num * (q.0 - p.0)) % den, 0);
            (p.0 + t_num * (q.0 - p.0) / den, y0)
        }
    };
    let mut out = poly.to_vec();
    out = clip(out, |p| p.0 >= 0, at_x(0));
    out = clip(out, |p| p.0 <= xmax, at_x(xmax));
    out = clip(out, |p| p.1 >= 0, at_y(0));
    out = clip(out, |p| p.1 <= ymax, at_y(ymax));
    out
}
