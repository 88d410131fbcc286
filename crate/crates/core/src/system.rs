//! Edge degrees of freedom, global assembly with Dirichlet elimination, and
//! the linear solve.

use crate::element::{element_system, ElementBlocks, ProblemSpec, ScalarFn};
use crate::error::{Result, SwgError};
use crate::localops::GeomMatrices;
use crate::mesh::PolyMesh;
use crate::quadrature::{CellQuadRule, EdgeQuadRule, QuadOptions, TriangleRule};
use crate::sparse::{self, CsrMatrix, SolveOptions, SolveStats};

/// Numbering of edges: interior edges first, then boundary edges, each in
/// edge creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub dof_of_edge: Vec<usize>,
    pub edge_of_dof: Vec<usize>,
    pub n_int: usize,
    pub n_bnd: usize,
}

impl DofMap {
    pub fn new(mesh: &PolyMesh) -> Self {
        let ne = mesh.num_edges();
        let mut edge_of_dof: Vec<usize> = (0..ne).filter(|&e| !mesh.boundary[e]).collect();
        let n_int = edge_of_dof.len();
        edge_of_dof.extend((0..ne).filter(|&e| mesh.boundary[e]));
        let mut dof_of_edge = vec![0; ne];
        for (d, &e) in edge_of_dof.iter().enumerate() {
            dof_of_edge[e] = d;
        }
        DofMap {
            dof_of_edge,
            edge_of_dof,
            n_int,
            n_bnd: ne - n_int,
        }
    }

    pub fn is_interior(&self, edge: usize) -> bool {
        self.dof_of_edge[edge] < self.n_int
    }
}

pub fn number_dofs(mesh: &PolyMesh) -> DofMap {
    DofMap::new(mesh)
}

/// Edge averages (1/|e|)∫_e g of `g` over every boundary edge; interior
/// entries are zero.
pub fn dirichlet_values(mesh: &PolyMesh, g: &ScalarFn, edge_points: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mesh.num_edges()];
    for e in 0..mesh.num_edges() {
        if mesh.boundary[e] {
            out[e] = edge_average(mesh, e, g, edge_points)?;
        }
    }
    Ok(out)
}

/// (1/|e|)∫_e g ds.
pub fn edge_average(mesh: &PolyMesh, edge: usize, g: &ScalarFn, edge_points: usize) -> Result<f64> {
    let e = &mesh.edges[edge];
    let rule = EdgeQuadRule::new(mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]], edge_points)?;
    Ok(rule.integrate(|p| g(p)) / e.length)
}

/// Q_b u on every edge.
pub fn project_edges(mesh: &PolyMesh, u: &ScalarFn, edge_points: usize) -> Result<Vec<f64>> {
    (0..mesh.num_edges())
        .map(|e| edge_average(mesh, e, u, edge_points))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub kappa: f64,
    pub quad: QuadOptions,
    /// Scale the stabilizer by the cell diameter instead of the global h.
    pub local_h: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            kappa: 4.0,
            quad: QuadOptions::default(),
            local_h: false,
        }
    }
}

/// Reduced system over interior edges.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub symmetric: bool,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub system: SparseSystem,
    pub dofmap: DofMap,
    /// Q_b g on boundary edges, zero elsewhere (indexed by edge).
    pub boundary_values: Vec<f64>,
}

pub fn assemble(mesh: &PolyMesh, problem: &ProblemSpec, opts: &AssemblyOptions) -> Result<Assembled> {
    if !(opts.kappa > 0.0) {
        return Err(SwgError::InvalidArgument(format!(
            "stabilization parameter must be positive, got {}",
            opts.kappa
        )));
    }
    let dofmap = DofMap::new(mesh);
    let bvals = dirichlet_values(mesh, &problem.g, opts.quad.edge_points)?;
    let n = dofmap.n_int;
    let tri = TriangleRule::with_degree(opts.quad.cell_degree)?;
    let mut triplets = Vec::with_capacity(mesh.num_cells() * 25);
    let mut rhs = vec![0.0; n];
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell)?;
        let gm = GeomMatrices::new(&geo).map_err(|e| SwgError::DegenerateCell {
            cell,
            reason: e.to_string(),
        })?;
        let rule = CellQuadRule::from_rule(&geo, &tri)?;
        let blocks = ElementBlocks::compute(&geo, &gm, problem, &rule);
        let h = if opts.local_h { geo.diameter } else { mesh.h };
        let (k, f) = element_system(&blocks, opts.kappa, h)?;
        let edges: Vec<usize> = mesh.cell_edge_ids(cell).collect();
        for (i, &ei) in edges.iter().enumerate() {
            if !dofmap.is_interior(ei) {
                continue;
            }
            let row = dofmap.dof_of_edge[ei];
            rhs[row] += f[i];
            for (j, &ej) in edges.iter().enumerate() {
                if dofmap.is_interior(ej) {
                    triplets.push((row, dofmap.dof_of_edge[ej], k[(i, j)]));
                } else {
                    rhs[row] -= k[(i, j)] * bvals[ej];
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, n, &triplets);
    let symmetric = matrix.asymmetry() <= 1e-12;
    Ok(Assembled {
        system: SparseSystem { matrix, rhs, symmetric },
        dofmap,
        boundary_values: bvals,
    })
}

pub fn solve(sys: &SparseSystem, opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    sparse::solve(&sys.matrix, &sys.rhs, opts)
}

/// Full edge field from interior values and boundary data.
pub fn merge_solution(dofmap: &DofMap, interior: &[f64], boundary_values: &[f64]) -> Result<Vec<f64>> {
    if interior.len() != dofmap.n_int {
        return Err(SwgError::SizeMismatch {
            expected: dofmap.n_int,
            actual: interior.len(),
        });
    }
    let ne = dofmap.dof_of_edge.len();
    if boundary_values.len() != ne {
        return Err(SwgError::SizeMismatch {
            expected: ne,
            actual: boundary_values.len(),
        });
    }
    Ok((0..ne)
        .map(|e| {
            let d = dofmap.dof_of_edge[e];
            if d < dofmap.n_int {
                interior[d]
            } else {
                boundary_values[e]
            }
        })
        .collect())
}

/// Interior restriction of an edge field.
pub fn interior_part(dofmap: &DofMap, field: &[f64]) -> Vec<f64> {
    dofmap.edge_of_dof[..dofmap.n_int].iter().map(|&e| field[e]).collect()
}
