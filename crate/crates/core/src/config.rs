//! TOML run configuration. Keys mirror the command-line flags:
//!
//! ```toml
//! case = 3
//! kappa = 4.0
//! mesh.family = "square"
//! mesh.domain = "unit_square"
//! mesh.n = [8, 16, 32]
//! solver.method = "auto"
//! solver.tol = 1e-12
//! quad.cell_degree = 5
//! norm.mode = "square_paper"
//! output.format = "md"
//! output.path = "table.md"
//! stab.local_h = false
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cases::CaseId;
use crate::error::{Result, SwgError};
use crate::harness::RunConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub case: Option<u8>,
    pub kappa: Option<f64>,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub quad: QuadSection,
    #[serde(default)]
    pub norm: NormSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub stab: StabSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Sizes {
    One(usize),
    Many(Vec<usize>),
}

impl Sizes {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Sizes::One(n) => vec![*n],
            Sizes::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub family: Option<String>,
    pub domain: Option<String>,
    pub n: Option<Sizes>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub maxit: Option<usize>,
    pub restart: Option<usize>,
    pub direct_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub cell_degree: Option<usize>,
    pub edge_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSection {
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabSection {
    pub local_h: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SwgError::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SwgError::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overwrites the fields of `cfg` that the file sets. The output format
    /// string is returned rather than applied since its meaning depends on
    /// the subcommand.
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<Option<String>> {
        if let Some(c) = self.case {
            cfg.case = CaseId(c);
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(f) = &self.mesh.family {
            cfg.family = f.parse()?;
        }
        if let Some(d) = &self.mesh.domain {
            cfg.domain = d.parse()?;
        }
        if let Some(n) = &self.mesh.n {
            cfg.ns = n.to_vec();
        }
        if let Some(m) = &self.solver.method {
            cfg.solver.method = m.parse()?;
        }
        if let Some(t) = self.solver.tol {
            cfg.solver.tol = t;
        }
        if let Some(m) = self.solver.maxit {
            cfg.solver.maxit = m;
        }
        if let Some(r) = self.solver.restart {
            cfg.solver.restart = r;
        }
        if let Some(d) = self.solver.direct_limit {
            cfg.solver.direct_limit = d;
        }
        if let Some(d) = self.quad.cell_degree {
            cfg.quad.cell_degree = d;
        }
        if let Some(p) = self.quad.edge_points {
            cfg.quad.edge_points = p;
        }
        if let Some(m) = &self.norm.mode {
            cfg.norm = Some(m.parse()?);
        }
        if let Some(p) = &self.output.path {
            cfg.out = Some(p.clone());
        }
        if let Some(l) = self.stab.local_h {
            cfg.local_h = l;
        }
        Ok(self.output.format.clone())
    }
}
