use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swg::cases::CaseId;
use swg::config::ConfigFile;
use swg::harness::{run_convergence, solve_level, verify_suite, RunConfig, Suite, TableFormat};
use swg::mesh::{generate_mesh, Domain, Family};
use swg::postprocess::{export_solution, ExportFormat, NormMode};
use swg::sparse::SolverMethod;
use swg::SwgError;

#[derive(Parser)]
#[command(name = "swg", version, about = "Simplified weak Galerkin solver for convection-diffusion-reaction problems")]
struct Cli {
    /// TOML file with run settings; flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh and write it in the plain-text mesh format
    Mesh {
        #[arg(long = "mesh", value_name = "FAMILY")]
        family: Option<Family>,
        #[arg(long)]
        domain: Option<Domain>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Solve one test case on one mesh and print its error report
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Export format for --out: csv or vtk (default from the file extension)
        #[arg(long)]
        format: Option<String>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run a convergence study and print the error table
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        /// md or csv
        #[arg(long)]
        format: Option<String>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Recompute the embedded reference tables and compare
    Verify {
        /// square, kappa, polygon, lshape or all
        #[arg(long, default_value = "square")]
        suite: Suite,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        n: Vec<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    case: Option<u8>,
    #[arg(long = "mesh", value_name = "FAMILY")]
    family: Option<Family>,
    #[arg(long)]
    domain: Option<Domain>,
    /// Mesh sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    kappa: Option<f64>,
    /// auto, direct_lu, bicgstab or gmres
    #[arg(long)]
    solver: Option<SolverMethod>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    /// square_paper or general (default: square_paper on uniform square meshes)
    #[arg(long)]
    norm: Option<NormMode>,
    /// Cell diameter instead of the global mesh size in the stabilizer
    #[arg(long)]
    local_h: bool,
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(c) = self.case {
            cfg.case = CaseId(c);
        }
        if let Some(f) = self.family {
            cfg.family = f;
        }
        if let Some(d) = self.domain {
            cfg.domain = d;
        }
        if let Some(n) = &self.n {
            cfg.ns = n.clone();
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(m) = self.solver {
            cfg.solver.method = m;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(m) = self.maxit {
            cfg.solver.maxit = m;
        }
        if let Some(m) = self.norm {
            cfg.norm = Some(m);
        }
        if self.local_h {
            cfg.local_h = true;
        }
    }
}

/// Failures caused by the invocation itself exit with 2, the rest with 1.
fn is_usage_error(e: &SwgError) -> bool {
    matches!(
        e,
        SwgError::InvalidArgument(_) | SwgError::Parse(_) | SwgError::UnsupportedMesh { .. }
    )
}

fn base_config(path: Option<&Path>) -> swg::Result<(RunConfig, Option<String>)> {
    let mut cfg = RunConfig::default();
    let mut format = None;
    if let Some(p) = path {
        format = ConfigFile::load(p)?.apply(&mut cfg)?;
    }
    Ok((cfg, format))
}

fn write_output(out: Option<&Path>, text: &str) -> swg::Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> swg::Result<bool> {
    let (mut cfg, file_format) = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Mesh { family, domain, n, out } => {
            let family = family.unwrap_or(cfg.family);
            let domain = domain.unwrap_or(cfg.domain);
            let n = n.unwrap_or(cfg.ns[0]);
            let mesh = generate_mesh(family, n, domain)?;
            let issues = mesh.validate();
            eprintln!(
                "{family} mesh on {domain}, n = {n}: {} vertices, {} cells, {} edges ({} on the boundary), h = {:.6}",
                mesh.vertices.len(),
                mesh.num_cells(),
                mesh.num_edges(),
                mesh.num_boundary_edges(),
                mesh.h
            );
            for d in &issues {
                eprintln!("{d}");
            }
            let mut buf = Vec::new();
            mesh.write_text(&mut buf)?;
            write_output(out.as_deref(), &String::from_utf8_lossy(&buf))?;
            Ok(issues.is_empty())
        }
        Command::Solve { run, format, out } => {
            run.apply(&mut cfg);
            let out = out.or(cfg.out.clone());
            cfg.validate()?;
            if cfg.ns.len() != 1 {
                return Err(SwgError::InvalidArgument(format!("solve takes one mesh size, got {:?}", cfg.ns)));
            }
            let format = match format.or(file_format) {
                Some(f) => Some(f.parse::<ExportFormat>()?),
                None => None,
            };
            let s = solve_level(&cfg, cfg.ns[0])?;
            let r = &s.report;
            println!("case {} {} mesh on {}, n = {}, kappa = {}", cfg.case.0, cfg.family, cfg.domain, r.n, cfg.kappa);
            println!("unknowns          {}", s.mesh.num_edges() - s.mesh.num_boundary_edges());
            println!("solver            {} ({} iterations, residual {:.2e})", r.solver.method, r.solver.iterations, r.solver.residual);
            println!("discrete L2 ({})  {:.6e}", s.norm, r.err_discrete_l2);
            println!("discrete H1 ({})  {:.6e}", s.norm, r.err_discrete_h1);
            println!("L2 of s(u_b)      {:.6e}", r.err_l2_recon);
            println!("weak gradient H1  {:.6e}", r.err_wg_h1);
            println!("energy norm       {:.6e}", r.energy_norm);
            if let Some(path) = out {
                let fmt = format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
                    Some("vtk") => ExportFormat::VtkLegacy,
                    _ => ExportFormat::Csv,
                });
                export_solution(&s.mesh, &s.recon, fmt, &path)?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Convergence { run, format, out } => {
            run.apply(&mut cfg);
            if let Some(f) = format.or(file_format) {
                cfg.format = f.parse::<TableFormat>()?;
            }
            if let Some(o) = out {
                cfg.out = Some(o);
            }
            let table = run_convergence(&cfg)?;
            write_output(cfg.out.as_deref(), &table.render(cfg.format)?)?;
            Ok(true)
        }
        Command::Verify { suite, n } => {
            let results = verify_suite(suite, &n, &cfg)?;
            let mut all = true;
            for cmp in &results {
                println!("{} {}", if cmp.passed() { "PASS" } else { "FAIL" }, cmp.key);
                for c in &cmp.checks {
                    println!("    {c}");
                }
                all &= cmp.passed();
            }
            let failed = results.iter().filter(|c| !c.passed()).count();
            println!("{} of {} reference blocks reproduced", results.len() - failed, results.len());
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_usage_error(&e) => {
            eprintln!("error: {e}");
            eprintln!("run `swg --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
