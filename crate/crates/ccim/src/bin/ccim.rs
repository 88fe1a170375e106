//! Command-line harness around the ccim library: convergence sweeps, single
//! solves, interface evolution, molecular runs, and matrix dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ccim::config::RunConfig;
use ccim::evolve::{run_expanding_sphere, write_radii_csv, write_series_csv, EvolveOptions};
use ccim::levelset::{catalog, Surface};
use ccim::postproc::{error_report, fit_slope, write_csv, ConvergenceRow};
use ccim::problems::{molecule_problem, preset, Problem};
use ccim::sparse::write_matrix_market;
use ccim::system::{assemble, solve_problem, Solution};
use ccim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ccim",
    version,
    about = "Second-order elliptic interface solver on implicit surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared flags. Values are resolved in order: built-in defaults, then the
/// configuration file, then these flags, then --set pairs; later wins.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file with key=value lines (# starts a comment).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem preset: example1, example3, example4, quadratic_oracle, molecule.
    #[arg(long)]
    preset: Option<String>,
    /// Interface surface: sphere, ellipsoid, eight_balls, peanut, donut, banana, popcorn.
    #[arg(long)]
    surface: Option<String>,
    /// Single grid resolution (intervals per axis).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated strictly increasing resolution sweep.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Relative residual target for the linear solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Directory receiving CSV and JSON outputs.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads; 0 keeps the library default.
    #[arg(long)]
    threads: Option<usize>,
    /// 0 quiet, 1 progress lines, 2 chatty.
    #[arg(long)]
    verbosity: Option<u8>,
    /// Extra key=value overrides applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve over a resolution sweep and fit error slopes.
    Converge(Common),
    /// Solve at a single resolution and report errors.
    Solve(Common),
    /// Expanding-sphere interface evolution driven by the gradient jump.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Final time of the evolution.
        #[arg(long)]
        t_final: Option<f64>,
        /// Fraction of the stability bound used for each time step.
        #[arg(long)]
        cfl: Option<f64>,
    },
    /// Solve on a molecular surface loaded from a PQR file.
    Molecule {
        #[command(flatten)]
        common: Common,
        /// PQR file with one ATOM/HETATM record per atom.
        #[arg(long)]
        pqr: Option<PathBuf>,
    },
    /// Assemble at a single resolution and write the system in Matrix Market form.
    DumpMatrix(Common),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge(common) => {
            let cfg = load_config(&common, &[])?;
            cmd_converge(&cfg, "converge")
        }
        Command::Solve(common) => {
            let cfg = load_config(&common, &[])?;
            cmd_solve(&cfg)
        }
        Command::Evolve {
            common,
            t_final,
            cfl,
        } => {
            let mut extra = Vec::new();
            if let Some(t) = t_final {
                extra.push(("t_final".to_string(), t.to_string()));
            }
            if let Some(c) = cfl {
                extra.push(("cfl".to_string(), c.to_string()));
            }
            let cfg = load_config(&common, &extra)?;
            cmd_evolve(&cfg)
        }
        Command::Molecule { common, pqr } => {
            let mut extra = vec![("preset".to_string(), "molecule".to_string())];
            if let Some(p) = pqr {
                extra.push(("pqr".to_string(), p.display().to_string()));
            }
            let cfg = load_config(&common, &extra)?;
            cmd_converge(&cfg, "molecule")
        }
        Command::DumpMatrix(common) => {
            let cfg = load_config(&common, &[])?;
            cmd_dump_matrix(&cfg)
        }
    }
}

/// Resolves the configuration: defaults, file, subcommand presets, dedicated
/// flags, then --set pairs.
fn load_config(common: &Common, extra: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for (k, v) in extra {
        cfg.apply(k, v)?;
    }
    if let Some(v) = &common.preset {
        cfg.apply("preset", v)?;
    }
    if let Some(v) = &common.surface {
        cfg.apply("surface", v)?;
    }
    if let Some(v) = common.n {
        cfg.apply("n", &v.to_string())?;
    }
    if let Some(ns) = &common.ns {
        let joined = ns
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        cfg.apply("ns", &joined)?;
    }
    if let Some(v) = common.tol {
        cfg.apply("tol", &v.to_string())?;
    }
    if let Some(v) = &common.output_dir {
        cfg.apply("output_dir", &v.display().to_string())?;
    }
    if let Some(v) = common.threads {
        cfg.apply("threads", &v.to_string())?;
    }
    if let Some(v) = common.verbosity {
        cfg.apply("verbosity", &v.to_string())?;
    }
    for kv in &common.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Error::Config(format!(
                "--set expects key=value, got `{kv}`"
            )));
        };
        cfg.apply(k.trim(), v)?;
    }
    cfg.validate()?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool setup failed: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg)
}

fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    if cfg.preset == "molecule" {
        let path = cfg
            .pqr
            .as_ref()
            .ok_or_else(|| Error::Config("molecule preset needs a pqr=<path> entry".into()))?;
        molecule_problem(path, cfg.molecule_c, cfg.molecule_eta, cfg.molecule_margin)
    } else {
        let surface: Arc<dyn Surface> =
            Arc::from(catalog::by_name(&cfg.surface, cfg.sphere_radius)?);
        preset(&cfg.preset, surface)
    }
}

fn write_summary(cfg: &RunConfig, summary: &serde_json::Value) -> Result<()> {
    let path = cfg.output_dir.join("summary.json");
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, summary)
        .map_err(|e| Error::Config(format!("summary serialization failed: {e}")))?;
    writeln!(f)?;
    println!("{}", serde_json::to_string_pretty(summary).unwrap());
    Ok(())
}

fn solve_one(cfg: &RunConfig, n: usize) -> Result<(Solution, ConvergenceRow, serde_json::Value)> {
    let problem = build_problem(cfg)?;
    let sol =
        solve_problem(&problem, n, cfg.tol, cfg.max_iter).map_err(|e| annotate_n(n, e))?;
    if !sol.report.converged {
        return Err(annotate_n(
            n,
            Error::Solver(format!(
                "solver stopped at relative residual {:.3e}",
                sol.report.residual
            )),
        ));
    }
    let report = error_report(&problem, &sol);
    let row = ConvergenceRow {
        n,
        h: sol.assembly.grid.h,
        err_u_inf: report.err_u_inf,
        err_grad_inf: report.err_grad_inf,
        iterations: sol.report.iterations,
        assemble_seconds: sol.assembly.assemble_seconds,
        solve_seconds: sol.report.seconds,
    };
    let detail = json!({
        "n": n,
        "h": sol.assembly.grid.h,
        "err_u_inf": report.err_u_inf,
        "err_grad_inf": report.err_grad_inf,
        "iterations": sol.report.iterations,
        "residual": sol.report.residual,
        "interface_points": sol.assembly.interface.len(),
        "scheme_counts": sol.assembly.scheme_counts,
        "assemble_seconds": sol.assembly.assemble_seconds,
        "solve_seconds": sol.report.seconds,
    });
    if cfg.verbosity >= 1 {
        eprintln!(
            "N={n}: err_u={:.3e} err_grad={:.3e} iters={} assemble={:.2}s solve={:.2}s",
            report.err_u_inf,
            report.err_grad_inf,
            sol.report.iterations,
            sol.assembly.assemble_seconds,
            sol.report.seconds
        );
    }
    Ok((sol, row, detail))
}

fn annotate_n(n: usize, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("N = {n}: {msg}")),
        other => Error::Solver(format!("N = {n}: {other}")),
    }
}

fn cmd_converge(cfg: &RunConfig, command: &str) -> Result<()> {
    let t0 = Instant::now();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &n in &cfg.ns {
        let (_sol, row, detail) = solve_one(cfg, n)?;
        rows.push(row);
        details.push(detail);
    }
    let csv_path = cfg.output_dir.join("convergence.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    write_csv(&rows, &mut csv)?;

    let u_points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.err_u_inf)).collect();
    let g_points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.err_grad_inf)).collect();
    let slope_u = fit_slope(&u_points).ok();
    let slope_grad = fit_slope(&g_points).ok();

    let summary = json!({
        "command": command,
        "config": cfg,
        "runs": details,
        "slope_u": slope_u,
        "slope_grad": slope_grad,
        "csv": csv_path,
        "total_seconds": t0.elapsed().as_secs_f64(),
    });
    write_summary(cfg, &summary)
}

fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let n = *cfg.ns.last().expect("validated nonempty sweep");
    let (_sol, row, detail) = solve_one(cfg, n)?;
    let csv_path = cfg.output_dir.join("convergence.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    write_csv(&[row], &mut csv)?;
    let summary = json!({
        "command": "solve",
        "config": cfg,
        "runs": [detail],
        "csv": csv_path,
        "total_seconds": t0.elapsed().as_secs_f64(),
    });
    write_summary(cfg, &summary)
}

fn cmd_evolve(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let n = *cfg.ns.last().expect("validated nonempty sweep");
    let opts = EvolveOptions {
        cfl: cfg.cfl,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        reinit_every: cfg.reinit_every,
    };
    let report = run_expanding_sphere(n, cfg.t_final, &opts)?;
    if cfg.verbosity >= 2 {
        for s in &report.steps {
            eprintln!(
                "step {}: t={:.5} dt={:.2e} radius [{:.5}, {:.5}]",
                s.step, s.t, s.dt, s.min_radius, s.max_radius
            );
        }
    }
    if cfg.verbosity >= 1 {
        eprintln!(
            "N={n}: {} steps, mean radius {:.6} vs reference {:.6}, rmse {:.3e}",
            report.steps.len(),
            report.mean_radius,
            report.reference,
            report.rmse
        );
    }
    let series_path = cfg.output_dir.join("evolution.csv");
    let mut series = BufWriter::new(File::create(&series_path)?);
    write_series_csv(&mut series, &report.steps)?;
    let radii_path = cfg.output_dir.join("radii.csv");
    let mut radii = BufWriter::new(File::create(&radii_path)?);
    write_radii_csv(&mut radii, &report.radii)?;

    let summary = json!({
        "command": "evolve",
        "config": cfg,
        "n": n,
        "t_final": cfg.t_final,
        "steps": report.steps.len(),
        "reference_radius": report.reference,
        "mean_radius": report.mean_radius,
        "min_radius": report.min_radius,
        "max_radius": report.max_radius,
        "rmse": report.rmse,
        "max_err": report.max_err,
        "series_csv": series_path,
        "radii_csv": radii_path,
        "total_seconds": t0.elapsed().as_secs_f64(),
    });
    write_summary(cfg, &summary)
}

fn cmd_dump_matrix(cfg: &RunConfig) -> Result<()> {
    let t0 = Instant::now();
    let n = *cfg.ns.last().expect("validated nonempty sweep");
    let problem = build_problem(cfg)?;
    let assembly = assemble(&problem, n).map_err(|e| annotate_n(n, e))?;
    let matrix_path = cfg.output_dir.join("matrix.mtx");
    let mut mtx = BufWriter::new(File::create(&matrix_path)?);
    write_matrix_market(&assembly.matrix, &mut mtx)?;
    let rhs_path = cfg.output_dir.join("rhs.txt");
    let mut rhs = BufWriter::new(File::create(&rhs_path)?);
    for v in &assembly.rhs {
        writeln!(rhs, "{v:.16e}")?;
    }
    let summary = json!({
        "command": "dump-matrix",
        "config": cfg,
        "n": n,
        "rows": assembly.matrix.n(),
        "nnz": assembly.matrix.nnz(),
        "interface_points": assembly.interface.len(),
        "scheme_counts": assembly.scheme_counts,
        "matrix": matrix_path,
        "rhs": rhs_path,
        "assemble_seconds": assembly.assemble_seconds,
        "total_seconds": t0.elapsed().as_secs_f64(),
    });
    write_summary(cfg, &summary)
}
