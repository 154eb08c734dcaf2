//! `inbox`: largest inscribed boxes and rectangles in convex sets.
//!
//! Reads a set description (JSON, see the README), runs one solver, checker
//! or oracle and prints a JSON run record on stdout. Exit codes: 0 success,
//! 1 a check found a violation, 2 bad input, 3 solver failure.

mod output;
mod svg;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use inbox_core::barrier::{Mu, SolverConfig, SolverReport, Termination};
use inbox_core::convexset::parse_set;
use inbox_core::geomcheck::{self, ConditionVerdict};
use inbox_core::mair2d::{self, Rectangle2D};
use inbox_core::oracle::{self, GridSpec};
use inbox_core::{mvair, ConvexSet, Error};
use nalgebra::Vector2;
use serde_json::{json, Value};

use output::RunResult;

#[derive(Debug, Parser)]
#[command(name = "inbox", version, about = "Largest inscribed boxes and rectangles in convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Duality-gap target for single solves; approximation factor for `mair`.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Duality-gap target for each direction solved by `mair`.
    #[arg(long, global = true, default_value_t = 1e-8)]
    solver_eps: f64,

    /// Initial barrier parameter.
    #[arg(long, global = true)]
    tau0: Option<f64>,

    /// Barrier increment factor, a number above 1 or `auto`.
    #[arg(long, global = true)]
    mu: Option<String>,

    /// Write a figure of the set and the result (planar sets only).
    #[arg(long, global = true)]
    svg: Option<PathBuf>,

    /// Worker threads for direction sweeps; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Seed for Monte-Carlo estimates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Log solver progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximum-volume axis-aligned box.
    Mvair { input: PathBuf },
    /// Approximately maximum-area rectangle over all directions.
    Mair {
        input: PathBuf,
        /// Also tabulate f(t) at this many directions.
        #[arg(long)]
        profile: Option<usize>,
        /// Solve a single direction t = tan(theta) instead of sweeping.
        #[arg(long, allow_hyphen_values = true)]
        direction: Option<f64>,
    },
    /// Maximum-area rectangle with a fixed direction t = tan(theta).
    Maair {
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        direction: f64,
    },
    /// Largest rectangle area f(t) at evenly spaced t in [-1, 1].
    Profile {
        input: PathBuf,
        /// Number of directions.
        #[arg(long, visible_alias = "profile", default_value_t = 101)]
        samples: usize,
    },
    /// Check a rectangle against the necessary optimality conditions.
    Check {
        input: PathBuf,
        /// Rectangle JSON `{"x", "u", "v"}`, or the output of `mair`/`maair`.
        rect: PathBuf,
        /// Axis of symmetry as `PX PY DX DY`.
        #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["PX", "PY", "DX", "DY"])]
        axis: Option<Vec<f64>>,
        /// Center of symmetry as `CX CY`.
        #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["CX", "CY"])]
        center: Option<Vec<f64>>,
        /// Geometric tolerance; defaults to 1e-3 times the set's scale.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Brute-force grid rectangle and Monte-Carlo area.
    Oracle {
        input: PathBuf,
        /// Search one direction instead of all.
        #[arg(long, allow_hyphen_values = true)]
        direction: Option<f64>,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value_t = 33)]
        angle_steps: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

/// A failed run and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            // Unbounded or empty sets are defects of the input, not of the solver.
            Error::Input(_) | Error::Validation(_) | Error::Unbounded(_) | Error::EmptyInterior(_) => 2,
            _ => 3,
        };
        Self { code, message: e.to_string() }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: 2, message }
}

struct Outcome {
    run: RunResult,
    code: u8,
}

struct Timer {
    start: Instant,
    phases: BTreeMap<String, f64>,
}

impl Timer {
    fn new() -> Self {
        Self { start: Instant::now(), phases: BTreeMap::new() }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.phases.insert(format!("{name}_ms"), (now - self.start).as_secs_f64() * 1e3);
        self.start = now;
    }
}

fn load_set(path: &Path) -> Result<ConvexSet, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    parse_set(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn solver_config(cli: &Cli, eps: Option<f64>) -> Result<SolverConfig, Failure> {
    let mut cfg = SolverConfig::default();
    if let Some(e) = eps {
        cfg.eps = e;
    }
    if let Some(t) = cli.tau0 {
        cfg.tau0 = t;
    }
    if let Some(m) = &cli.mu {
        cfg.mu = if m.eq_ignore_ascii_case("auto") {
            Mu::Auto
        } else {
            Mu::Fixed(m.parse().map_err(|_| input_error(format!("--mu must be a number or `auto`, got `{m}`")))?)
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_value(r: &SolverReport) -> Value {
    serde_json::to_value(r).expect("report serializes")
}

fn area_fields(result: &mut Value, set: &ConvexSet, measure: f64) {
    if let Some(a) = set.planar_area() {
        result["set_area"] = json!(a);
        result["ratio"] = json!(measure / a);
    }
}

fn write_figure(cli: &Cli, set: &ConvexSet, shape: &[[f64; 2]]) -> Result<(), Failure> {
    let Some(path) = &cli.svg else { return Ok(()) };
    if set.dim() != 2 {
        return Err(input_error("--svg needs a planar set".into()));
    }
    let text = svg::scene(set, shape)?;
    std::fs::write(path, text).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn write_profile_figure(cli: &Cli, samples: &[(f64, f64)]) -> Result<(), Failure> {
    let Some(path) = &cli.svg else { return Ok(()) };
    let mut name = path.as_os_str().to_owned();
    name.push(".profile.svg");
    let path = PathBuf::from(name);
    std::fs::write(&path, svg::profile_plot(samples))
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn rect_corners(r: &Rectangle2D) -> Vec<[f64; 2]> {
    r.corners().iter().map(|c| [c.x, c.y]).collect()
}

fn exit_for(report: &SolverReport) -> u8 {
    if report.termination == Termination::Converged {
        0
    } else {
        3
    }
}

fn run(cli: &Cli, argv: Vec<String>) -> Result<Outcome, Failure> {
    let mut timer = Timer::new();
    let input = match &cli.command {
        Command::Mvair { input }
        | Command::Mair { input, .. }
        | Command::Maair { input, .. }
        | Command::Profile { input, .. }
        | Command::Check { input, .. }
        | Command::Oracle { input, .. } => input,
    };
    let set = load_set(input)?;
    let digest = output::digest(&set);
    timer.lap("parse");

    let (result, report, code) = match &cli.command {
        Command::Mvair { .. } => {
            let cfg = solver_config(cli, cli.eps)?;
            let (b, report) = mvair::solve_mvair(&set, &cfg)?;
            timer.lap("solve");
            let volume = b.volume();
            let mut result = json!({ "box": b, "volume": volume });
            area_fields(&mut result, &set, volume);
            if set.dim() == 2 {
                let shape = [[b.xl[0], b.xl[1]], [b.xu[0], b.xl[1]], [b.xu[0], b.xu[1]], [b.xl[0], b.xu[1]]];
                write_figure(cli, &set, &shape)?;
            }
            (result, report_value(&report), exit_for(&report))
        }
        Command::Maair { direction, .. } | Command::Mair { direction: Some(direction), .. } => {
            let cfg = solver_config(cli, cli.eps)?;
            let s = mair2d::maair_direction(&set, *direction, &cfg)?;
            timer.lap("solve");
            let mut result = json!({ "rectangle": s.rect, "area": s.area, "t": s.t, "theta": s.theta });
            area_fields(&mut result, &set, s.area);
            write_figure(cli, &set, &rect_corners(&s.rect))?;
            (result, report_value(&s.report), exit_for(&s.report))
        }
        Command::Mair { profile, direction: None, .. } => {
            let cfg = solver_config(cli, Some(cli.solver_eps))?;
            let eps = cli.eps.unwrap_or(0.01);
            let sweep = mair2d::mair_sweep_with(&set, eps, &cfg, cli.threads)?;
            timer.lap("sweep");
            let best = sweep.best_sample();
            let mut result = json!({
                "rectangle": best.rect,
                "area": best.area,
                "t": best.t,
                "theta": best.theta,
                "eps": eps,
                "rho_bar": sweep.rho_bar,
                "directions": sweep.samples.len(),
                "best_index": sweep.best_index,
            });
            area_fields(&mut result, &set, best.area);
            write_figure(cli, &set, &rect_corners(&best.rect))?;
            if let Some(k) = profile {
                let table = mair2d::f_profile_samples(&set, *k, &cfg, cli.threads)?;
                timer.lap("profile");
                let pts: Vec<(f64, f64)> = table.iter().map(|s| (s.t, s.area)).collect();
                result["profile"] = json!(pts);
                write_profile_figure(cli, &pts)?;
            }
            let code = if sweep.samples.iter().all(|s| s.report.termination == Termination::Converged) { 0 } else { 3 };
            (result, report_value(&best.report), code)
        }
        Command::Profile { samples, .. } => {
            let cfg = solver_config(cli, cli.eps)?;
            let table = mair2d::f_profile_samples(&set, *samples, &cfg, cli.threads)?;
            timer.lap("profile");
            let pts: Vec<(f64, f64)> = table.iter().map(|s| (s.t, s.area)).collect();
            write_profile_figure(cli, &pts)?;
            let code = if table.iter().all(|s| s.report.termination == Termination::Converged) { 0 } else { 3 };
            (json!({ "profile": pts }), Value::Null, code)
        }
        Command::Check { rect, axis, center, tol, .. } => {
            let r = load_rectangle(rect)?;
            let tol = match tol {
                Some(t) => *t,
                None => 1e-3 * set.scale()?,
            };
            let (result, violated) = check(&set, &r, axis.as_deref(), center.as_deref(), tol)?;
            timer.lap("check");
            write_figure(cli, &set, &rect_corners(&r))?;
            (result, Value::Null, u8::from(violated))
        }
        Command::Oracle { direction, steps, angle_steps, samples, .. } => {
            let grid = GridSpec { anchor_steps: *steps, size_steps: *steps, angle_steps: *angle_steps };
            let (area, r) = match direction {
                Some(t) => oracle::brute_maair(&set, *t, &grid)?,
                None => oracle::brute_mair(&set, &grid)?,
            };
            timer.lap("grid");
            let (mc, se) = oracle::monte_carlo_area(&set, *samples, cli.seed)?;
            timer.lap("monte_carlo");
            write_figure(cli, &set, &rect_corners(&r))?;
            let result = json!({
                "grid": { "area": area, "rectangle": r, "spec": grid },
                "monte_carlo": { "area": mc, "stderr": se, "samples": samples, "seed": cli.seed },
            });
            (result, Value::Null, 0)
        }
    };
    Ok(Outcome { run: RunResult { input_digest: digest, command: argv, result, report, timings: timer.phases }, code })
}

fn load_rectangle(path: &Path) -> Result<Rectangle2D, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let inner = v.get("result").and_then(|r| r.get("rectangle")).cloned().unwrap_or(v);
    let r: Rectangle2D =
        serde_json::from_value(inner).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(Rectangle2D::new(r.x, r.u, r.v)?)
}

fn check(
    set: &ConvexSet,
    r: &Rectangle2D,
    axis: Option<&[f64]>,
    center: Option<&[f64]>,
    tol: f64,
) -> Result<(Value, bool), Failure> {
    let mut violated = false;
    let mut out = json!({ "tol": tol, "max_corner_residual": r.max_residual_in(set)? });
    match set.polygon() {
        Some(poly) => {
            let v = geomcheck::check_polygon_optimality(poly, r, tol);
            violated |= v.is_violation();
            out["optimality"] = serde_json::to_value(&v).expect("verdict serializes");
        }
        None => {
            out["optimality"] = Value::Null;
            out["note"] = json!("corner classification needs a polygon set");
        }
    }
    if let Some(c) = center {
        let c = Vector2::new(c[0], c[1]);
        let pass = geomcheck::check_central_symmetry(&c, r, tol);
        violated |= !pass;
        out["central_symmetry"] = json!({ "pass": pass, "offset": geomcheck::central_offset(&c, r) });
    }
    if let Some(a) = axis {
        let verdicts: Vec<ConditionVerdict> =
            geomcheck::check_axial_symmetry(&Vector2::new(a[0], a[1]), &Vector2::new(a[2], a[3]), set, r, tol)?;
        violated |= verdicts.iter().any(|c| !c.pass);
        out["axial_symmetry"] = serde_json::to_value(&verdicts).expect("verdicts serialize");
    }
    Ok((out, violated))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(&cli, argv) {
        Ok(o) => {
            // A closed pipe (`inbox ... | head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{}", o.run.to_json());
            ExitCode::from(o.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
