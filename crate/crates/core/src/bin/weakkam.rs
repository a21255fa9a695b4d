use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use weakkam::action::circle_distance;
use weakkam::aubry::{aubry_points, build_ensemble, calibration_residual, default_epsilon, EnsembleOptions};
use weakkam::config::{InputKind, Level, RegularizeTime, RunConfig};
use weakkam::flow::{corollary_check, flow_points, graph_break_time, integrate};
use weakkam::laxoleinik::{critical_value, residuals, CriticalEstimate};
use weakkam::regularize::{lasry_lions, small_s_search};
use weakkam::selftest::{self, Tolerances};
use weakkam::{Error, GridFunction, Hamiltonian};

const FLOW_DT: f64 = 1e-3;
const COROLLARY_T: f64 = 0.05;

#[derive(Parser)]
#[command(name = "weakkam", version, about = "Weak KAM solutions, critical values and Aubry sets on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the critical value from the forward iteration.
    Critical,
    /// Regularize a sub-solution with T_s T̆_t; CSV to --out.
    Regularize,
    /// Ensemble sub-solution and Aubry set; CSV of the lift to --out.
    Aubry,
    /// Graph transport checks on the regularized critical sub-solution.
    FlowCheck,
    /// Run the acceptance suite.
    Selftest {
        /// Comma-separated criterion ids or name fragments.
        #[arg(long, default_value = "")]
        filter: String,
        /// key=value file overriding named tolerances.
        #[arg(long)]
        tolerances: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Opts {
    /// Flat key=value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// pendulum | mechanical | free
    #[arg(long, global = true)]
    hamiltonian: Option<String>,
    #[arg(long = "P", global = true, allow_hyphen_values = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    amplitude: Option<String>,
    /// Potential coefficients mean,a1,b1,a2,b2,...
    #[arg(long, global = true, allow_hyphen_values = true)]
    v: Option<String>,
    #[arg(long, global = true)]
    grid_n: Option<String>,
    #[arg(long, global = true)]
    h: Option<String>,
    /// A number or "critical".
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, global = true)]
    t: Option<String>,
    /// A number or "auto".
    #[arg(long, global = true)]
    s: Option<String>,
    #[arg(long, global = true)]
    members: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    iterations: Option<String>,
    /// zero | critical | kink
    #[arg(long, global = true)]
    input: Option<String>,
    /// CSV output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON summary path; stdout when absent.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Include wall-clock runtime in the summary.
    #[arg(long, global = true)]
    timing: bool,
}

enum Failure {
    Config(String),
    NotConverged(Value),
    Computation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Computation(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Computation(format!("cannot write {}: {e}", path.display()))
}

fn build_config(opts: &Opts) -> Result<RunConfig, Failure> {
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let flags = [
        ("hamiltonian", &opts.hamiltonian),
        ("P", &opts.p),
        ("amplitude", &opts.amplitude),
        ("v", &opts.v),
        ("grid-n", &opts.grid_n),
        ("h", &opts.h),
        ("c", &opts.c),
        ("t", &opts.t),
        ("s", &opts.s),
        ("members", &opts.members),
        ("seed", &opts.seed),
        ("epsilon", &opts.epsilon),
        ("iterations", &opts.iterations),
        ("input", &opts.input),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(p) = &opts.out {
        cfg.out = Some(p.clone());
    }
    if let Some(p) = &opts.json {
        cfg.json = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Twelve significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn emit_json(cfg: &RunConfig, summary: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes") + "\n";
    match &cfg.json {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn estimate(cfg: &RunConfig, ham: &Hamiltonian) -> Result<CriticalEstimate, Failure> {
    Ok(critical_value(ham, cfg.grid_n, cfg.h, cfg.iterations)?)
}

/// The level: given, or the critical value estimate (computed at most once).
fn level(cfg: &RunConfig, ham: &Hamiltonian, est: &mut Option<CriticalEstimate>) -> Result<f64, Failure> {
    match cfg.c {
        Level::Value(c) => Ok(c),
        Level::Critical => {
            if est.is_none() {
                *est = Some(estimate(cfg, ham)?);
            }
            Ok(est.as_ref().unwrap().alpha)
        }
    }
}

fn cmd_critical(cfg: &RunConfig) -> Result<Value, Failure> {
    let ham = cfg.build_hamiltonian();
    let est = estimate(cfg, &ham)?;
    let summary = json!({
        "command": "critical",
        "config": cfg,
        "alpha": est.alpha,
        "previous_alpha": est.previous_alpha,
        "converged": est.converged,
        "history": est.history,
    });
    if est.converged {
        Ok(summary)
    } else {
        Err(Failure::NotConverged(summary))
    }
}

fn regularization_input(cfg: &RunConfig, ham: &Hamiltonian, est: &mut Option<CriticalEstimate>) -> Result<GridFunction, Failure> {
    Ok(match cfg.input {
        InputKind::Zero => GridFunction::constant(cfg.grid_n, 0.0)?,
        InputKind::Kink => GridFunction::from_fn(cfg.grid_n, |x| circle_distance(x, 0.5))?,
        InputKind::Critical => {
            if est.is_none() {
                *est = Some(estimate(cfg, ham)?);
            }
            est.as_ref().unwrap().iterate.clone()
        }
    })
}

fn cmd_regularize(cfg: &RunConfig) -> Result<Value, Failure> {
    let ham = cfg.build_hamiltonian();
    let mut est = None;
    let u = regularization_input(cfg, &ham, &mut est)?;
    let c = level(cfg, &ham, &mut est)?;
    let r = match cfg.s {
        RegularizeTime::Auto => small_s_search(&ham, &u, cfg.t, c)?,
        RegularizeTime::Value(s) => lasry_lions(&ham, &u, cfg.t, s, c)?,
    };
    if let Some(path) = &cfg.out {
        let w = &r.w;
        let res = residuals(&ham, w, c);
        let d2 = w.second_differences();
        let mut csv = String::from("x,u,du,residual,second_diff\n");
        for i in 0..w.n() {
            writeln!(csv, "{},{},{},{},{}", num(w.node(i)), num(w.values()[i]), num(w.gradient(i)), num(res[i]), num(d2[i]))
                .unwrap();
        }
        write_text(path, &csv)?;
    }
    Ok(json!({
        "command": "regularize",
        "config": cfg,
        "c": c,
        "t": r.t_used,
        "s": r.s_used,
        "k_plus": r.k_plus,
        "k_minus": r.k_minus,
        "stable": r.stable,
        "sup_dist": r.sup_dist_to_input,
        "max_residual": r.report.max_residual,
        "pass": r.report.pass,
    }))
}

fn cmd_aubry(cfg: &RunConfig) -> Result<Value, Failure> {
    let ham = cfg.build_hamiltonian();
    let mut est = None;
    let alpha = level(cfg, &ham, &mut est)?;
    let opts = EnsembleOptions { n: cfg.grid_n, ..EnsembleOptions::default() };
    let ensemble = build_ensemble(&ham, alpha, cfg.members, cfg.seed, &opts)?;
    let eps = cfg.epsilon.unwrap_or_else(|| default_epsilon(alpha));
    let aubry = aubry_points(&ham, &ensemble.w, alpha, eps)?;

    let mut invariance: f64 = 0.0;
    for t in [0.5, -0.5] {
        for (x, p) in flow_points(&ham, &aubry.lift, t, FLOW_DT)? {
            invariance = invariance.max(aubry.distance_to_lift(x, p));
        }
    }
    let energy = aubry.lift.iter().map(|&(x, p)| (ham.h(x, p) - alpha).abs()).fold(0.0, f64::max);
    // calibration along the orbit of the flagged point nearest to x = ½
    let &(x0, p0) = aubry
        .lift
        .iter()
        .min_by(|a, b| circle_distance(a.0, 0.5).total_cmp(&circle_distance(b.0, 0.5)))
        .expect("aubry_points never returns an empty lift");
    let trajectory = integrate(&ham, x0, p0, 1.0, FLOW_DT)?;
    let calibration = calibration_residual(&ham, &ensemble.w, &trajectory, alpha);

    if let Some(path) = &cfg.out {
        let mut csv = String::from("x,p,strictness\n");
        for (&i, &(x, p)) in aubry.points.iter().zip(&aubry.lift) {
            writeln!(csv, "{},{},{}", num(x), num(p), num(aubry.strictness[i])).unwrap();
        }
        write_text(path, &csv)?;
    }
    Ok(json!({
        "command": "aubry",
        "config": cfg,
        "alpha": alpha,
        "epsilon": eps,
        "count": aubry.points.len(),
        "coverage": aubry.coverage(),
        "members_discarded": ensemble.discarded,
        "invariance_residual": invariance,
        "energy_residual": energy,
        "calibration_start": x0,
        "calibration_residual": calibration,
        "lipschitz_estimate": aubry.lipschitz_estimate(),
    }))
}

fn cmd_flow_check(cfg: &RunConfig) -> Result<Value, Failure> {
    let ham = cfg.build_hamiltonian();
    let mut est = None;
    let u = regularization_input(cfg, &ham, &mut est)?;
    let c = level(cfg, &ham, &mut est)?;
    let s = match cfg.s {
        RegularizeTime::Value(s) => s,
        RegularizeTime::Auto => 0.5 * cfg.t,
    };
    let w = lasry_lions(&ham, &u, cfg.t, s, c)?.w;
    let corollary_t = COROLLARY_T.min(s);
    let rep = corollary_check(&ham, &w, corollary_t, c, FLOW_DT)?;
    let break_time = graph_break_time(&ham, &w, 1.0, 1e-2)?;
    Ok(json!({
        "command": "flow-check",
        "config": cfg,
        "c": c,
        "corollary_t": corollary_t,
        "forward_distance": rep.forward_distance,
        "backward_distance": rep.backward_distance,
        "graph_break_time": break_time,
        "graph_break_time_capped": break_time >= 1.0,
    }))
}

fn cmd_selftest(filter: &str, tolerances: Option<&Path>) -> Result<Value, Failure> {
    let mut tol = Tolerances::default();
    if let Some(path) = tolerances {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        tol.apply_text(&text)?;
    }
    let outcomes = selftest::run(filter, &tol, |o| eprintln!("{o}"));
    if outcomes.is_empty() {
        return Err(Failure::Config(format!("filter {filter:?} selects no criterion")));
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("{} {}", o.id, o.name)).collect();
    let summary = json!({
        "command": "selftest",
        "filter": filter,
        "outcomes": outcomes,
        "failed": failed,
        "pass": failed.is_empty(),
    });
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(Failure::NotConverged(summary))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    let cfg = match build_config(&cli.opts) {
        Ok(c) => c,
        Err(Failure::Config(m)) | Err(Failure::Computation(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
        Err(Failure::NotConverged(_)) => unreachable!(),
    };
    let result = match &cli.command {
        Command::Critical => cmd_critical(&cfg),
        Command::Regularize => cmd_regularize(&cfg),
        Command::Aubry => cmd_aubry(&cfg),
        Command::FlowCheck => cmd_flow_check(&cfg),
        Command::Selftest { filter, tolerances } => cmd_selftest(filter, tolerances.as_deref()),
    };
    let with_timing = |mut v: Value| {
        if cli.opts.timing {
            v["runtime_seconds"] = json!(start.elapsed().as_secs_f64());
        }
        v
    };
    let (summary, code) = match result {
        Ok(v) => (Some(with_timing(v)), 0),
        Err(Failure::NotConverged(v)) => (Some(with_timing(v)), 2),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            (None, 1)
        }
        Err(Failure::Computation(m)) => {
            eprintln!("error: {m}");
            (None, 3)
        }
    };
    if let Some(v) = summary {
        if let Err(Failure::Computation(m)) = emit_json(&cfg, &v) {
            eprintln!("error: {m}");
            return ExitCode::from(3);
        }
    }
    ExitCode::from(code)
}
