//! Command-line front end: `verify`, `track` and `solve`.
//!
//! Exit codes: 0 success, 1 runtime failure (aborted run or failed check),
//! 2 configuration error. Output goes to `--out`, else `[output] dir`, else
//! `$IERNN_OUT`, else `./out`.

pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use iernn::expr::ExprQp;
use iernn::harness::{compute_error_metrics, run_tracking, verify_theorems, TrackingConfig, TrajectoryLog};
use iernn::{assemble_augmented, solve_trajectory, theoretical_solution, Variant};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use config::{RunConfig, VariantChoice, VerifySection};

pub const OUT_ENV: &str = "IERNN_OUT";

/// Shipped run configurations, selectable with `--preset`.
pub const PRESETS: [(&str, &str); 6] = [
    ("starfish-rm-paper", include_str!("../presets/starfish-rm-paper.toml")),
    ("butterfly-ht", include_str!("../presets/butterfly-ht.toml")),
    ("circle-rm", include_str!("../presets/circle-rm.toml")),
    ("verify-default", include_str!("../presets/verify-default.toml")),
    ("solve-constant", include_str!("../presets/solve-constant.toml")),
    ("solve-periodic", include_str!("../presets/solve-periodic.toml")),
];

#[derive(Parser, Debug)]
#[command(name = "iernn", version, about = "Integration-enhanced neural solvers for time-varying QPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the residual dynamics against their closed forms and noise limits.
    Verify(CommonArgs),
    /// Closed-loop manipulator tracking; writes CSVs, a summary and a plot script.
    Track(CommonArgs),
    /// Solve an explicit time-varying QP given as expressions of t.
    Solve(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Run configuration file (repeatable for `track`).
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Shipped configuration by name (repeatable for `track`).
    #[arg(long)]
    preset: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Overrides the tracking seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Ie,
    Z,
    Both,
}

impl From<VariantArg> for VariantChoice {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ie => VariantChoice::Ie,
            VariantArg::Z => VariantChoice::Z,
            VariantArg::Both => VariantChoice::Both,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

type Outcome = Result<(), Failure>;

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Track(a) => cmd_track(a),
        Command::Solve(a) => cmd_solve(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

fn load_configs(args: &CommonArgs) -> Result<Vec<RunConfig>, Failure> {
    let mut out = Vec::new();
    for path in &args.config {
        out.push(RunConfig::load(path).map_err(Failure::Config)?);
    }
    for name in &args.preset {
        let text = PRESETS
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, text)| *text)
            .ok_or_else(|| {
                let known: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
                Failure::Config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
            })?;
        out.push(RunConfig::parse(text, Path::new(&format!("{name}.toml"))).map_err(Failure::Config)?);
    }
    Ok(out)
}

fn single_config(args: &CommonArgs, command: &str) -> Result<Option<RunConfig>, Failure> {
    let mut configs = load_configs(args)?;
    match configs.len() {
        0 => Ok(None),
        1 => Ok(configs.pop()),
        _ => Err(Failure::Config(format!("`{command}` takes a single configuration"))),
    }
}

fn out_dir(args: &CommonArgs, cfg: Option<&RunConfig>) -> Result<PathBuf, Failure> {
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    Ok(dir)
}

fn variants(args: &CommonArgs, cfg: &RunConfig) -> Vec<Variant> {
    args.variant
        .map(VariantChoice::from)
        .or(cfg.solver.variant)
        .unwrap_or(VariantChoice::Both)
        .variants()
}

fn write_json(path: &Path, value: &serde_json::Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    fs::write(path, text + "\n").map_err(io(path))
}

fn cmd_verify(args: &CommonArgs) -> Outcome {
    let cfg = single_config(args, "verify")?;
    let section = cfg.as_ref().and_then(|c| c.verify.as_ref());
    let default = VerifySection::default();
    let (gains, cases) = section.unwrap_or(&default).resolve().map_err(Failure::Config)?;
    if let Some(c) = &cfg {
        c.solver.neural(Variant::IeRnn).map_err(Failure::Config)?;
    }
    let name = cfg.as_ref().map_or("verify", |c| c.name()).to_string();
    let dir = out_dir(args, cfg.as_ref())?;

    let report = verify_theorems(&gains, &cases);
    let text = report.to_text();
    print!("{text}");
    let report_path = dir.join(format!("{name}_report.txt"));
    fs::write(&report_path, &text).map_err(io(&report_path))?;
    write_json(
        &dir.join(format!("{name}_summary.json")),
        &json!({ "passed": report.passed(), "convergence": report.convergence, "noise": report.noise }),
    )?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Runtime("some checks failed".into()))
    }
}

struct TrackJob {
    config: usize,
    cfg: TrackingConfig,
}

fn write_log(path: &Path, log: &TrajectoryLog) -> Outcome {
    let file = fs::File::create(path).map_err(io(path))?;
    log.write_csv(std::io::BufWriter::new(file))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_track(args: &CommonArgs) -> Outcome {
    let configs = load_configs(args)?;
    if configs.is_empty() {
        return Err(Failure::Config("`track` needs --config or --preset".into()));
    }
    let mut names: Vec<&str> = configs.iter().map(RunConfig::name).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::Config("configurations share an output name".into()));
    }
    let mut jobs = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        for variant in variants(args, c) {
            let cfg = c
                .tracking(variant, args.seed)
                .map_err(|e| Failure::Config(format!("{}: {e}", c.name())))?;
            jobs.push(TrackJob { config: i, cfg });
        }
    }
    let dir = out_dir(args, configs.first().filter(|_| configs.len() == 1))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|job| run_tracking(&job.cfg)).collect());

    let mut aborted = false;
    for (i, c) in configs.iter().enumerate() {
        let name = c.name();
        let mut runs = Vec::new();
        let mut plotted = Vec::new();
        let mut max_rms = Vec::new();
        for (job, result) in jobs.iter().zip(&results).filter(|(j, _)| j.config == i) {
            let label = job.cfg.solver.variant.label();
            let csv = format!("{name}_{label}.csv");
            let (log, abort) = match result {
                Ok(log) => (log, None),
                Err(a) => (&a.log, Some(a)),
            };
            write_log(&dir.join(&csv), log)?;
            let mut entry = json!({ "variant": label, "csv": csv, "samples": log.len() });
            if !log.is_empty() {
                let m = compute_error_metrics(log, job.cfg.scheme.path()).map_err(|e| Failure::Runtime(e.to_string()))?;
                let (first, last) = m.quarter_means();
                entry["max_rms"] = json!(m.max_rms);
                entry["joint_drift"] = json!(m.joint_drift);
                entry["first_quarter_rms"] = json!(first);
                entry["last_quarter_rms"] = json!(last);
                plotted.push((label.to_string(), csv.clone()));
                if abort.is_none() {
                    max_rms.push((job.cfg.solver.variant, m.max_rms));
                }
            }
            match abort {
                Some(a) => {
                    aborted = true;
                    entry["status"] = json!("aborted");
                    entry["abort"] = json!(a.to_string());
                    eprintln!("{name} [{label}]: {a}");
                }
                None => entry["status"] = json!("ok"),
            }
            runs.push(entry);
        }
        let ratio = match (
            max_rms.iter().find(|(v, _)| *v == Variant::IeRnn),
            max_rms.iter().find(|(v, _)| *v == Variant::ZRnn),
        ) {
            (Some((_, ie)), Some((_, z))) => Some(z / ie),
            _ => None,
        };
        let mut line = format!("{name}:");
        for (v, rms) in &max_rms {
            line += &format!(" {} max_rms={rms:.4e} m", v.label());
        }
        if let Some(r) = ratio {
            line += &format!(" ratio z/ie={r:.2}");
        }
        println!("{line}");
        write_json(
            &dir.join(format!("{name}_summary.json")),
            &json!({ "name": name, "runs": runs, "max_rms_ratio_z_over_ie": ratio }),
        )?;
        let script = dir.join(format!("plot_{name}.py"));
        fs::write(&script, plot::tracking_script(&plotted, &format!("{name}.png"))).map_err(io(&script))?;
    }
    if aborted {
        Err(Failure::Runtime("tracking aborted; partial logs written".into()))
    } else {
        Ok(())
    }
}

fn cmd_solve(args: &CommonArgs) -> Outcome {
    let cfg = single_config(args, "solve")?.ok_or_else(|| Failure::Config("`solve` needs --config or --preset".into()))?;
    let section = cfg.solve.as_ref().ok_or_else(|| Failure::Config("missing [solve] section".into()))?;
    let prefix = |e: iernn::Error| match e {
        iernn::Error::Expression { key, message } => Failure::Config(format!("solve.{key}: {message}")),
        other => Failure::Config(format!("solve: {other}")),
    };
    let qp = ExprQp::parse(&section.q, &section.p, &section.j, &section.b).map_err(prefix)?;
    let sys = assemble_augmented(qp).map_err(prefix)?;
    let dim = sys.n() + sys.m();
    let y0 = match &section.y0 {
        Some(v) if v.len() == dim => DVector::from_vec(v.clone()),
        Some(v) => return Err(Failure::Config(format!("solve.y0 has {} entries, expected {dim}", v.len()))),
        None => DVector::zeros(dim),
    };
    let noise = section.noise.model(section.duration, dim);
    noise.validate(dim).map_err(|e| Failure::Config(format!("solve.noise: {e}")))?;
    let name = cfg.name().to_string();
    let dir = out_dir(args, Some(&cfg))?;

    let mut aborted = false;
    let mut runs = Vec::new();
    for variant in variants(args, &cfg) {
        let neural = cfg.solver.neural(variant).map_err(Failure::Config)?;
        let (samples, abort) = match solve_trajectory(&sys, &y0, &neural, &noise, section.duration, cfg.output.log_stride)
        {
            Ok(s) => (s, None),
            Err(a) => (a.samples.clone(), Some(a)),
        };
        let label = variant.label();
        let csv_name = format!("{name}_{label}.csv");
        let path = dir.join(&csv_name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("y_{i}")));
        header.extend((1..=dim).map(|i| format!("ystar_{i}")));
        header.push("eps_norm".into());
        let csv_err = |e: csv::Error| Failure::Runtime(format!("{}: {e}", path.display()));
        w.write_record(&header).map_err(csv_err)?;
        let mut final_gap = f64::NAN;
        for s in &samples {
            let star = theoretical_solution(&sys, s.t)
                .map(|sol| sol.stacked())
                .unwrap_or_else(|_| DVector::from_element(dim, f64::NAN));
            final_gap = (&s.y - &star).norm();
            let mut record = vec![s.t.to_string()];
            record.extend(s.y.iter().chain(star.iter()).map(f64::to_string));
            record.push(s.eps.norm().to_string());
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(io(&path))?;
        let final_eps = samples.last().map_or(f64::NAN, |s| s.eps.norm());
        println!("{name} [{label}]: final ||eps|| = {final_eps:.3e}, final ||Y - Y*|| = {final_gap:.3e}");
        let mut entry = json!({
            "variant": label,
            "csv": csv_name,
            "final_eps_norm": final_eps,
            "final_oracle_gap": final_gap,
            "final_y": samples.last().map(|s| s.y.as_slice().to_vec()),
        });
        if let Some(a) = abort {
            aborted = true;
            eprintln!("{name} [{label}]: {a}");
            entry["abort"] = json!(a.to_string());
        }
        runs.push(entry);
    }
    write_json(&dir.join(format!("{name}_summary.json")), &json!({ "name": name, "runs": runs }))?;
    if aborted {
        Err(Failure::Runtime("solve aborted; partial log written".into()))
    } else {
        Ok(())
    }
}
