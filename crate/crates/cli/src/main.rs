mod overrides;
mod svg;

use clap::{Parser, Subcommand};
use minmax_lab::checks::{gradcheck, oracle, GradCheckConfig, Mutation, OracleConfig};
use minmax_lab::harness::{
    log_grid, preset, summarize, sweep, train, write_run, write_sweep, ExperimentConfig, Preset,
    StopReason, SweepSpec,
};
use minmax_lab::par;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_ENV: &str = "MINMAX_LAB_THREADS";

#[derive(Parser)]
#[command(
    name = "minmax-lab",
    version,
    about = "Min-max optimization lab for a two-mode synthetic GAN"
)]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write run_<seed>.csv and verdict.json.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Grid over (eta_D, eta_G, seed); writes sweep.csv and sweep.json.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Flip the sign of the bias gradient (checks that the check fails).
        #[arg(long, hide = true)]
        flip_bias_sign: bool,
    },
    /// Monte-Carlo mean gradient against exact enumeration.
    Oracle {
        /// Preset name or JSON file; defaults to the Nsgda preset.
        #[arg(long)]
        config: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Line chart of CSV columns against the first column.
    Plot {
        csv: PathBuf,
        /// Column names; a trailing `*` matches a prefix (e.g. `corr_v_*`).
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Preset name (SgdaBalanced, Nsgda, ...) or path to a JSON file.
    #[arg(long)]
    config: String,
    /// Override one field by dotted path, e.g. `optimizer.eta_D=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Check(String),
    Diverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

macro_rules! say {
    ($quiet:expr, $($arg:tt)*) => {
        if !$quiet {
            println!($($arg)*);
        }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Check(m) | Failure::Diverged(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {s:?}"
                ))
            }),
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Run { common, out } => cmd_run(&common, &out, quiet),
        Command::Sweep { common, out } => cmd_sweep(&common, &out, quiet),
        Command::Gradcheck {
            samples,
            seed,
            flip_bias_sign,
        } => cmd_gradcheck(samples, seed, flip_bias_sign, quiet),
        Command::Oracle {
            config,
            overrides,
            seed,
            snapshots,
            samples,
        } => {
            let args = ConfigArgs {
                config: config.unwrap_or_else(|| Preset::Nsgda.name().to_string()),
                overrides,
                seed,
            };
            cmd_oracle(&args, snapshots, samples, quiet)
        }
        Command::Plot {
            csv,
            columns,
            out,
            title,
        } => cmd_plot(&csv, &columns, &out, title, quiet),
    }
}

/// Reads `--config` as a JSON file if one exists at that path, else as a
/// preset name, and returns the JSON tree before overrides.
fn base_value(args: &ConfigArgs, from_preset: impl Fn(Preset) -> Value) -> Result<Value, Failure> {
    let path = Path::new(&args.config);
    if path.is_file() {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    } else {
        let p: Preset = args.config.parse().map_err(|_| {
            usage(format!(
                "{:?} is neither a file nor a preset name",
                args.config
            ))
        })?;
        Ok(from_preset(p))
    }
}

fn finish<T: DeserializeOwned>(mut v: Value, overrides: &[String]) -> Result<T, Failure> {
    for o in overrides {
        overrides::apply(&mut v, o).map_err(usage)?;
    }
    serde_json::from_value(v).map_err(|e| usage(format!("bad config: {e}")))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("config types serialize")
}

fn experiment(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let mut v = base_value(args, |p| to_value(&preset(p)))?;
    if let Some(seed) = args.seed {
        v["seed"] = seed.into();
    }
    let cfg: ExperimentConfig = finish(v, &args.overrides)?;
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

/// The default sweep grid for a preset: 5×5 log-spaced step sizes over both
/// ratio orientations, seed 0.
fn default_sweep(p: Preset) -> SweepSpec {
    SweepSpec {
        eta_d_grid: log_grid(1e-4, 1e-2, 5).unwrap(),
        eta_g_grid: log_grid(1e-4, 0.3, 5).unwrap(),
        seeds: vec![0],
        base: preset(p),
    }
}

fn cmd_run(args: &ConfigArgs, out: &Path, quiet: bool) -> Result<(), Failure> {
    let cfg = experiment(args)?;
    let record = train(&cfg).map_err(usage)?;
    write_run(&record, out).map_err(usage)?;
    let v = &record.verdict;
    say!(
        quiet,
        "{} seed={} stop={}@{} coverage=[{:.4}, {:.4}] collapse_cos={:.4} max_mode_cos={:.4} regime={} ({:.2}s)",
        v.label.as_str(),
        cfg.seed,
        record.stop_reason.as_str(),
        record.stop_reason.t(),
        v.per_mode_coverage[0],
        v.per_mode_coverage[1],
        v.collapse_cosine,
        v.max_mode_cosine,
        v.regime.map_or("-".to_string(), |r| format!("{r:?}")),
        record.wall_time
    );
    say!(quiet, "wrote {}", out.display());
    match record.stop_reason {
        StopReason::Diverged(t) => Err(Failure::Diverged(format!("run diverged at step {t}"))),
        _ => Ok(()),
    }
}

fn cmd_sweep(args: &ConfigArgs, out: &Path, quiet: bool) -> Result<(), Failure> {
    let mut v = base_value(args, |p| to_value(&default_sweep(p)))?;
    if let Some(seed) = args.seed {
        v["seeds"] = Value::from(vec![seed]);
    }
    let spec: SweepSpec = finish(v, &args.overrides)?;
    spec.validate().map_err(usage)?;
    let threads = threads()?;
    let cells = par::with_threads(threads, || sweep(&spec)).map_err(usage)?;
    write_sweep(&cells, out).map_err(usage)?;
    for s in summarize(&cells) {
        say!(
            quiet,
            "eta_D={:<10.3e} eta_G={:<10.3e} regime={:?} majority={} mean_grad_ratio={:.3}",
            s.eta_d,
            s.eta_g,
            s.regimes,
            s.majority.map_or("-", |l| l.as_str()),
            s.mean_grad_ratio
        );
    }
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} cell(s) failed; see sweep.json");
    }
    say!(quiet, "wrote {}", out.display());
    Ok(())
}

fn cmd_gradcheck(samples: usize, seed: u64, flip: bool, quiet: bool) -> Result<(), Failure> {
    let cfg = GradCheckConfig {
        samples,
        seed,
        mutation: flip.then_some(Mutation::FlipBiasSign),
        ..Default::default()
    };
    let report = gradcheck(&cfg).map_err(usage)?;
    let failed = report.cases.iter().filter(|c| !c.passed()).count();
    say!(
        quiet,
        "gradcheck: {} configurations, max relative error {:.3e}",
        report.cases.len(),
        report.max_rel_error
    );
    if report.passed() {
        say!(quiet, "PASS");
        return Ok(());
    }
    let worst = report.worst_case().expect("a failing report has cases");
    let dump = serde_json::to_string_pretty(worst).expect("cases serialize");
    Err(Failure::Check(format!(
        "gradcheck failed in {failed} configuration(s); worst component {:?}\n{dump}",
        worst.worst.component
    )))
}

fn cmd_oracle(
    args: &ConfigArgs,
    snapshots: usize,
    samples: usize,
    quiet: bool,
) -> Result<(), Failure> {
    let base = experiment(args)?;
    let cfg = OracleConfig {
        snapshots,
        samples,
        ..Default::default()
    };
    let report = oracle(&base, &cfg).map_err(usage)?;
    say!(
        quiet,
        "oracle: {} snapshots x {} samples, max |z| {:.3}",
        report.snapshots.len(),
        samples,
        report.max_z
    );
    if report.passed() {
        say!(quiet, "PASS");
        return Ok(());
    }
    let mut msg = String::from("oracle mismatch beyond 5 standard errors:");
    for s in report.snapshots.iter().filter(|s| !s.failures.is_empty()) {
        for c in &s.failures {
            msg.push_str(&format!(
                "\n  snapshot {} {}: exact {:.6e} mc {:.6e} se {:.3e} z {:.2}",
                s.index, c.component, c.exact, c.mc_mean, c.std_err, c.z
            ));
        }
    }
    Err(Failure::Check(msg))
}

fn cmd_plot(
    csv: &Path,
    patterns: &[String],
    out: &Path,
    title: Option<String>,
    quiet: bool,
) -> Result<(), Failure> {
    let mut reader =
        csv::Reader::from_path(csv).map_err(|e| usage(format!("{}: {e}", csv.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| usage(format!("{}: {e}", csv.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 || headers.iter().all(String::is_empty) {
        return Err(usage(format!("{}: no columns to plot", csv.display())));
    }
    let mut chosen: Vec<usize> = Vec::new();
    for pat in patterns {
        let hits: Vec<usize> = match pat.strip_suffix('*') {
            Some(prefix) => (1..headers.len())
                .filter(|&i| headers[i].starts_with(prefix))
                .collect(),
            None => headers.iter().position(|h| h == pat).into_iter().collect(),
        };
        if hits.is_empty() {
            return Err(usage(format!(
                "{}: no column matches {pat:?}",
                csv.display()
            )));
        }
        for i in hits {
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", csv.display())))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| usage(format!("{}: row {}: {e}", csv.display(), k + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(usage(format!("{}: no data rows", csv.display())));
    }
    let series: Vec<svg::Series> = chosen
        .iter()
        .map(|&i| svg::Series {
            name: headers[i].clone(),
            points: rows.iter().map(|r| (r[0], r[i])).collect(),
        })
        .collect();
    let title = title.unwrap_or_else(|| {
        csv.file_name()
            .map_or(String::new(), |n| n.to_string_lossy().into())
    });
    std::fs::write(out, svg::render(&title, &headers[0], &series))
        .map_err(|e| usage(format!("{}: {e}", out.display())))?;
    say!(quiet, "wrote {} ({} series)", out.display(), series.len());
    Ok(())
}
