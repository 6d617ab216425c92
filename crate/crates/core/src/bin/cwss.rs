use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cwss::experiment::{
    run_experiment_with, to_csv, ExperimentConfig, ResultRow, ResultsDocument, ScenarioDocument,
    SEED_ENV,
};
use cwss::metrics::{r_score, Counts};
use cwss::sensing::Snr;
use cwss::Error;

/// Cooperative wideband spectrum sensing simulator.
#[derive(Parser)]
#[command(name = "cwss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[command(flatten)]
        common: RunArgs,
    },
    /// Run a config once per combination of measurement and SU counts.
    Sweep {
        #[command(flatten)]
        common: RunArgs,
        /// Measurement counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// SU counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        j: Vec<usize>,
        /// SNR grid in dB, comma separated; `inf` for noiseless.
        #[arg(long, value_delimiter = ',')]
        snr: Vec<String>,
    },
    /// Dump or load a single trial as JSON.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Compute the R score of decision statistics.
    Score {
        /// `a,b,c,d`.
        #[arg(long, conflicts_with = "file")]
        stats: Option<String>,
        /// File with one `a,b,c,d` line per record; `#` lines and a header are skipped.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        w1: f64,
        #[arg(long, default_value_t = 1.0)]
        w2: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed and the CWSS_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; results are identical for any count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write the draws of one trial.
    Dump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// SNR grid index whose measurements to include.
        #[arg(long)]
        snr_index: Option<usize>,
        /// Include the sampling matrix even without measurements.
        #[arg(long)]
        theta: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a dumped trial and print a summary.
    Load { path: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. } | Error::InvalidInput(_) => Failure::Config(e.to_string()),
            Error::Invariant(_) => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path, seed: Option<u64>, trials: Option<usize>) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to a sibling temp file and renames, so a failed run leaves no
/// partial output behind.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(contents).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn print_table(title: &str, rows: &[ResultRow]) {
    println!("{title}");
    println!(
        "{:<14} {:>8} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "variant", "snr_db", "mean_r", "stderr", "a", "b", "c", "d"
    );
    for r in rows {
        let s = &r.mean_stats;
        println!(
            "{:<14} {:>8} {:>9.4} {:>9.4} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            r.variant.token(),
            r.snr_db.to_string(),
            r.mean_r,
            r.stderr_r,
            s.a,
            s.b,
            s.c,
            s.d
        );
    }
}

fn run_one(cfg: &ExperimentConfig, args: &RunArgs, stem: &str) -> Result<(), Failure> {
    let seed = cfg.resolved_seed()?;
    let rows = run_experiment_with(cfg, args.workers)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let doc = ResultsDocument {
        seed,
        m: cfg.m,
        j: cfg.j,
        trials: cfg.trials,
        rows,
    };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_atomic(&args.out_dir.join(format!("{stem}.csv")), to_csv(&doc.rows).as_bytes())?;
    write_atomic(&args.out_dir.join(format!("{stem}.json")), json.as_bytes())?;
    if !args.quiet {
        print_table(
            &format!("M = {}, J = {}, {} trials, seed {seed}", cfg.m, cfg.j, cfg.trials),
            &doc.rows,
        );
    }
    Ok(())
}

fn parse_stats_line(line: &str) -> Result<[f64; 4], Failure> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Failure::Config(format!("expected a,b,c,d, got {line:?}")));
    }
    let mut out = [0.0; 4];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| Failure::Config(format!("invalid count {p:?}")))?;
    }
    Ok(out)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common } => {
            let cfg = load_config(&common.config, common.seed, common.trials)?;
            run_one(&cfg, &common, "results")
        }
        Command::Sweep { common, m, j, snr } => {
            let base = load_config(&common.config, common.seed, common.trials)?;
            let ms = if m.is_empty() { vec![base.m] } else { m };
            let js = if j.is_empty() { vec![base.j] } else { j };
            let grid = if snr.is_empty() {
                base.snr_grid.clone()
            } else {
                snr.iter()
                    .map(|t| Snr::parse(t).ok_or_else(|| Failure::Config(format!("invalid SNR {t:?}"))))
                    .collect::<Result<_, _>>()?
            };
            let mut cfgs = Vec::new();
            for &m in &ms {
                for &j in &js {
                    let cfg = ExperimentConfig {
                        m,
                        j,
                        snr_grid: grid.clone(),
                        ..base.clone()
                    };
                    cfg.validate()?;
                    cfgs.push(cfg);
                }
            }
            for cfg in &cfgs {
                run_one(cfg, &common, &format!("results_m{}_j{}", cfg.m, cfg.j))?;
            }
            Ok(())
        }
        Command::Scenario(ScenarioCommand::Dump {
            config,
            seed,
            trial,
            snr_index,
            theta,
            out,
        }) => {
            let cfg = load_config(&config, seed, None)?;
            let doc = ScenarioDocument::generate(&cfg, cfg.resolved_seed()?, trial, snr_index, theta)?;
            let json = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?;
            write_atomic(&out, json.as_bytes())
        }
        Command::Scenario(ScenarioCommand::Load { path }) => {
            let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let doc = ScenarioDocument::from_json(&text)?;
            let t = &doc.truth;
            println!("seed {} trial {}", doc.seed, doc.trial);
            println!("bins {} bands {} SUs {}", t.plan.n(), t.plan.k(), t.spectra.len());
            println!(
                "occupied bands {:?} (C1 {}, C2 {}, C3 {})",
                t.occupancy.occupied().collect::<Vec<_>>(),
                t.occupied_counts.c1,
                t.occupied_counts.c2,
                t.occupied_counts.c3
            );
            match t.common_support() {
                Some(s) => println!("common support ({} bins) {:?}", s.len(), s),
                None => println!("spectra do not share a support"),
            }
            if let Some(theta) = &doc.theta {
                println!("sampling matrix {}x{} id {:#018x}", theta.m(), theta.n(), theta.id());
            }
            if let Some(ms) = &doc.measurements {
                println!("measurements at SNR {} dB", ms.snr_db);
            }
            Ok(())
        }
        Command::Score { stats, file, w1, w2 } => {
            let records: Vec<[f64; 4]> = match (stats, file) {
                (Some(s), None) => vec![parse_stats_line(&s)?],
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                        .filter(|l| l.split(',').all(|p| p.trim().parse::<f64>().is_ok()))
                        .map(parse_stats_line)
                        .collect::<Result<_, _>>()?
                }
                _ => return Err(Failure::Config("pass exactly one of --stats or --file".into())),
            };
            if records.is_empty() {
                return Err(Failure::Config("no statistics found".into()));
            }
            for rec in &records {
                println!("{}", r_score(rec as &dyn Counts, w1, w2));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("(seed falls back to ${SEED_ENV} when not given)");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
