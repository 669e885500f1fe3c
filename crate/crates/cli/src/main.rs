use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use volblocks::harness::curves::{self, CurveSpec};
use volblocks::harness::empirical::{self, EmpiricalConfig};
use volblocks::harness::ingest;
use volblocks::harness::mc::{self, McConfig, ModelSpec};
use volblocks::harness::report::{self, Format, Tabular};
use volblocks::harness::EstimatorSettings;
use volblocks::kernels::KernelFamily;
use volblocks::qmle::{self, QmleBox, QmleOptions};
use volblocks::rk::{self, Bandwidths};
use volblocks::series::BlockPartition;
use volblocks::simulate::{self, ModelConfig};
use volblocks::{Estimator, PreAvgConfig, TickSeries};

#[derive(Parser)]
#[command(name = "volblocks", version, about = "Blocked realized-kernel and QMLE volatility estimation")]
struct Cli {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    /// Worker threads.
    #[arg(long, global = true, env = "VOLBLOCKS_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write its observations.
    Simulate {
        /// Model preset, ignored when --config is given.
        #[arg(long, default_value = "model2")]
        model: String,
        /// Keep every k-th observation.
        #[arg(long, default_value_t = 1)]
        thin: usize,
        /// Write the observed prices in the tick CSV schema instead.
        #[arg(long)]
        ticks: bool,
    },
    /// Estimate integrated volatility per day of a tick CSV file.
    Estimate {
        #[command(subcommand)]
        which: EstimateCmd,
    },
    /// Monte Carlo study.
    Mc {
        /// Model preset for the desk-scale default study.
        #[arg(long, default_value = "model2")]
        model: String,
        #[arg(long)]
        replications: Option<usize>,
        /// Use 10 000 replications.
        #[arg(long)]
        full: bool,
    },
    /// Theoretical loss curves over ρ on the U-shape with one volatility drop.
    Avar {
        /// Estimators, e.g. qmle,rk-th2.
        #[arg(long, value_delimiter = ',', default_value = "qmle,rk-th2")]
        estimators: Vec<Estimator>,
        #[arg(long, default_value_t = 8)]
        max_blocks: usize,
        #[arg(long, default_value_t = 200)]
        n_tau: usize,
    },
    /// Per-day estimates, confidence intervals and cross-day tables.
    Empirical {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8")]
        blocks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "rk-th2,qmle")]
        estimators: Vec<Estimator>,
    },
}

#[derive(Args)]
struct EstimateCommon {
    /// Tick CSV with header date,time_sec,price.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    /// Pre-averaging window scale in seconds.
    #[arg(long, default_value_t = 30.0)]
    theta: f64,
}

#[derive(Subcommand)]
enum EstimateCmd {
    /// Blocked realized kernel.
    Rk {
        #[command(flatten)]
        common: EstimateCommon,
        #[arg(long, default_value = "th2")]
        kernel: KernelFamily,
        /// Fixed bandwidth on every block.
        #[arg(long, conflicts_with = "auto")]
        bandwidth: Option<usize>,
        /// Pilot-tuned bandwidths (the default without --bandwidth).
        #[arg(long)]
        auto: bool,
        #[arg(long, default_value_t = rk::DEFAULT_JITTER)]
        jitter: usize,
    },
    /// Blocked QMLE.
    Qmle {
        #[command(flatten)]
        common: EstimateCommon,
        /// Search box σ²lo,σ²hi,a²lo,a²hi.
        #[arg(long = "box", value_delimiter = ',', num_args = 4)]
        bx: Option<Vec<f64>>,
    },
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(f).with_context(|| format!("parsing {}", path.display()))
}

fn emit<T: Serialize + Tabular>(r: &T, cli: &Cli) -> Result<()> {
    let mut w = open_out(&cli.out)?;
    report::emit_to(r, cli.format.into(), &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DayOutput {
    date: Option<String>,
    estimator: String,
    blocks: usize,
    total: f64,
    avar: Option<f64>,
    detail: serde_json::Value,
}

fn estimate(cmd: &EstimateCmd, cli: &Cli) -> Result<()> {
    let common = match cmd {
        EstimateCmd::Rk { common, .. } | EstimateCmd::Qmle { common, .. } => common,
    };
    let days = ingest::ingest_csv(&common.input)?;
    let preavg = PreAvgConfig {
        theta_seconds: common.theta,
        ..PreAvgConfig::default()
    };
    let mut out = Vec::new();
    for day in &days {
        let partition = BlockPartition::for_series(common.blocks, day)?;
        let date = day.date.clone();
        let result = match cmd {
            EstimateCmd::Rk {
                kernel, bandwidth, jitter, ..
            } => {
                // --auto is the default; --bandwidth switches to a fixed H
                let bw = bandwidth.map_or(Bandwidths::Auto(preavg), Bandwidths::Fixed);
                rk::local_rk(day, &partition, *kernel, &bw, *jitter).map(|e| DayOutput {
                    date: date.clone(),
                    estimator: Estimator::Rk(*kernel).to_string(),
                    blocks: common.blocks,
                    total: e.total,
                    avar: e.avar,
                    detail: serde_json::to_value(&e).unwrap_or_default(),
                })
            }
            EstimateCmd::Qmle { bx, .. } => {
                let bx = match bx {
                    Some(v) => Some(QmleBox {
                        sigma2: (v[0], v[1]),
                        a2: (v[2], v[3]),
                    }),
                    None => None,
                };
                let opts = QmleOptions { bx, pilots: preavg };
                qmle::local_qmle(day, &partition, &opts).map(|e| DayOutput {
                    date: date.clone(),
                    estimator: Estimator::Qmle.to_string(),
                    blocks: common.blocks,
                    total: e.total,
                    avar: e.avar,
                    detail: serde_json::to_value(&e).unwrap_or_default(),
                })
            }
        };
        match result {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}: {e}", date.as_deref().unwrap_or("?")),
        }
    }
    let mut w = open_out(&cli.out)?;
    match cli.format {
        OutFormat::Json => {
            serde_json::to_writer_pretty(&mut w, &out)?;
            writeln!(w)?;
        }
        OutFormat::Csv => {
            writeln!(w, "# volblocks estimate schema_version={}", report::SCHEMA_VERSION)?;
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(["date", "estimator", "blocks", "total", "avar"])?;
            for r in &out {
                c.write_record(&[
                    r.date.clone().unwrap_or_default(),
                    r.estimator.clone(),
                    r.blocks.to_string(),
                    r.total.to_string(),
                    r.avar.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
            c.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Command::Simulate { model, thin, ticks } => {
            let cfg: ModelConfig = match &cli.config {
                Some(p) => read_json(p)?,
                None => ModelConfig::preset(model)?,
            };
            let bundle = simulate::simulate(&cfg, cli.seed.unwrap_or(1))?;
            let bundle = simulate::thin(&bundle, *thin)?;
            let mut w = open_out(&cli.out)?;
            if *ticks {
                ingest::write_ticks(&ingest::to_ticks(&bundle.series(), "2000-01-03"), &mut w)?;
            } else {
                match cli.format {
                    OutFormat::Csv => bundle.write_csv(&mut w)?,
                    OutFormat::Json => {
                        serde_json::to_writer(&mut w, &bundle)?;
                        writeln!(w)?;
                    }
                }
            }
            w.flush()?;
        }
        Command::Estimate { which } => estimate(which, cli)?,
        Command::Mc {
            model,
            replications,
            full,
        } => {
            let mut cfg: McConfig = match &cli.config {
                Some(p) => read_json(p)?,
                None => McConfig::desk(model),
            };
            if cli.config.is_none() {
                cfg.model = ModelSpec::Preset(model.clone());
            }
            if let Some(m) = replications {
                cfg.replications = *m;
            }
            if *full {
                cfg.replications = 10_000;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.workers.is_some() {
                cfg.workers = cli.workers;
            }
            let r = mc::run_mc(&cfg)?;
            emit(&r, cli)?;
        }
        Command::Avar {
            estimators,
            max_blocks,
            n_tau,
        } => {
            let spec = match &cli.config {
                Some(p) => read_json(p)?,
                None => CurveSpec {
                    max_blocks: *max_blocks,
                    n_tau: *n_tau,
                    ..CurveSpec::default()
                },
            };
            let r = curves::loss_curves(&spec, estimators)?;
            emit(&r, cli)?;
        }
        Command::Empirical {
            input,
            blocks,
            estimators,
        } => {
            let cfg = match &cli.config {
                Some(p) => read_json(p)?,
                None => EmpiricalConfig {
                    blocks: blocks.clone(),
                    estimators: estimators.clone(),
                    settings: EstimatorSettings::default(),
                },
            };
            let days: Vec<TickSeries> = ingest::ingest_csv(input)?;
            if days.is_empty() {
                bail!("no trading days in {}", input.display());
            }
            let r = empirical::empirical_report(&days, &cfg)?;
            emit(&r, cli)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("--workers must be positive");
        }
        rayon_threads(w);
    }
    run(&cli)
}

fn rayon_threads(w: usize) {
    // the library pools on the global rayon pool unless a config sets workers
    std::env::set_var("RAYON_NUM_THREADS", w.to_string());
}
