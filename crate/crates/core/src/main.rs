//! Command-line harness around the simulation library.

use clap::{Parser, Subcommand, ValueEnum};
use framesync::config::SimConfig;
use framesync::elm::{load_dataset, load_model, save_dataset, save_model, train};
use framesync::harness::{
    emit_csv, emit_plot, evaluate, parse_csv, run_parameter_study, run_sweep, PlotMetric,
    StudyAxis, TrainedModels,
};
use framesync::impairments::{measure_evm, SalehParams};
use framesync::methods::{calibrate_method_drive, calibration_probe, generate_dataset, MethodId};
use framesync::rng::{stream, Purpose};
use framesync::Result;
use std::collections::HashMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Sync,
    Ber,
}

impl From<MetricArg> for PlotMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Sync => PlotMetric::SyncErrorProb,
            MetricArg::Ber => PlotMetric::Ber,
        }
    }
}

#[derive(Parser)]
#[command(name = "framesync", version, about = "Frame synchronization Monte Carlo harness")]
struct Cli {
    /// Base parameter profile.
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: Profile,
    /// key=value config file layered over the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the campaign seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated method list (Prop,TD_Corr,TD_ELM,Sup_Corr).
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker thread count (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the HPA drive gain to the EVM target for each method.
    CalibrateEvm,
    /// Generate and save an ELM training dataset for one method.
    GenDataset {
        #[arg(long)]
        method: String,
        /// Pin training to this index of the SNR grid instead of mixing.
        #[arg(long)]
        snr_index: Option<usize>,
    },
    /// Train an ELM model (from a saved dataset, or freshly generated).
    Train {
        #[arg(long)]
        method: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate one ELM method across the SNR grid with a saved model.
    Eval {
        #[arg(long)]
        method: String,
        #[arg(long)]
        model: PathBuf,
    },
    /// Full campaign: calibrate, train, evaluate every method on the grid.
    Sweep,
    /// Robustness study: sweep repeated along one parameter axis.
    Study {
        #[arg(long)]
        axis: StudyAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Re-plot a previously written CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "sync")]
        metric: MetricArg,
    },
}

fn load_config(cli: &Cli) -> Result<SimConfig> {
    let base = match cli.profile {
        Profile::Desk => SimConfig::desk(),
        Profile::Paper => SimConfig::paper(),
    };
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::from_file(path, base)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_methods(cli: &Cli) -> Result<Vec<MethodId>> {
    match &cli.methods {
        None => Ok(MethodId::ALL.to_vec()),
        Some(names) => names.iter().map(|n| MethodId::parse(n)).collect(),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| framesync::Error::invalid(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(cli)?;
    let methods = parse_methods(cli)?;
    std::fs::create_dir_all(&cli.out)?;

    match &cli.command {
        Command::CalibrateEvm => {
            for &method in &methods {
                let gamma = calibrate_method_drive(method, &cfg)?;
                let probe = calibration_probe(method, &cfg, 64)?;
                let evm = measure_evm(&probe, &SalehParams::default(), gamma)?;
                println!("{method}: drive_gain={gamma:.6} evm={evm:.3}%");
            }
        }
        Command::GenDataset { method, snr_index } => {
            let method = MethodId::parse(method)?;
            let drive = hpa_drive(&cfg, method)?;
            let fixed = match snr_index {
                Some(idx) => {
                    let snr = *cfg.snr_grid_db.get(*idx).ok_or_else(|| {
                        framesync::Error::invalid(format!("snr index {idx} outside grid"))
                    })?;
                    Some((*idx as u32, snr))
                }
                None => None,
            };
            let set = generate_dataset(method, &cfg, drive, fixed)?;
            let path = cli.out.join(format!("{}_dataset.bin", method.as_str()));
            save_dataset(&set, &path)?;
            println!("wrote {} ({} samples)", path.display(), cfg.n_t);
        }
        Command::Train { method, dataset } => {
            let method = MethodId::parse(method)?;
            let set = match dataset {
                Some(path) => load_dataset(path)?,
                None => {
                    let drive = hpa_drive(&cfg, method)?;
                    generate_dataset(method, &cfg, drive, None)?
                }
            };
            let mut rng = stream(cfg.seed, Purpose::ModelInit, method.id(), u32::MAX, 0);
            let model = train(&set, cfg.n_tilde, cfg.ridge, &mut rng)?;
            let path = cli.out.join(format!("{}.elm", method.as_str()));
            save_model(&model, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Eval { method, model } => {
            let method = MethodId::parse(method)?;
            let mut trained = TrainedModels::default();
            if method.uses_elm() {
                trained.models.insert((method, None), load_model(model)?);
            }
            let mut drives = HashMap::new();
            if let Some(gamma) = hpa_drive(&cfg, method)? {
                drives.insert(method, gamma);
            }
            let records = evaluate(&cfg, &[method], &drives, &trained)?;
            let csv = cli.out.join(format!("eval_{}.csv", method.as_str()));
            emit_csv(&records, &csv)?;
            print_summary(&records);
            println!("wrote {}", csv.display());
        }
        Command::Sweep => {
            let records = run_sweep(&cfg, &methods)?;
            let csv = cli.out.join("sweep.csv");
            emit_csv(&records, &csv)?;
            emit_plot(&records, PlotMetric::SyncErrorProb, &cli.out.join("sweep_sync.svg"))?;
            emit_plot(&records, PlotMetric::Ber, &cli.out.join("sweep_ber.svg"))?;
            print_summary(&records);
            println!("wrote {}", csv.display());
        }
        Command::Study { axis, values } => {
            let records = run_parameter_study(&cfg, *axis, values, &methods)?;
            let stem = format!("study_{}", axis.as_str());
            let csv = cli.out.join(format!("{stem}.csv"));
            emit_csv(&records, &csv)?;
            emit_plot(&records, PlotMetric::SyncErrorProb, &cli.out.join(format!("{stem}.svg")))?;
            print_summary(&records);
            println!("wrote {}", csv.display());
        }
        Command::Plot { input, metric } => {
            let records = parse_csv(input)?;
            let svg = cli.out.join(
                input
                    .file_stem()
                    .map(|s| format!("{}.svg", s.to_string_lossy()))
                    .unwrap_or_else(|| "plot.svg".to_string()),
            );
            emit_plot(&records, (*metric).into(), &svg)?;
            println!("wrote {}", svg.display());
        }
    }
    Ok(())
}

fn hpa_drive(cfg: &SimConfig, method: MethodId) -> Result<Option<f64>> {
    if cfg.hpa_enabled {
        Ok(Some(calibrate_method_drive(method, cfg)?))
    } else {
        Ok(None)
    }
}

fn print_summary(records: &[framesync::harness::ResultRecord]) {
    for r in records {
        println!(
            "{:<8} snr={:>5} dB  P(sync err)={:.4e}  BER={:.4e}  ({} trials)",
            r.method.as_str(),
            r.snr_db,
            r.sync_error_prob(),
            r.ber(),
            r.trials
        );
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
