//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fedsim_core::data::{partition_by_source, partition_iid, Dataset, Partition};
use fedsim_core::experiments::{client_sweep, grid_search, run_experiment, History, Runtime, Topology, DEFAULT_LEARNING_RATES};
use fedsim_core::federation::{ClientExecutor, Clock, NullClock, RoundRecord, SerialExecutor};
use fedsim_core::nn::{evaluate, init_parameters, ParameterSet};
use fedsim_core::rng::{derive_seed, stream};

use crate::config::{ConfigEntries, RunConfig};
use crate::error::{AppError, Result};
use crate::exec::{RayonExecutor, WallClock};
use crate::manifest::{read_checkpoint, write_checkpoint, Artifacts, RunManifest, RunSummary};
use crate::metrics::{write_metrics, write_table};
use crate::pipeline::{prepare, PreparedData};

#[derive(Debug, Parser)]
#[command(name = "fedsim", version, about = "Centralized vs. federated vs. mutually-exclusive federated training of a small CNN")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// `key = value` config file; absent keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for CSV, manifest and checkpoint.
    #[arg(long, global = true, default_value = "fedsim-out")]
    pub out: PathBuf,
    /// cl, fl or mefl (overrides the file).
    #[arg(long, global = true)]
    pub topology: Option<String>,
    /// Client count (overrides the file).
    #[arg(long, global = true)]
    pub clients: Option<usize>,
    /// Learning rate (overrides the file).
    #[arg(long, global = true)]
    pub lr: Option<String>,
    /// Train the clients of a round on a thread pool.
    #[arg(long, global = true)]
    pub parallel: bool,
    /// Record real wall-clock seconds; by default the `seconds` column is 0 so
    /// reruns produce byte-identical CSVs.
    #[arg(long, global = true)]
    pub wall_clock: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment.
    Train,
    /// Run one federated experiment per client count.
    Sweep {
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Run the experiment once per learning rate and report the best.
    Grid {
        /// Comma-separated learning rates.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LEARNING_RATES)]
        lrs: Vec<f32>,
    },
    /// Print per-client sample counts with source and class histograms.
    InspectPartitions,
    /// Export, import or inspect parameter checkpoint files.
    Checkpoint {
        #[command(subcommand)]
        action: CheckpointAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CheckpointAction {
    /// Write the initial global weights of the configured model.
    Export {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Load weights and evaluate them on the configured test split.
    Import { file: PathBuf },
    /// Print the header of a checkpoint file.
    Inspect { file: PathBuf },
}

impl GlobalArgs {
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut entries = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
                ConfigEntries::parse(&text)?
            }
            None => ConfigEntries::default(),
        };
        if let Some(s) = self.seed {
            entries.set("seed", s.to_string())?;
        }
        if let Some(t) = &self.topology {
            entries.set("topology", t.clone())?;
        }
        if let Some(k) = self.clients {
            entries.set("clients", k.to_string())?;
        }
        if let Some(lr) = &self.lr {
            entries.set("lr", lr.clone())?;
        }
        entries.resolve()
    }
}

struct Session {
    cfg: RunConfig,
    data: PreparedData,
    executor: Box<dyn ClientExecutor + Sync>,
    clock: Box<dyn Clock>,
    out: PathBuf,
}

impl Session {
    fn open(args: &GlobalArgs) -> Result<Self> {
        let mut cfg = args.resolve_config()?;
        let data = prepare(&mut cfg)?;
        log::info!("train {} / test {} records, fingerprint {}", data.train.len(), data.test.len(), data.fingerprint);
        Ok(Session {
            cfg,
            data,
            executor: if args.parallel { Box::new(RayonExecutor) } else { Box::new(SerialExecutor) },
            clock: if args.wall_clock { Box::new(WallClock::new()) } else { Box::new(NullClock) },
            out: args.out.clone(),
        })
    }

    fn run(&self, exp: &fedsim_core::experiments::ExperimentConfig) -> Result<History> {
        let mut log_round = |r: &RoundRecord, _: &ParameterSet| {
            log::debug!("{} K={} lr={} round {}: loss {:.4} acc {:.4}", exp.topology, exp.clients, exp.lr, r.round, r.train_loss, r.test_accuracy);
        };
        let mut rt = Runtime { executor: self.executor.as_ref(), clock: self.clock.as_ref(), observer: Some(&mut log_round) };
        let h = run_experiment(exp, &self.data.train, &self.data.test, &mut rt)?;
        log::info!(
            "{} K={} lr={}: {} epochs, final accuracy {:.4} ({})",
            exp.topology,
            exp.clients,
            exp.lr,
            h.records.len(),
            h.final_accuracy(),
            h.stop_reason.as_str()
        );
        Ok(h)
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).map_err(|e| AppError::io(&self.out, e))?;
        Ok(self.out.join(name))
    }

    fn finish(&self, command: &str, histories: &[&History], summary: Option<PathBuf>, checkpoint: Option<PathBuf>) -> Result<()> {
        let metrics = self.out_path("metrics.csv")?;
        write_metrics(&metrics, histories)?;
        let config = self.out_path("config.resolved")?;
        std::fs::write(&config, self.cfg.to_text()).map_err(|e| AppError::io(&config, e))?;
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.cfg.to_text(),
            data_fingerprint: self.data.fingerprint.clone(),
            train_size: self.data.train.len(),
            test_size: self.data.test.len(),
            warnings: self.data.warnings.clone(),
            runs: histories.iter().map(|h| RunSummary::of(h)).collect(),
            artifacts: Artifacts { config, metrics_csv: metrics, summary_csv: summary, checkpoint },
        };
        let path = self.out_path("manifest.json")?;
        manifest.write(&path)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn train(args: &GlobalArgs) -> Result<()> {
    let s = Session::open(args)?;
    let h = s.run(&s.cfg.experiment)?;
    let ckpt = s.out_path("checkpoint.favg")?;
    write_checkpoint(&ckpt, h.records.len() as u32, s.data.train.len() as u64, &h.final_params)?;
    println!(
        "{} K={} lr={}: {} epochs, final accuracy {:.4} ({})",
        h.config.topology,
        h.config.clients,
        h.config.lr,
        h.records.len(),
        h.final_accuracy(),
        h.stop_reason.as_str()
    );
    s.finish("train", &[&h], None, Some(ckpt))
}

fn sweep(args: &GlobalArgs, k_min: Option<usize>, k_max: Option<usize>) -> Result<()> {
    let s = Session::open(args)?;
    let exp = &s.cfg.experiment;
    let topology = exp.topology;
    if topology == Topology::Centralized {
        return Err(AppError::Config("`topology`: sweep needs fl or mefl".into()));
    }
    let range = topology.client_range();
    let ks: Vec<usize> = (k_min.unwrap_or(*range.start())..=k_max.unwrap_or(*range.end())).collect();
    let mut histories = Vec::new();
    let mut failure = None;
    let table = client_sweep(exp, topology, &ks, |c| match s.run(c) {
        Ok(h) => {
            histories.push(h.clone());
            Ok(h)
        }
        Err(e) => {
            let msg = e.to_string();
            failure = Some(e);
            Err(fedsim_core::Error::Data(msg))
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let table = table?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|(k, acc)| vec![topology.to_string(), exp.lr.to_string(), k.to_string(), format!("{acc:.6}")])
        .collect();
    for (k, acc) in &table {
        println!("{topology} K={k}: final accuracy {acc:.4}");
    }
    let summary = s.out_path("sweep.csv")?;
    write_table(&summary, &["topology", "lr", "clients", "final_accuracy"], &rows)?;
    s.finish("sweep", &histories.iter().collect::<Vec<_>>(), Some(summary), None)
}

fn grid(args: &GlobalArgs, lrs: &[f32]) -> Result<()> {
    let s = Session::open(args)?;
    let mut failure = None;
    let result = grid_search(&s.cfg.experiment, lrs, |c| {
        s.run(c).map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            fedsim_core::Error::Data(msg)
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let result = result?;
    let rows: Vec<Vec<String>> = result
        .histories
        .iter()
        .map(|(_, h)| {
            vec![
                h.config.topology.to_string(),
                h.config.lr.to_string(),
                h.config.clients.to_string(),
                format!("{:.6}", h.final_accuracy()),
                (h.config.lr == result.best_lr).to_string(),
            ]
        })
        .collect();
    for (_, h) in &result.histories {
        println!("lr={}: final accuracy {:.4}", h.config.lr, h.final_accuracy());
    }
    println!("best lr {}", result.best_lr);
    let summary = s.out_path("grid.csv")?;
    write_table(&summary, &["topology", "lr", "clients", "final_accuracy", "best"], &rows)?;
    s.finish("grid", &result.histories.iter().map(|(_, h)| h).collect::<Vec<_>>(), Some(summary), None)
}

/// Client partitions the configured topology would train on.
pub fn partitions_for(cfg: &RunConfig, train: &Dataset) -> Result<Vec<Partition>> {
    let e = &cfg.experiment;
    Ok(match e.topology {
        Topology::Centralized => partition_iid(train, 1, e.seed)?,
        Topology::Federated => partition_iid(train, e.clients, e.seed)?,
        Topology::MutuallyExclusive => partition_by_source(train, e.clients)?,
    })
}

fn inspect_partitions(args: &GlobalArgs) -> Result<()> {
    let mut cfg = args.resolve_config()?;
    let data = prepare(&mut cfg)?;
    let parts = partitions_for(&cfg, &data.train)?;
    println!(
        "topology {}, {} clients, {} training records",
        cfg.experiment.topology,
        parts.len(),
        data.train.len()
    );
    for p in &parts {
        let sources: Vec<String> = p.source_histogram(&data.train).iter().map(|(s, n)| format!("{s}:{n}")).collect();
        let classes: Vec<String> = p.class_histogram(&data.train).iter().map(|n| n.to_string()).collect();
        println!("client {} n_k={} sources={} classes=[{}]", p.client, p.len(), sources.join(","), classes.join(","));
    }
    Ok(())
}

fn checkpoint(args: &GlobalArgs, action: &CheckpointAction) -> Result<()> {
    match action {
        CheckpointAction::Export { output } => {
            let cfg = args.resolve_config()?;
            let e = &cfg.experiment;
            let params = init_parameters(&e.model, derive_seed(e.seed, &[stream::INIT]))?;
            let path = match output {
                Some(p) => p.clone(),
                None => {
                    std::fs::create_dir_all(&args.out).map_err(|e| AppError::io(&args.out, e))?;
                    args.out.join("initial.favg")
                }
            };
            write_checkpoint(&path, 0, 0, &params)?;
            println!("wrote {} ({} parameters)", path.display(), params.scalar_count());
        }
        CheckpointAction::Import { file } => {
            let mut cfg = args.resolve_config()?;
            let data = prepare(&mut cfg)?;
            let msg = read_checkpoint(file)?;
            let params = msg.to_params(&cfg.experiment.model)?;
            let eval = evaluate(&cfg.experiment.model, &params, &data.test)?;
            println!(
                "{}: round {}, test accuracy {:.4} ({}/{}), mean loss {:.4}",
                file.display(),
                msg.round(),
                eval.accuracy,
                eval.correct,
                eval.count,
                eval.mean_loss
            );
        }
        CheckpointAction::Inspect { file } => print_header(file)?,
    }
    Ok(())
}

fn print_header(file: &Path) -> Result<()> {
    let msg = read_checkpoint(file)?;
    let client = if msg.is_checkpoint() { "checkpoint".to_string() } else { msg.client().to_string() };
    println!("round {} client {} n_k {} scalars {}", msg.round(), client, msg.n_k(), msg.scalar_count());
    for (i, t) in msg.tensors().iter().enumerate() {
        println!("tensor {i}: {:?}", t.shape());
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Train => train(g),
        Command::Sweep { k_min, k_max } => sweep(g, *k_min, *k_max),
        Command::Grid { lrs } => grid(g, lrs),
        Command::InspectPartitions => inspect_partitions(g),
        Command::Checkpoint { action } => checkpoint(g, action),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!("\n  caused by: {s}"));
                source = s.source();
            }
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}
