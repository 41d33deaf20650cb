//! Command-line front end: data generation, training, enhancement,
//! evaluation and the full transfer-learning protocol.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drone_enhance::datagen::{
    build_dataset, read_mixtures, read_wav_native, synthetic_pool, write_mixtures, write_wav, MixtureRecord,
    SourcePool, Split,
};
use drone_enhance::metrics::{evaluate, evaluate_noisy, EvalReport};
use drone_enhance::pipeline::{
    adapter_stage, finetune_stage, pretrain_stage, transfer_protocol, EnhancementSession, ProtocolConfig, Stage, NOISY,
};
use drone_enhance::training::{load_checkpoint_expecting, save_checkpoint, History, TrainConfig, TrainState};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] drone_enhance::Error),
    #[error("cannot read {0:?}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("invalid config {0:?}")]
    Config(PathBuf, #[source] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "drone-enhance", version, about = "Speech enhancement under drone noise")]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for all randomness; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log debug messages.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the effective configuration as TOML.
    ShowConfig,
    /// Generate a synthetic source pool and optionally a mixture set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::Adapt)]
        stage: StageArg,
        /// Also write this many mixtures to OUT/mixtures.
        #[arg(long)]
        mixtures: Option<usize>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[command(flatten)]
        snr: SnrArgs,
    },
    /// Mix sources listed in a manifest into a mixture set.
    BuildData {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::Adapt)]
        stage: StageArg,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Number of mixtures (default: the configured minutes of the split).
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        snr: SnrArgs,
    },
    /// Train a base model on the pretraining data.
    Pretrain {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        data: StageData,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Insert adapters into a base model and train only those.
    Adapt {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        data: StageData,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Fine-tune the encoder FSMN layers of a base model.
    Finetune {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        data: StageData,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Enhance one 16 kHz WAV file.
    Enhance {
        #[arg(long)]
        checkpoint: PathBuf,
        input: PathBuf,
        output: PathBuf,
    },
    /// Score a mixture set, unprocessed or through a checkpoint.
    Evaluate {
        #[arg(long)]
        testset: PathBuf,
        /// Condition label; `noisy` scores the unprocessed mixtures.
        #[arg(long, default_value = "noisy")]
        condition: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory for per-utterance TSV and JSON reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both stages and score every condition on the drone test set.
    Protocol {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pretrain_epochs: Option<usize>,
        #[arg(long)]
        adapt_epochs: Option<usize>,
        /// Also train a model from scratch on the adaptation data.
        #[arg(long)]
        include_scratch: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Pretrain,
    Adapt,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Pretrain => Stage::Pretrain,
            StageArg::Adapt => Stage::Adapt,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args, Debug)]
struct SnrArgs {
    /// Lower bound of the mixing SNR, dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_lo: Option<f64>,
    /// Upper bound of the mixing SNR, dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_hi: Option<f64>,
}

/// Prebuilt mixture sets; the configured sources are mixed when absent.
#[derive(Args, Debug)]
struct StageData {
    #[arg(long)]
    train_set: Option<PathBuf>,
    #[arg(long)]
    val_set: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if self.max_steps.is_some() {
            cfg.max_steps = self.max_steps;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "warn"
    } else if cli.verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(1)
        }
    }
}

/// The error and all of its sources on one line.
fn error_chain(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("cannot start {n} threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }

    match cli.command {
        Command::ShowConfig => print!("{}", cfg.to_toml()),
        Command::Synth {
            out,
            stage,
            mixtures,
            split,
            snr,
        } => {
            let stage = stage.into();
            let pool = synthetic_pool(&cfg.data.synthetic.pool_config(cfg.seed, stage))?;
            let manifest = pool.write(&out)?;
            manifest.save(out.join("manifest.tsv"))?;
            log::info!(
                "wrote {} clean and {} noise sources to {out:?}",
                pool.clean.len(),
                pool.noise.len()
            );
            if let Some(count) = mixtures {
                let records = mix(&pool, &cfg.protocol(), stage, split.into(), Some(count), &snr)?;
                write_mixtures(out.join("mixtures"), &records)?;
                log::info!("wrote {} mixtures to {:?}", records.len(), out.join("mixtures"));
            }
        }
        Command::BuildData {
            manifest,
            out,
            stage,
            split,
            count,
            snr,
        } => {
            let pool = SourcePool::load_manifest(&manifest)?;
            let records = mix(&pool, &cfg.protocol(), stage.into(), split.into(), count, &snr)?;
            write_mixtures(&out, &records)?;
            log::info!("wrote {} mixtures to {out:?}", records.len());
        }
        Command::Pretrain { out, data, train } => {
            train.apply(&mut cfg.pretrain);
            let p = cfg.protocol();
            let (train_set, val_set) = stage_sets(&cfg, Stage::Pretrain, &data)?;
            let (state, history) = pretrain_stage(&train_set, &val_set, &p)?;
            save_trained(&state, &history, &out)?;
        }
        Command::Adapt { base, out, data, train } => {
            train.apply(&mut cfg.adapt);
            let p = cfg.protocol();
            let base = load_checkpoint_expecting(&base, Some(&p.model))?;
            let (train_set, val_set) = stage_sets(&cfg, Stage::Adapt, &data)?;
            let (state, history) = adapter_stage(&base, &train_set, &val_set, &p)?;
            save_trained(&state, &history, &out)?;
        }
        Command::Finetune { base, out, data, train } => {
            train.apply(&mut cfg.adapt);
            let p = cfg.protocol();
            let base = load_checkpoint_expecting(&base, Some(&p.model))?;
            let (train_set, val_set) = stage_sets(&cfg, Stage::Adapt, &data)?;
            let (state, history) = finetune_stage(&base, &train_set, &val_set, &p)?;
            save_trained(&state, &history, &out)?;
        }
        Command::Enhance {
            checkpoint,
            input,
            output,
        } => {
            let session = EnhancementSession::from_checkpoint(&checkpoint)?;
            let y = read_wav_native(&input)?;
            let out = session.enhance(&y)?;
            write_wav(&output, &out)?;
        }
        Command::Evaluate {
            testset,
            condition,
            checkpoint,
            out,
        } => {
            let records = read_mixtures(&testset)?;
            let report = evaluate_set(&condition, checkpoint.as_deref(), &records)?;
            println!(
                "{}\tn={}\texcluded={}\tsi_snr_db={:.4}\testoi={:.4}",
                report.condition, report.n, report.excluded, report.mean_si_snr, report.mean_estoi
            );
            if let Some(dir) = out {
                report.write(&dir, &format!("eval_{}", report.condition))?;
            }
        }
        Command::Protocol {
            out,
            pretrain_epochs,
            adapt_epochs,
            include_scratch,
        } => {
            if let Some(e) = pretrain_epochs {
                cfg.pretrain.epochs = e;
            }
            if let Some(e) = adapt_epochs {
                cfg.adapt.epochs = e;
            }
            cfg.include_scratch |= include_scratch;
            let pre = stage_pool(&cfg, Stage::Pretrain)?;
            let adapt = stage_pool(&cfg, Stage::Adapt)?;
            let outcome = transfer_protocol(&pre, &adapt, &cfg.protocol())?;
            outcome.write(&out)?;
            print!("{}", outcome.report.to_tsv());
        }
    }
    Ok(())
}

fn mix(
    pool: &SourcePool,
    p: &ProtocolConfig,
    stage: Stage,
    split: Split,
    count: Option<usize>,
    snr: &SnrArgs,
) -> CliResult<Vec<MixtureRecord>> {
    let mut ds = p.dataset_config(stage, split);
    if let Some(c) = count {
        ds.count = c;
    }
    if let Some(v) = snr.snr_lo {
        ds.snr_lo_db = v;
    }
    if let Some(v) = snr.snr_hi {
        ds.snr_hi_db = v;
    }
    Ok(build_dataset(pool, split, &ds)?)
}

/// Sources of a stage: the configured manifest, or a synthetic pool.
fn stage_pool(cfg: &RunConfig, stage: Stage) -> CliResult<SourcePool> {
    let manifest = match stage {
        Stage::Pretrain => &cfg.data.pretrain_manifest,
        Stage::Adapt => &cfg.data.adapt_manifest,
    };
    let synthetic = || synthetic_pool(&cfg.data.synthetic.pool_config(cfg.seed, stage));
    let Some(path) = manifest else {
        return Ok(synthetic()?);
    };
    let mut pool = SourcePool::load_manifest(path)?;
    if stage == Stage::Adapt && cfg.data.synthetic_drone {
        let drone = synthetic()?;
        pool.extend(SourcePool {
            clean: Vec::new(),
            noise: drone.noise,
        })?;
    }
    Ok(pool)
}

/// Training and validation mixtures of a stage.
fn stage_sets(cfg: &RunConfig, stage: Stage, data: &StageData) -> CliResult<(Vec<MixtureRecord>, Vec<MixtureRecord>)> {
    if let (Some(t), Some(v)) = (&data.train_set, &data.val_set) {
        return Ok((read_mixtures(t)?, read_mixtures(v)?));
    }
    let pool = stage_pool(cfg, stage)?;
    let p = cfg.protocol();
    let load = |given: &Option<PathBuf>, split: Split| -> CliResult<Vec<MixtureRecord>> {
        match given {
            Some(dir) => Ok(read_mixtures(dir)?),
            None => Ok(build_dataset(&pool, split, &p.dataset_config(stage, split))?),
        }
    };
    Ok((load(&data.train_set, Split::Train)?, load(&data.val_set, Split::Val)?))
}

/// Writes the checkpoint and its training history next to it.
fn save_trained(state: &TrainState, history: &History, out: &Path) -> CliResult<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    save_checkpoint(state, out)?;
    let hist = out.with_extension("history.tsv");
    std::fs::write(&hist, history.to_tsv()).map_err(|e| CliError::Io(hist.clone(), e))?;
    log::info!("wrote {out:?} and {hist:?}");
    Ok(())
}

fn evaluate_set(condition: &str, checkpoint: Option<&Path>, records: &[MixtureRecord]) -> CliResult<EvalReport> {
    match checkpoint {
        None if condition == NOISY => Ok(evaluate_noisy(records)?),
        None => Err(CliError::Invalid(format!("condition {condition:?} needs --checkpoint"))),
        Some(path) => {
            let session = EnhancementSession::from_checkpoint(path)?;
            Ok(evaluate(condition, records, |w| session.enhance(w))?)
        }
    }
}
