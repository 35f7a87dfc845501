mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use noisyboost::alloc::{AllocationTable, Budget};
use noisyboost::boost::{error_rate, margins, read_ensemble, train_adaboost, write_ensemble, TrainedEnsemble};
use noisyboost::data::{load_csv, split, Dataset, SplitSpec};
use noisyboost::eval::{
    allocate_policy, evaluate, sweep, Policy, PolicyAllocation, SweepConfig, SweepResult, SweepRow,
};
use noisyboost::noise::NoiseChannelSet;

use crate::config::{ExperimentConfig, ModeName};

const EFFECTIVE_CONFIG: &str = "effective_config.toml";
const ENSEMBLE_FILE: &str = "ensemble.txt";

#[derive(Debug, Parser)]
#[command(
    name = "noisyboost",
    version,
    about = "AdaBoost power allocation under noisy inference"
)]
struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the train/test split and Monte Carlo sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    data: DataArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV data file.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Label column, by header name or 0-based index.
    #[arg(long, global = true)]
    label_col: Option<String>,
    /// Label value mapped to +1.
    #[arg(long, global = true)]
    positive: Option<String>,
    /// Fraction of samples held out for testing.
    #[arg(long, global = true)]
    test_frac: Option<f64>,
}

#[derive(Debug, Args)]
struct Target {
    /// Ensemble file; defaults to ensemble.txt in the output directory.
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Allocation policy: uniform, markov, chernoff or gaussian.
    #[arg(long)]
    proxy: String,
    /// Total SNR C / sigma^2 in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an ensemble and write it with a per-round log.
    Train {
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Allocate power for one policy and budget.
    Allocate {
        #[command(flatten)]
        target: Target,
    },
    /// Evaluate every configured policy over the SNR grid.
    Sweep {
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Comma-separated policies.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        #[arg(long)]
        mode: Option<ModeName>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Evaluate one policy at one budget on the test split.
    Eval {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        mode: Option<ModeName>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Failures split by exit code: bad input is 2, everything else 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult<T> = std::result::Result<T, Failure>;

trait Classify<T> {
    fn usage(self) -> CmdResult<T>;
    fn runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn usage(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CmdResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).usage()?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, &cli);
    cfg.validate().usage()?;

    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring worker threads")
            .runtime()?;
    }
    let out = cfg.output.dir.clone();
    fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .runtime()?;
    write_text(&out.join(EFFECTIVE_CONFIG), &cfg.to_toml().runtime()?)?;

    match &cli.command {
        Command::Train { .. } => cmd_train(&cfg, &out),
        Command::Allocate { target } => cmd_allocate(&cfg, &out, target),
        Command::Sweep { ensemble, .. } => cmd_sweep(&cfg, &out, ensemble.as_deref()),
        Command::Eval { target, .. } => cmd_eval(&cfg, &out, target),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, cli: &Cli) {
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
        cfg.sweep.seed = seed;
    }
    if let Some(path) = &cli.data.data {
        cfg.data.path = path.clone();
    }
    if let Some(col) = &cli.data.label_col {
        cfg.data.label_column = col.clone();
    }
    if let Some(pos) = &cli.data.positive {
        cfg.data.positive_label = pos.clone();
    }
    if let Some(f) = cli.data.test_frac {
        cfg.split.test_fraction = f;
    }
    match &cli.command {
        Command::Train { rounds: Some(r) } => cfg.train.rounds = *r,
        Command::Sweep {
            policies, mode, trials, ..
        } => {
            if let Some(p) = policies {
                cfg.sweep.policies = p.clone();
            }
            if let Some(m) = mode {
                cfg.sweep.mode = *m;
            }
            if let Some(t) = trials {
                cfg.sweep.trials = *t;
            }
        }
        Command::Eval { mode, trials, .. } => {
            if let Some(m) = mode {
                cfg.sweep.mode = *m;
            }
            if let Some(t) = trials {
                cfg.sweep.trials = *t;
            }
        }
        _ => {}
    }
}

fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .runtime()
}

fn load_split(cfg: &ExperimentConfig) -> CmdResult<(Dataset, Dataset)> {
    let ds = load_csv(&cfg.data.path, &cfg.data.csv_options()).usage()?;
    let spec = SplitSpec::new(cfg.split.test_fraction, cfg.split.seed).usage()?;
    split(&ds, &spec).usage()
}

fn load_ensemble(path: &Path) -> CmdResult<TrainedEnsemble> {
    let file = File::open(path)
        .with_context(|| format!("opening ensemble {}", path.display()))
        .usage()?;
    read_ensemble(BufReader::new(file), &path.display().to_string()).usage()
}

fn ensemble_path(out: &Path, given: Option<&Path>) -> PathBuf {
    given.map_or_else(|| out.join(ENSEMBLE_FILE), Path::to_path_buf)
}

fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> CmdResult<()> {
    let (train, test) = load_split(cfg)?;
    let ens = train_adaboost(&train, cfg.train.rounds).runtime()?;
    if ens.len() < cfg.train.rounds {
        log::warn!("training halted after {} of {} rounds", ens.len(), cfg.train.rounds);
    }
    let path = out.join(ENSEMBLE_FILE);
    let mut w = create(&path)?;
    write_ensemble(&ens, &mut w).and_then(|_| w.flush()).runtime()?;

    let mut log = create(&out.join("training_log.csv"))?;
    let rows = (|| -> std::io::Result<()> {
        writeln!(log, "round,feature,threshold,polarity,weighted_error,raw_alpha,alpha")?;
        for (t, ((stump, round), alpha)) in ens.stumps().iter().zip(ens.rounds()).zip(ens.alphas()).enumerate() {
            writeln!(
                log,
                "{},{},{:e},{},{:e},{:e},{:e}",
                t + 1,
                stump.feature_index,
                stump.threshold,
                stump.polarity,
                round.weighted_error,
                round.raw_alpha,
                alpha
            )?;
        }
        log.flush()
    })();
    rows.runtime()?;

    println!(
        "trained {} rounds: train error {:.4}, test error {:.4}",
        ens.len(),
        error_rate(&ens, &train).runtime()?,
        error_rate(&ens, &test).runtime()?
    );
    println!("wrote {}", path.display());
    Ok(())
}

struct Prepared {
    ens: TrainedEnsemble,
    train: Dataset,
    test: Dataset,
    channels: NoiseChannelSet,
}

fn prepare(cfg: &ExperimentConfig, out: &Path, ensemble: Option<&Path>) -> CmdResult<Prepared> {
    let ens = load_ensemble(&ensemble_path(out, ensemble))?;
    let (train, test) = load_split(cfg)?;
    if let Some(d) = ens.stumps().iter().map(|s| s.feature_index).max() {
        if d >= train.n_features() {
            return Err(Failure::Usage(anyhow!(
                "ensemble uses feature {d} but the data has {} features",
                train.n_features()
            )));
        }
    }
    let channels = cfg.channel.channels(ens.len()).usage()?;
    Ok(Prepared {
        ens,
        train,
        test,
        channels,
    })
}

fn noise_power(ch: &NoiseChannelSet) -> f64 {
    ch.sigmas().iter().map(|s| s * s).sum::<f64>() / ch.len() as f64
}

fn allocate_target(cfg: &ExperimentConfig, p: &Prepared, target: &Target) -> CmdResult<PolicyAllocation> {
    let policy: Policy = target.proxy.parse().usage()?;
    let budget = Budget::from_total_snr_db(target.snr_db, noise_power(&p.channels)).usage()?;
    let train_margins = margins(&p.ens, &p.train).runtime()?;
    let opts = cfg.chernoff.options().usage()?;
    allocate_policy(policy, &p.ens, &train_margins, &p.channels, budget, &opts).runtime()
}

fn cmd_allocate(cfg: &ExperimentConfig, out: &Path, target: &Target) -> CmdResult<()> {
    let p = prepare(cfg, out, target.ensemble.as_deref())?;
    let chosen = allocate_target(cfg, &p, target)?;
    let path = out.join(format!("allocation_{}.csv", chosen.policy));
    let mut w = create(&path)?;
    AllocationTable {
        policy: chosen.policy.name(),
        betas: chosen.betas.as_deref(),
        channels: &p.channels,
        allocation: &chosen.allocation,
        mismatch: &chosen.mismatch,
        chernoff_s: chosen.chernoff_s,
    }
    .write(&mut w)
    .and_then(|_| w.flush())
    .runtime()?;
    if let Some(s) = chosen.chernoff_s {
        println!("chernoff s = {s:.6}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep_config(cfg: &ExperimentConfig) -> CmdResult<SweepConfig> {
    let mut sc = SweepConfig::new(cfg.sweep.grid().usage()?, cfg.sweep.policies().usage()?);
    sc.mode = cfg.sweep.mode.into();
    sc.trials = cfg.sweep.trials;
    sc.seed = cfg.sweep.seed;
    sc.chernoff = cfg.chernoff.options().usage()?;
    Ok(sc)
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, ensemble: Option<&Path>) -> CmdResult<()> {
    let p = prepare(cfg, out, ensemble)?;
    let sc = sweep_config(cfg)?;
    let result = sweep(&p.ens, &p.train, &p.test, &p.channels, &sc).runtime()?;
    let path = out.join("sweep.csv");
    let mut w = create(&path)?;
    result.write_csv(&mut w).and_then(|_| w.flush()).runtime()?;
    println!("wrote {} ({} rows)", path.display(), result.rows.len());

    let target = cfg.sweep.target_error;
    if sc.policies.contains(&Policy::Uniform) {
        for policy in sc.policies.iter().filter(|p| **p != Policy::Uniform) {
            match result.snr_gain(*policy, Policy::Uniform, target) {
                Some(g) => println!("{policy}: SNR gain over uniform at P_e = {target} is {g:.2} dB"),
                None => println!("{policy}: no P_e = {target} crossing inside the grid"),
            }
        }
    }
    Ok(())
}

fn cmd_eval(cfg: &ExperimentConfig, out: &Path, target: &Target) -> CmdResult<()> {
    let p = prepare(cfg, out, target.ensemble.as_deref())?;
    let chosen = allocate_target(cfg, &p, target)?;
    let test_margins = margins(&p.ens, &p.test).runtime()?;
    let report = evaluate(
        &test_margins,
        p.test.labels(),
        &p.ens,
        &chosen.mismatch,
        cfg.sweep.mode.into(),
        cfg.sweep.trials,
        cfg.sweep.seed,
    )
    .runtime()?;
    println!("policy            {}", chosen.policy);
    println!("total SNR         {} dB", target.snr_db);
    println!("method            {}", report.method.as_str());
    println!("mismatch          {:.6e}", report.p_m);
    println!("clean error       {:.6e}", report.p_e_clean);
    println!("noisy error       {:.6e}", report.p_e_noisy);
    println!("markov bound      {:.6e}", report.markov_bound);
    println!(
        "chernoff bound    {:.6e} (s = {:.4})",
        report.chernoff_bound, report.chernoff_s
    );
    println!("gaussian estimate {:.6e}", report.gaussian_estimate);
    if let Some(ci) = report.ci_halfwidth {
        println!("95% half-width    {ci:.3e}");
    }
    let result = SweepResult {
        rows: vec![SweepRow {
            policy: chosen.policy,
            snr_total_db: target.snr_db,
            report,
        }],
    };
    let path = out.join(format!("eval_{}.csv", chosen.policy));
    let mut w = create(&path)?;
    result.write_csv(&mut w).and_then(|_| w.flush()).runtime()?;
    println!("wrote {}", path.display());
    Ok(())
}
