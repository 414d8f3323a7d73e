use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use labelshift_core::data::Exhaustion;
use labelshift_core::shift::ShiftKind;
use labelshift_core::sols::LearnerKind;
use labelshift_core::uols::{Prediction, Projection, UpdateMode};
use labelshift_harness::config::{ExperimentConfig, TrackerKind, UolsMethod};
use labelshift_harness::experiment::{run_sols_experiment, run_uols_experiment};
use labelshift_harness::regress::{read_observations, regress, RegressOptions};
use labelshift_harness::summary::{summarize_dir, write_json, write_results, Summary};
use labelshift_harness::synthetic::{gaussian_source, SyntheticBenchmark, TARGET_SIZE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "labelshift", version, about = "Online label-shift adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unsupervised protocol: track the marginal from unlabeled data and reweight.
    Uols(UolsArgs),
    /// Supervised protocol: labels are revealed after every round.
    Sols(SolsArgs),
    /// Run an online regression oracle over a CSV stream of observations.
    Regress(RegressArgs),
    /// Write synthetic features or classifier outputs as CSV.
    GenData(GenDataArgs),
    /// Recompute a summary from trace files.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_shift)]
    shift: Option<ShiftKind>,
    /// Number of rounds.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Seed of the synthetic class centers.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    anchor_eps: Option<f64>,
    #[arg(long)]
    period: Option<usize>,
    #[arg(long)]
    flip_prob: Option<f64>,
    #[arg(long, value_enum)]
    exhaustion: Option<ExhaustionArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UolsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Samples revealed per round.
    #[arg(long)]
    per_step: Option<usize>,
    #[arg(long)]
    holdout_frac: Option<f64>,
    /// Comma-separated methods: base, oracle, fth, ftfwh, flh-ftl, lpa.
    #[arg(long, value_delimiter = ',')]
    oracle: Option<Vec<UolsMethod>>,
    #[arg(long, value_enum)]
    projection: Option<ProjectionArg>,
    #[arg(long, value_enum)]
    predict: Option<PredictArg>,
    #[arg(long, value_enum)]
    update: Option<UpdateArg>,
    #[arg(long)]
    flh_rate: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    lpa_delta: Option<f64>,
    #[arg(long)]
    lpa_sigma_sq: Option<f64>,
    /// Softmax-stream CSV replacing the synthetic data.
    #[arg(long)]
    stream: Option<PathBuf>,
}

#[derive(Args)]
struct SolsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labelled samples per round.
    #[arg(long = "N")]
    per_step: Option<usize>,
    /// Comma-separated learners: werm, lazy, erm, ct, ct-rs.
    #[arg(long, value_delimiter = ',')]
    learner: Option<Vec<String>>,
    #[arg(long)]
    tracker: Option<TrackerKind>,
    /// Clip floor of the marginal estimate; 0 disables clipping.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lazy_mu: Option<f64>,
    #[arg(long)]
    flh_rate: Option<f64>,
    #[arg(long)]
    lpa_delta: Option<f64>,
    #[arg(long)]
    lpa_sigma_sq: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    /// Epochs of every from-scratch refit.
    #[arg(long)]
    epochs: Option<usize>,
    /// Gradient-step cap per round of the continual learners.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct RegressArgs {
    /// CSV with a header row and one observation per row.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "flh-ftl")]
    oracle: TrackerKind,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 100)]
    window: usize,
    /// Wrap the oracle in the low-switching restart scheme.
    #[arg(long)]
    low_switch: bool,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_sq: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    /// `label,x1,...,x12` samples of the Gaussian source.
    Features,
    /// `label,p1,...,pK` outputs of the trained source classifier on target samples.
    Softmax,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, value_enum, default_value = "softmax")]
    kind: DataKind,
    /// Samples per class (features only).
    #[arg(long, default_value_t = 1000)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = labelshift_harness::config::DEFAULT_DATA_SEED)]
    data_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Directory holding `<method>_seed<k>.csv` traces.
    dir: PathBuf,
    /// Summary file; `<dir>/summary.json` when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExhaustionArg {
    Fail,
    Recycle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Simplex,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictArg {
    Argmax,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum UpdateArg {
    PerRound,
    PerSample,
}

fn parse_shift(s: &str) -> Result<ShiftKind, String> {
    s.parse().map_err(|e: labelshift_core::Error| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_common(args: CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.shift, args.shift);
    if args.horizon.is_some() {
        cfg.horizon = args.horizon;
    }
    set(&mut cfg.seeds, args.seed);
    set(&mut cfg.data_seed, args.data_seed);
    set(&mut cfg.anchor_eps, args.anchor_eps);
    if args.period.is_some() {
        cfg.period = args.period;
    }
    if args.flip_prob.is_some() {
        cfg.flip_prob = args.flip_prob;
    }
    set(
        &mut cfg.exhaustion,
        args.exhaustion.map(|e| match e {
            ExhaustionArg::Fail => Exhaustion::Fail,
            ExhaustionArg::Recycle => Exhaustion::Recycle,
        }),
    );
    set(&mut cfg.out, args.out);
    Ok(cfg)
}

fn uols_config(args: UolsArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = apply_common(args.common)?;
    if args.per_step.is_some() {
        cfg.per_step = args.per_step;
    }
    set(&mut cfg.holdout_frac, args.holdout_frac);
    set(&mut cfg.methods, args.oracle);
    set(
        &mut cfg.projection,
        args.projection.map(|p| match p {
            ProjectionArg::Simplex => Projection::Simplex,
            ProjectionArg::None => Projection::None,
        }),
    );
    set(
        &mut cfg.predict,
        args.predict.map(|p| match p {
            PredictArg::Argmax => Prediction::Argmax,
            PredictArg::Sample => Prediction::Sample,
        }),
    );
    set(
        &mut cfg.update,
        args.update.map(|u| match u {
            UpdateArg::PerRound => UpdateMode::PerRound,
            UpdateArg::PerSample => UpdateMode::PerSample,
        }),
    );
    if args.flh_rate.is_some() {
        cfg.flh_rate = args.flh_rate;
    }
    set(&mut cfg.window, args.window);
    set(&mut cfg.lpa_delta, args.lpa_delta);
    if args.lpa_sigma_sq.is_some() {
        cfg.lpa_sigma_sq = args.lpa_sigma_sq;
    }
    if args.stream.is_some() {
        cfg.stream = args.stream;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sols_config(args: SolsArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = apply_common(args.common)?;
    if args.per_step.is_some() {
        cfg.per_step = args.per_step;
    }
    if let Some(names) = args.learner {
        cfg.learners = names
            .iter()
            .map(|n| n.parse::<LearnerKind>())
            .collect::<Result<_, _>>()?;
    }
    set(&mut cfg.tracker, args.tracker);
    set(&mut cfg.mu, args.mu);
    set(&mut cfg.lazy_mu, args.lazy_mu);
    if args.flh_rate.is_some() {
        cfg.flh_rate = args.flh_rate;
    }
    set(&mut cfg.lpa_delta, args.lpa_delta);
    if args.lpa_sigma_sq.is_some() {
        cfg.lpa_sigma_sq = args.lpa_sigma_sq;
    }
    set(&mut cfg.trainer.learning_rate, args.lr);
    set(&mut cfg.trainer.momentum, args.momentum);
    set(&mut cfg.trainer.batch_size, args.batch_size);
    set(&mut cfg.trainer.l2, args.l2);
    set(&mut cfg.trainer.epochs, args.epochs);
    set(&mut cfg.continual.max_steps, args.max_steps);
    set(&mut cfg.continual.patience, args.patience);
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(summary: &Summary) {
    println!(
        "{:<10} {:>16} {:>18} {:>8}  status",
        "method", "error % (std)", "mse (std)", "v_t"
    );
    for (name, m) in &summary.methods {
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
        let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<10} {:>16} {:>18} {:>8}  {}",
            name,
            format!("{} ({})", pct(m.error_mean), pct(m.error_std)),
            format!("{} ({})", num(m.mse_mean), num(m.mse_std)),
            num(m.v_t),
            m.status
        );
    }
}

fn gen_data(args: GenDataArgs) -> anyhow::Result<()> {
    let source = gaussian_source(args.data_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let file = std::fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    match args.kind {
        DataKind::Features => {
            let data = source.balanced_dataset(args.per_class, &mut rng);
            let mut header = vec!["label".to_string()];
            header.extend((1..=source.dim()).map(|i| format!("x{i}")));
            w.write_record(&header)?;
            for i in 0..data.len() {
                let mut rec = vec![(data.y(i) + 1).to_string()];
                rec.extend(data.x(i).iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        DataKind::Softmax => {
            let trainer = Default::default();
            let bench = SyntheticBenchmark::build(source, 1.0, &trainer, &mut rng)?;
            let k = bench.source.num_classes();
            let mut header = vec!["label".to_string()];
            header.extend((1..=k).map(|i| format!("p{i}")));
            w.write_record(&header)?;
            debug_assert_eq!(bench.target.len(), TARGET_SIZE);
            for i in 0..bench.target.len() {
                let p = bench.setup.model.predict_proba(bench.target.x(i))?;
                let mut rec = vec![(bench.target.y(i) + 1).to_string()];
                rec.extend(p.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Uols(args) => {
            let cfg = uols_config(args)?;
            let (runs, setup) = run_uols_experiment(&cfg);
            let summary = write_results(&cfg, "uols", &runs, setup)?;
            print_summary(&summary);
        }
        Command::Sols(args) => {
            let cfg = sols_config(args)?;
            let (runs, setup) = run_sols_experiment(&cfg);
            let summary = write_results(&cfg, "sols", &runs, setup)?;
            print_summary(&summary);
        }
        Command::Regress(args) => {
            let file = std::fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
            let obs = read_observations(std::io::BufReader::new(file))?;
            let opts = RegressOptions {
                oracle: args.oracle,
                rate: args.rate,
                window: args.window,
                low_switch: args.low_switch.then_some((args.delta, args.sigma_sq)),
            };
            match &args.output {
                Some(path) => {
                    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    regress(&obs, &opts, std::io::BufWriter::new(file))?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    regress(&obs, &opts, &mut lock)?;
                    lock.flush()?;
                }
            }
        }
        Command::GenData(args) => gen_data(args)?,
        Command::Summarize(args) => {
            let summary = summarize_dir(&args.dir)?;
            let out = args.out.unwrap_or_else(|| args.dir.join("summary.json"));
            write_json(&out, &summary)?;
            print_summary(&summary);
        }
    }
    Ok(())
}
