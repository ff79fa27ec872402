use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dgcf::checkpoint;
use dgcf::config::{parse_config, RunConfig};
use dgcf::dataset::{parse_csv, parse_synthetic_spec, Dataset};
use dgcf::report::{metric, RunReport};
use dgcf::{Error, Result};
use dgcf_core::autodiff::Tape;
use dgcf_core::data::{generate_synthetic, split_80_10_10, DatasetMeta};
use dgcf_core::model::{top_k, Forward};
use dgcf_core::store::Side;
use dgcf_core::tbatch::{assign_batches, validate_schedule};
use dgcf_core::trainer::{evaluate, Trainer};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dynamic graph collaborative filtering.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Interaction CSV: user,item,timestamp,state_label,features...
    #[arg(long)]
    data: Option<PathBuf>,
    /// Planted-cluster dataset `users:items:clusters:events:repeatprob`.
    #[arg(long, value_name = "SPEC")]
    synthetic: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train, keep the checkpoint with the best validation MRR, report test metrics.
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config file's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test-split metrics of a checkpoint, after streaming the validation split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        source: Source,
        /// Seed for a synthetic dataset; defaults to the checkpoint's.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Nearest items to a user's projected embedding.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dense user index.
        #[arg(long)]
        user: usize,
        /// Seconds since the user's last interaction.
        #[arg(long = "delta-t", default_value_t = 0.0)]
        delta_t: f64,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// t-batch count, size histogram and invariant check.
    BatchInspect {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Counts, repetition rate and split sizes.
    DatasetStats {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(source: &Source, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    match (&source.data, &source.synthetic) {
        (Some(path), _) => parse_csv(path),
        (None, Some(spec)) => {
            let spec = parse_synthetic_spec(spec)?;
            let interactions = generate_synthetic(&spec, rng)?;
            let mut meta = DatasetMeta::of(&interactions);
            meta.num_users = spec.users;
            meta.num_items = spec.items;
            let ids = |n: usize| (0..n).map(|i| i.to_string()).collect();
            Ok(Dataset { interactions, meta, user_ids: ids(spec.users), item_ids: ids(spec.items) })
        }
        (None, None) => unreachable!("clap requires a data source"),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.to_owned(), source })
}

fn styled() -> bool {
    std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn train(source: &Source, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = match config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let data = load(source, &mut rng)?;
    let splits = split_80_10_10(data.interactions.len());
    if splits.is_degenerate() {
        eprintln!("warning: {} interactions are too few for an 80/10/10 split", data.interactions.len());
    }
    let model = cfg.resolve(&data.meta)?;
    let log = &data.interactions;
    let mut trainer = Trainer::new(log, splits.clone(), data.meta.num_users, data.meta.num_items, model, cfg.train, &mut rng)?;

    let mut times = Vec::new();
    let start = Instant::now();
    trainer.baseline()?;
    times.push(start.elapsed());
    while !trainer.is_done() {
        let start = Instant::now();
        trainer.run_epoch()?;
        times.push(start.elapsed());
    }
    let last = trainer.checkpoint();
    let best = trainer.best().cloned().unwrap_or(last);
    let test = evaluate(&best, &log[splits.validation.clone()], &log[splits.test.clone()])?;

    std::fs::create_dir_all(out).map_err(|source| Error::Io { path: out.to_owned(), source })?;
    checkpoint::save(&out.join("checkpoint.dgcf"), &best)?;
    let fingerprint = checkpoint::fingerprint(&best.model, &best.train);
    let report = RunReport::new(fingerprint, trainer.history().to_vec(), &times, best.epoch, (test.mrr, test.recall10));
    write(&out.join("report.csv"), &report.metrics_csv())?;
    write(&out.join("timing.csv"), &report.timing_csv())?;
    print!("{}", report.table(styled()));
    Ok(())
}

fn evaluate_cmd(path: &Path, source: &Source, seed: Option<u64>) -> Result<()> {
    let ckpt = checkpoint::load(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(ckpt.seed));
    let data = load(source, &mut rng)?;
    let (users, items) = (ckpt.states.num_users(), ckpt.states.num_items());
    if data.meta.num_users > users || data.meta.num_items > items {
        return Err(Error::Lookup(format!(
            "dataset has {} users and {} items; the checkpoint knows {users} and {items}",
            data.meta.num_users, data.meta.num_items
        )));
    }
    let splits = split_80_10_10(data.interactions.len());
    let log = &data.interactions;
    let eval = evaluate(&ckpt, &log[splits.validation], &log[splits.test])?;
    println!("test MRR {}  Recall@10 {}  ({} interactions)", metric(eval.mrr), metric(eval.recall10), eval.ranks.len());
    Ok(())
}

fn predict(path: &Path, user: usize, delta_t: f64, k: usize) -> Result<()> {
    let ckpt = checkpoint::load(path)?;
    let state = ckpt.states.state(Side::User, user).map_err(|_| {
        Error::Lookup(format!("unknown user {user}; the checkpoint has {} users", ckpt.states.num_users()))
    })?;
    if delta_t.is_nan() || delta_t < 0.0 {
        return Err(Error::config("delta-t", "must be non-negative"));
    }
    let mut tape = Tape::new();
    let features = vec![0.0; ckpt.model.user_feature_dim()];
    let pred = Forward::new(&mut tape, &ckpt.params, &ckpt.model).predict(&state.embedding, delta_t, &features)?;
    let ranked = top_k(tape.value(pred).as_slice(), ckpt.states.item_embeddings(), k)?;
    println!("rank,item,distance");
    for (i, (item, d)) in ranked.iter().enumerate() {
        println!("{},{item},{d:.6}", i + 1);
    }
    Ok(())
}

fn batch_inspect(source: &Source, seed: u64) -> Result<()> {
    let data = load(source, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let schedule = assign_batches(&data.interactions)?;
    let mut histogram = std::collections::BTreeMap::<usize, usize>::new();
    for size in schedule.sizes() {
        *histogram.entry(size).or_default() += 1;
    }
    println!("interactions: {}", data.interactions.len());
    println!("batches: {}", schedule.len());
    println!("size,count");
    for (size, count) in histogram {
        println!("{size},{count}");
    }
    match validate_schedule(&schedule, &data.interactions) {
        Ok(()) => println!("invariants: ok"),
        Err(v) => println!("invariants: violated: {v}"),
    }
    Ok(())
}

fn dataset_stats(source: &Source, seed: u64) -> Result<()> {
    let data = load(source, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let m = &data.meta;
    let s = split_80_10_10(m.num_interactions);
    println!("users: {}", m.num_users);
    println!("items: {}", m.num_items);
    println!("interactions: {}", m.num_interactions);
    println!("feature dim: {}", m.feature_dim);
    println!("action repetition: {}", metric(m.action_repetition));
    println!("splits: {}/{}/{}", s.train.len(), s.validation.len(), s.test.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { source, config, seed, out } => train(source, config.as_deref(), *seed, out),
        Command::Evaluate { checkpoint, source, seed } => evaluate_cmd(checkpoint, source, *seed),
        Command::Predict { checkpoint, user, delta_t, k } => predict(checkpoint, *user, *delta_t, *k),
        Command::BatchInspect { source, seed } => batch_inspect(source, *seed),
        Command::DatasetStats { source, seed } => dataset_stats(source, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
