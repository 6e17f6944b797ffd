//! Single entry point for the hashing recommender pipeline:
//! ingest -> split -> mf -> train -> encode -> recommend / mine / eval / bench,
//! with a reproducible run directory holding every artifact.
//!
//! Exit codes: 0 success, 2 bad arguments or config, 3 missing or corrupt
//! input artifact, 4 numerical failure.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cgh::config::RunConfig;
use cgh::data::{
    load_ratings, load_raw_content, save_vocab, split_dataset, tfidf_select, ContentMatrix, Side,
    SparseRatings,
};
use cgh::error::{CghError, Result};
use cgh::eval::{eval_marketing, run_eval, EvalProtocol, HammingScorer, MinerScorer, RealScorer};
use cgh::index::{bench, BenchConfig, HammingIndex};
use cgh::marketing::{mine_potential_users, PotentialUserQuery};
use cgh::mf::{factorize, LatentFactors};
use cgh::model::codes::BinaryCodeMatrix;
use cgh::model::CghModel;
use cgh::synth::{generate_planted, PlantedConfig};
use cgh::train::{train, TrainMode};

#[derive(Parser)]
#[command(
    name = "cgh",
    version,
    about = "Binary-code hybrid recommender: train hash codes, rank in Hamming space, mine potential users"
)]
struct Cli {
    /// Run directory holding artifacts and reports.
    #[arg(long, global = true, default_value = "runs/default")]
    run: PathBuf,

    /// key=value config file; defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Inline config override, repeatable: --set train.epochs=50
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for evaluation; 1 keeps timing runs deterministic.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse rating and content files into canonical artifacts.
    Ingest(IngestArgs),
    /// Split ratings into warm train/test and cold user/item sets.
    Split(SplitArgs),
    /// Factorize the warm training ratings into latent factors.
    Mf,
    /// Train the code model in one of the three settings.
    Train(TrainArgs),
    /// Write sign-MAP codes for every user and item.
    Encode(ModeArg),
    /// Top-k items for a user by Hamming distance.
    Recommend(RecommendArgs),
    /// Mine top-k potential users for an item via the generative step.
    Mine(MineArgs),
    /// Sampled Accuracy@k / MRR evaluation.
    Eval(EvalArgs),
    /// Time Hamming vs real-valued top-k on synthetic codes.
    Bench(BenchArgs),
    /// Generate planted data and run the whole pipeline in all settings.
    Demo(DemoArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    user_content: Option<PathBuf>,
    #[arg(long)]
    item_content: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    cold_threshold: Option<usize>,
    #[arg(long)]
    warm_test_frac: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// warm | cold-item | cold-user
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct ModeArg {
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    user: u32,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    item: u32,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// warm | cold-item | cold-user | marketing
    #[arg(long, default_value = "warm")]
    setting: String,
    /// hamming | cge
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Planted entity count per side.
    #[arg(long, default_value_t = 1100)]
    entities: usize,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let echoed = cli.run.join("config.txt");
            if echoed.exists() {
                RunConfig::load(&echoed)?
            } else {
                RunConfig::default()
            }
        }
    };
    for pair in &cli.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CghError::Config(format!("--set expects key=value, got `{pair}`")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(threads) = cli.threads {
        cfg.set("threads", &threads.to_string())?;
    }

    let threads = cfg.get_usize("threads")?.max(1);
    cgh::with_threads(threads, || run_command(&cli, cfg))?
}

fn run_command(cli: &Cli, mut cfg: RunConfig) -> Result<()> {
    let run = &cli.run;
    fs::create_dir_all(run)?;
    fs::create_dir_all(run.join("reports"))?;

    match &cli.cmd {
        Cmd::Ingest(args) => cmd_ingest(run, &cfg, args)?,
        Cmd::Split(args) => {
            if let Some(v) = args.cold_threshold {
                cfg.set("split.cold_threshold", &v.to_string())?;
            }
            if let Some(v) = args.warm_test_frac {
                cfg.set("split.warm_test_frac", &v.to_string())?;
            }
            cmd_split(run, &cfg)?;
        }
        Cmd::Mf => cmd_mf(run, &cfg)?,
        Cmd::Train(args) => {
            if let Some(mode) = &args.mode {
                cfg.set("train.mode", mode)?;
            }
            cmd_train(run, &cfg)?;
        }
        Cmd::Encode(args) => {
            if let Some(mode) = &args.mode {
                cfg.set("train.mode", mode)?;
            }
            cmd_encode(run, &cfg)?;
        }
        Cmd::Recommend(args) => {
            if let Some(mode) = &args.mode {
                cfg.set("train.mode", mode)?;
            }
            cmd_recommend(run, &cfg, args)?;
        }
        Cmd::Mine(args) => {
            if let Some(mode) = &args.mode {
                cfg.set("train.mode", mode)?;
            }
            cmd_mine(run, &cfg, args)?;
        }
        Cmd::Eval(args) => {
            if let Some(s) = &args.scorer {
                cfg.set("eval.scorer", s)?;
            }
            cmd_eval(run, &cfg, args)?;
        }
        Cmd::Bench(args) => {
            if let Some(v) = &args.sizes {
                cfg.set("bench.sizes", v)?;
            }
            if let Some(v) = args.k {
                cfg.set("bench.k", &v.to_string())?;
            }
            if let Some(v) = args.r {
                cfg.set("bench.r", &v.to_string())?;
            }
            if let Some(v) = args.trials {
                cfg.set("bench.trials", &v.to_string())?;
            }
            cmd_bench(run, &cfg, args.out.as_deref())?;
        }
        Cmd::Demo(args) => cmd_demo(run, &mut cfg, args)?,
    }

    cfg.write(&run.join("config.txt"))?;
    Ok(())
}

fn missing(path: &Path, hint: &str) -> CghError {
    CghError::CorruptArtifact {
        path: path.to_path_buf(),
        message: format!("missing artifact; run `{hint}` first"),
    }
}

fn load_artifact_ratings(run: &Path) -> Result<SparseRatings> {
    let path = run.join("ratings.tsv");
    if !path.exists() {
        return Err(missing(&path, "cgh ingest"));
    }
    SparseRatings::load(&path)
}

fn load_split(run: &Path) -> Result<cgh::data::DatasetSplit> {
    let dir = run.join("split");
    if !dir.join("warm_train.tsv").exists() {
        return Err(missing(&dir.join("warm_train.tsv"), "cgh split"));
    }
    cgh::data::DatasetSplit::load(&dir)
}

fn load_content(run: &Path, side: Side, n: usize) -> Result<ContentMatrix> {
    let path = run.join(format!("content_{}.tsv", side.name()));
    let mut content = if path.exists() {
        ContentMatrix::load(&path)?
    } else {
        // No content ingested: zero-dimensional rows, the encoder input is
        // the latent factor alone.
        ContentMatrix::new(side, 0, Vec::new())?
    };
    content.pad_rows(n);
    Ok(content)
}

fn load_factors(run: &Path) -> Result<LatentFactors> {
    let path = run.join("factors.bin");
    if !path.exists() {
        return Err(missing(&path, "cgh mf"));
    }
    LatentFactors::load(&path)
}

fn load_model(run: &Path, mode: TrainMode) -> Result<CghModel> {
    let path = run.join(format!("checkpoint_{}.bin", mode.name()));
    if !path.exists() {
        return Err(missing(&path, &format!("cgh train --mode {}", mode.name())));
    }
    CghModel::load(&path)
}

fn load_codes(run: &Path, side: Side, mode: TrainMode) -> Result<BinaryCodeMatrix> {
    let path = run.join(format!("codes_{}_{}.bin", side.name(), mode.name()));
    if !path.exists() {
        return Err(missing(&path, &format!("cgh encode --mode {}", mode.name())));
    }
    BinaryCodeMatrix::load(&path)
}

fn cmd_ingest(run: &Path, cfg: &RunConfig, args: &IngestArgs) -> Result<()> {
    let ratings = load_ratings(&args.ratings)?;
    println!(
        "ingest: {} ratings, {} users, {} items",
        ratings.len(),
        ratings.n_users(),
        ratings.n_items()
    );
    ratings.save(&run.join("ratings.tsv"))?;

    let sides = [
        (&args.user_content, Side::User, cfg.get_usize("ingest.d_u")?),
        (&args.item_content, Side::Item, cfg.get_usize("ingest.d_v")?),
    ];
    for (source, side, d) in sides {
        let Some(path) = source else { continue };
        let corpus = load_raw_content(path)?;
        let (mut matrix, vocab) = tfidf_select(&corpus, d, side)?;
        let n = match side {
            Side::User => ratings.n_users(),
            Side::Item => ratings.n_items(),
        };
        matrix.pad_rows(n);
        matrix.save(&run.join(format!("content_{}.tsv", side.name())))?;
        save_vocab(&vocab, &run.join(format!("vocab_{}.tsv", side.name())))?;
        println!(
            "ingest: {} content dim {} over {} rows",
            side.name(),
            matrix.dim(),
            matrix.n_rows()
        );
    }
    Ok(())
}

fn cmd_split(run: &Path, cfg: &RunConfig) -> Result<()> {
    let ratings = load_artifact_ratings(run)?;
    let split = split_dataset(
        &ratings,
        cfg.get_usize("split.cold_threshold")?,
        cfg.get_f64("split.warm_test_frac")?,
        cfg.get_u64("seed")?,
    )?;
    split.save(&run.join("split"))?;
    println!(
        "split: warm_train={} warm_test={} cold_user={} cold_item={} (cold ids {}/{})",
        split.warm_train.len(),
        split.warm_test.len(),
        split.cold_user.len(),
        split.cold_item.len(),
        split.cold_user_ids.len(),
        split.cold_item_ids.len()
    );
    Ok(())
}

fn cmd_mf(run: &Path, cfg: &RunConfig) -> Result<()> {
    let split = load_split(run)?;
    let mf_cfg = cfg.mf_config()?;
    let started = Instant::now();
    let factors = factorize(&split.warm_train, &mf_cfg)?;
    factors.save(&run.join("factors.bin"))?;
    let objective = cgh::mf::mf_objective(&split.warm_train, &factors, &mf_cfg)?;
    println!(
        "mf: r={} objective={objective:.4} ({:.2?})",
        mf_cfg.r,
        started.elapsed()
    );
    Ok(())
}

fn cmd_train(run: &Path, cfg: &RunConfig) -> Result<()> {
    let split = load_split(run)?;
    let factors = load_factors(run)?;
    let user_content = load_content(run, Side::User, split.warm_train.n_users())?;
    let item_content = load_content(run, Side::Item, split.warm_train.n_items())?;
    let train_cfg = cfg.train_config()?;
    let started = Instant::now();
    let trained = train(&split, &user_content, &item_content, &factors, &train_cfg)?;
    let mode = train_cfg.mode.name();
    trained.model.save(&run.join(format!("checkpoint_{mode}.bin")))?;
    trained.write_epoch_log(&run.join("reports").join(format!("train_log_{mode}.csv")))?;
    let last = trained.curve.last().map(|l| l.total).unwrap_or(0.0);
    println!(
        "train[{mode}]: {} epochs, final loss {last:.3} ({:.2?})",
        trained.curve.len(),
        started.elapsed()
    );
    Ok(())
}

/// Codes for every entity of a side: warm entities feed their latent factor
/// into the encoder, cold ones get the zero-filled slot.
fn encode_side(
    model: &CghModel,
    side: Side,
    content: &ContentMatrix,
    factors: &LatentFactors,
    cold_ids: &BTreeSet<u32>,
) -> Result<BinaryCodeMatrix> {
    let matrix = match side {
        Side::User => &factors.p,
        Side::Item => &factors.q,
    };
    model.encode_entities(side, content, |e| {
        if cold_ids.contains(&e) {
            None
        } else {
            matrix.row(e as usize).to_slice()
        }
    })
}

fn cmd_encode(run: &Path, cfg: &RunConfig) -> Result<()> {
    let split = load_split(run)?;
    let factors = load_factors(run)?;
    let mode = TrainMode::parse(cfg.get("train.mode"))?;
    let model = load_model(run, mode)?;
    let user_content = load_content(run, Side::User, split.warm_train.n_users())?;
    let item_content = load_content(run, Side::Item, split.warm_train.n_items())?;

    let user_codes = encode_side(&model, Side::User, &user_content, &factors, &split.cold_user_ids)?;
    let item_codes = encode_side(&model, Side::Item, &item_content, &factors, &split.cold_item_ids)?;
    user_codes.save(&run.join(format!("codes_user_{}.bin", mode.name())))?;
    item_codes.save(&run.join(format!("codes_item_{}.bin", mode.name())))?;
    println!(
        "encode[{}]: {} user and {} item codes, r={}",
        mode.name(),
        user_codes.n(),
        item_codes.n(),
        user_codes.r()
    );
    Ok(())
}

fn cmd_recommend(run: &Path, cfg: &RunConfig, args: &RecommendArgs) -> Result<()> {
    let mode = TrainMode::parse(cfg.get("train.mode"))?;
    let user_codes = load_codes(run, Side::User, mode)?;
    let item_codes = load_codes(run, Side::Item, mode)?;
    if args.user as usize >= user_codes.n() {
        return Err(CghError::Config(format!(
            "user {} outside 0..{}",
            args.user,
            user_codes.n()
        )));
    }
    let query = user_codes.row(args.user as usize);
    let index = HammingIndex::from_codes(item_codes);
    let ranked = index.top_k(&query, args.k)?;
    let mut out = String::from("rank,item_id,distance\n");
    for (rank, entry) in ranked.entries.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", rank + 1, entry.id, entry.score as u32));
    }
    print!("{out}");
    if let Some(path) = &args.out {
        fs::write(path, out)?;
    }
    Ok(())
}

fn cmd_mine(run: &Path, cfg: &RunConfig, args: &MineArgs) -> Result<()> {
    let split = load_split(run)?;
    let factors = load_factors(run)?;
    let mode = TrainMode::parse(cfg.get("train.mode"))?;
    let model = load_model(run, mode)?;
    let user_content = load_content(run, Side::User, split.warm_train.n_users())?;
    let item_content = load_content(run, Side::Item, split.warm_train.n_items())?;
    if args.item as usize >= item_content.n_rows() {
        return Err(CghError::Config(format!(
            "item {} outside 0..{}",
            args.item,
            item_content.n_rows()
        )));
    }
    let policy = cfg.mine_policy()?;
    let user_codes = load_codes(run, Side::User, mode).ok();
    let factor_row;
    let item_factor = if split.cold_item_ids.contains(&args.item) {
        None
    } else {
        factor_row = factors.q.row(args.item as usize);
        factor_row.to_slice()
    };
    let query = PotentialUserQuery {
        item_content: item_content.row(args.item as usize),
        item_factor,
        k: args.k,
        candidates: None,
        policy,
        metric: cfg.knn_metric()?,
    };
    let result = mine_potential_users(&query, &model, &user_content, user_codes.as_ref())?;
    let mut out = String::from("rank,user_id,distance\n");
    for (rank, entry) in result.ranked.entries.iter().enumerate() {
        out.push_str(&format!("{},{},{:.9}\n", rank + 1, entry.id, entry.score));
    }
    print!("{out}");
    if let Some(path) = &args.out {
        fs::write(path, out)?;
    }
    Ok(())
}

fn cmd_eval(run: &Path, cfg: &RunConfig, args: &EvalArgs) -> Result<()> {
    let split = load_split(run)?;
    let exclusions = load_artifact_ratings(run)?;
    let ks = cfg.get_usize_list("eval.ks")?;
    let n_negatives = cfg.get_usize("eval.negatives")?;
    let seed = cfg.get_u64("seed")?;

    let default_mode = match args.setting.as_str() {
        "warm" => TrainMode::Warm,
        "cold-item" => TrainMode::ColdItem,
        "cold-user" | "marketing" => TrainMode::ColdUser,
        other => return Err(CghError::Config(format!("unknown eval setting `{other}`"))),
    };
    let mode = match &args.mode {
        Some(m) => TrainMode::parse(m)?,
        None => default_mode,
    };

    let mut csv = String::from("metric,setting,k,value,n_test,n_hits\n");
    if args.setting == "marketing" {
        let factors = load_factors(run)?;
        let model = load_model(run, mode)?;
        let user_content = load_content(run, Side::User, split.warm_train.n_users())?;
        let item_content = load_content(run, Side::Item, split.warm_train.n_items())?;
        let user_codes = load_codes(run, Side::User, mode).ok();
        let scorer = MinerScorer {
            model: &model,
            item_content: &item_content,
            user_content: &user_content,
            item_factors: Some(&factors.q),
            cold_items: &split.cold_item_ids,
            policy: cfg.mine_policy()?,
            user_codes: user_codes.as_ref(),
            metric: cfg.knn_metric()?,
        };
        // Warm rows come from the warm test set, cold rows from the
        // held-out cold-item ratings.
        let mut triples = split.warm_test.triples().to_vec();
        triples.extend_from_slice(split.cold_item.triples());
        let test = SparseRatings::new(
            split.warm_test.n_users(),
            split.warm_test.n_items(),
            triples,
        )?;
        let report = eval_marketing(
            &test,
            &exclusions,
            &split.cold_item_ids,
            &scorer,
            &ks,
            n_negatives,
            seed,
        )?;
        println!("{}", report.warm.summary("marketing-warm"));
        println!("{}", report.cold.summary("marketing-cold"));
        report.warm.append_csv_rows("marketing-warm", &mut csv);
        report.cold.append_csv_rows("marketing-cold", &mut csv);
    } else {
        let (test, target) = match args.setting.as_str() {
            "warm" => (&split.warm_test, Side::Item),
            "cold-item" => (&split.cold_item, Side::Item),
            "cold-user" => (&split.cold_user, Side::User),
            _ => unreachable!("validated above"),
        };
        let protocol = EvalProtocol {
            test,
            exclusions: &exclusions,
            target,
            n_negatives,
            ks: ks.clone(),
            seed,
        };
        let user_codes = load_codes(run, Side::User, mode)?;
        let item_codes = load_codes(run, Side::Item, mode)?;
        let report = match cfg.get("eval.scorer") {
            "hamming" => {
                let (query_codes, candidate_codes) = match target {
                    Side::Item => (&user_codes, &item_codes),
                    Side::User => (&item_codes, &user_codes),
                };
                run_eval(&protocol, &HammingScorer { query_codes, candidate_codes })?
            }
            "cge" => {
                let factors = load_factors(run)?;
                let model = load_model(run, mode)?;
                let user_content = load_content(run, Side::User, split.warm_train.n_users())?;
                let item_content = load_content(run, Side::Item, split.warm_train.n_items())?;
                let user_probs = model.encode_probs_all(Side::User, &user_content, |e| {
                    if split.cold_user_ids.contains(&e) {
                        None
                    } else {
                        factors.p.row(e as usize).to_slice()
                    }
                })?;
                let item_probs = model.encode_probs_all(Side::Item, &item_content, |e| {
                    if split.cold_item_ids.contains(&e) {
                        None
                    } else {
                        factors.q.row(e as usize).to_slice()
                    }
                })?;
                let (query_embed, candidate_embed) = match target {
                    Side::Item => (&user_probs, &item_probs),
                    Side::User => (&item_probs, &user_probs),
                };
                run_eval(&protocol, &RealScorer { query_embed, candidate_embed })?
            }
            other => {
                return Err(CghError::Config(format!("unknown eval scorer `{other}`")))
            }
        };
        println!("{}", report.summary(&args.setting));
        report.append_csv_rows(&args.setting, &mut csv);
    }

    let out = run.join("reports").join(format!("eval_{}.csv", args.setting));
    fs::write(&out, csv)?;
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_bench(run: &Path, cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let sizes = cfg.get_usize_list("bench.sizes")?;
    let bench_cfg = BenchConfig {
        sizes,
        r: cfg.get_usize("bench.r")?,
        k: cfg.get_usize("bench.k")?,
        trials: cfg.get_usize("bench.trials")?,
        seed: cfg.get_u64("seed")?,
    };
    let started = Instant::now();
    let outcome = bench(&bench_cfg);
    let csv = outcome.to_csv();
    print!("{csv}");
    println!("bench finished in {:.2?}", started.elapsed());
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run.join("reports").join("bench.csv"));
    fs::write(&path, csv)?;
    Ok(())
}

/// Desk-scale defaults tuned for the planted pipeline: linear encoder,
/// gentle content weights, rating-scale learning rate.
fn apply_demo_config(cfg: &mut RunConfig, seed: u64) -> Result<()> {
    for (key, value) in [
        ("r", "32"),
        ("enc.hidden", ""),
        ("mf.a", "1.0"),
        ("mf.b", "0.01"),
        ("mf.reg", "0.1"),
        ("mf.iters", "10"),
        ("split.cold_threshold", "5"),
        ("split.warm_test_frac", "0.2"),
        ("train.lambda_u", "0.02"),
        ("train.lambda_v", "0.02"),
        ("train.a", "1.0"),
        ("train.b", "0.3"),
        ("train.kl_weight", "0.0"),
        ("train.reg_weight", "1e-3"),
        ("train.lr", "5.0"),
        ("train.momentum", "0.9"),
        ("train.batch", "256"),
        ("train.epochs", "200"),
        ("train.corruption", "0.3"),
        ("train.negatives", "5"),
        ("train.binarize", "sample"),
        ("eval.negatives", "1000"),
        ("eval.ks", "1,5,10,50,100"),
    ] {
        cfg.set(key, value)?;
    }
    cfg.set("seed", &seed.to_string())?;
    Ok(())
}

fn cmd_demo(run: &Path, cfg: &mut RunConfig, args: &DemoArgs) -> Result<()> {
    let started = Instant::now();
    let seed = cfg.get_u64("seed")?;
    apply_demo_config(cfg, seed)?;

    let planted = PlantedConfig {
        n_users: args.entities,
        n_items: args.entities,
        seed,
        ..PlantedConfig::default()
    };
    let data = generate_planted(&planted);
    data.ratings.save(&run.join("ratings.tsv"))?;
    data.user_content.save(&run.join("content_user.tsv"))?;
    data.item_content.save(&run.join("content_item.tsv"))?;
    println!(
        "demo: planted {} ratings over {}x{} entities",
        data.ratings.len(),
        planted.n_users,
        planted.n_items
    );

    cmd_split(run, cfg)?;
    cmd_mf(run, cfg)?;
    for mode in ["warm", "cold-item", "cold-user"] {
        cfg.set("train.mode", mode)?;
        cmd_train(run, cfg)?;
        cmd_encode(run, cfg)?;
    }
    for setting in ["warm", "cold-item", "cold-user", "marketing"] {
        let eval_args = EvalArgs {
            setting: setting.to_string(),
            scorer: None,
            mode: None,
        };
        cmd_eval(run, cfg, &eval_args)?;
    }

    // Sample outputs from the serving paths.
    cfg.set("train.mode", "warm")?;
    cmd_recommend(
        run,
        cfg,
        &RecommendArgs {
            user: 0,
            k: 10,
            mode: None,
            out: Some(run.join("reports").join("recommend_user0.csv")),
        },
    )?;
    cfg.set("train.mode", "cold-user")?;
    let cold_item = split_first_cold_item(run)?;
    cmd_mine(
        run,
        cfg,
        &MineArgs {
            item: cold_item,
            k: 100,
            mode: None,
            out: Some(run.join("reports").join(format!("mine_item{cold_item}.csv"))),
        },
    )?;

    println!("demo finished in {:.2?}", started.elapsed());
    Ok(())
}

fn split_first_cold_item(run: &Path) -> Result<u32> {
    let split = load_split(run)?;
    Ok(split.cold_item_ids.iter().next().copied().unwrap_or(0))
}
