//! Scratch probe for planted-data trainability (temporary).

use std::time::Instant;

use cgh::data::{split_dataset, Side};
use cgh::eval::{eval_marketing, run_eval, EvalProtocol, HammingScorer, MinerScorer};
use cgh::marketing::{CodePolicy, Metric};
use cgh::mf::{factorize, MfConfig};
use cgh::model::ModelShape;
use cgh::synth::{generate_planted, PlantedConfig};
use cgh::train::{train, CodeMode, TrainConfig, TrainMode};

#[test]
#[ignore]
fn probe_planted_training() {
    let t0 = Instant::now();
    let planted_cfg = PlantedConfig {
        r: 32,
        min_agree: 23,
        ..PlantedConfig::default()
    };
    let data = generate_planted(&planted_cfg);
    println!(
        "planted: {} ratings over {}x{} ({:.2}%), gen {:?}",
        data.ratings.len(),
        planted_cfg.n_users,
        planted_cfg.n_items,
        100.0 * data.ratings.len() as f64
            / (planted_cfg.n_users * planted_cfg.n_items) as f64,
        t0.elapsed()
    );

    let split = split_dataset(&data.ratings, 5, 0.2, 7).unwrap();
    println!(
        "split: warm_train {} warm_test {} cold_user {} (ids {}) cold_item {} (ids {})",
        split.warm_train.len(),
        split.warm_test.len(),
        split.cold_user.len(),
        split.cold_user_ids.len(),
        split.cold_item.len(),
        split.cold_item_ids.len()
    );

    let t1 = Instant::now();
    let mf_cfg = MfConfig { r: 32, a: 1.0, b: 0.01, reg: 0.1, iters: 10, seed: 7 };
    let factors = factorize(&split.warm_train, &mf_cfg).unwrap();
    println!("mf done {:?}", t1.elapsed());

    let env_f = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let env_u = |k: &str, d: usize| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let train_cfg = TrainConfig {
        mode: TrainMode::Warm,
        shape: ModelShape {
            r: 32,
            hidden: {
                let h1 = env_u("P_H1", 48);
                let h2 = env_u("P_H2", 24);
                if h1 == 0 { vec![] } else if h2 == 0 { vec![h1] } else { vec![h1, h2] }
            },
            rho: 0.5,
            lambda_u: env_f("P_LAMBDA", 1.0),
            lambda_v: env_f("P_LAMBDA", 1.0),
        },
        a: 1.0,
        b: env_f("P_B", 0.3),
        kl_weight: env_f("P_KL", 0.05),
        reg_weight: env_f("P_REG", 1e-5),
        learning_rate: env_f("P_LR", 5.0),
        momentum: env_f("P_MOM", 0.9),
        batch_size: env_u("P_BATCH", 128),
        epochs: env_u("P_EPOCHS", 60),
        corruption: env_f("P_CORR", 0.2),
        negatives_per_positive: 5,
        code_mode: CodeMode::Sample,
        seed: env_u("P_SEED", 7) as u64,
    };

    // Ceiling: true planted codes; baseline: MF factor inner products.
    {
        let protocol = EvalProtocol {
            test: &split.warm_test,
            exclusions: &data.ratings,
            target: Side::Item,
            n_negatives: 1000,
            ks: vec![1, 10, 50],
            seed: 11,
        };
        let true_scorer = HammingScorer {
            query_codes: &data.true_user_codes,
            candidate_codes: &data.true_item_codes,
        };
        let rep = run_eval(&protocol, &true_scorer).unwrap();
        println!(
            "TRUE-CODES: acc@1={:.4} acc@10={:.4} acc@50={:.4} mrr={:.4}",
            rep.accuracy_at(1).unwrap(),
            rep.accuracy_at(10).unwrap(),
            rep.accuracy_at(50).unwrap(),
            rep.mrr
        );
        struct DotScorer<'a> { p: &'a ndarray::Array2<f64>, q: &'a ndarray::Array2<f64> }
        impl cgh::eval::CandidateScorer for DotScorer<'_> {
            fn score_candidates(&self, fixed: u32, candidates: &[u32], _rng: &mut rand_chacha::ChaCha8Rng, out: &mut Vec<f64>) -> cgh::Result<()> {
                out.clear();
                let pr = self.p.row(fixed as usize);
                for &c in candidates { out.push(pr.dot(&self.q.row(c as usize))); }
                Ok(())
            }
            fn direction(&self) -> cgh::eval::RankDirection { cgh::eval::RankDirection::Descending }
        }
        let mf_scorer = DotScorer { p: &factors.p, q: &factors.q };
        let rep = run_eval(&protocol, &mf_scorer).unwrap();
        println!(
            "MF-FACTORS: acc@1={:.4} acc@10={:.4} acc@50={:.4} mrr={:.4}",
            rep.accuracy_at(1).unwrap(),
            rep.accuracy_at(10).unwrap(),
            rep.accuracy_at(50).unwrap(),
            rep.mrr
        );
    }
    let mode_filter = std::env::var("P_MODES").unwrap_or_else(|_| "warm,cold-item,cold-user".into());
    for mode in [TrainMode::Warm, TrainMode::ColdItem, TrainMode::ColdUser] {
        if !mode_filter.contains(mode.name()) {
            continue;
        }
        let mut cfg = train_cfg.clone();
        cfg.mode = mode;
        cfg.learning_rate = match mode {
            TrainMode::Warm => env_f("P_LR", 5.0),
            _ => env_f("P_LR_COLD", 0.1),
        };
        if std::env::var("P_BINARIZE").as_deref() == Ok("threshold") {
            cfg.code_mode = CodeMode::Threshold;
        }
        let t2 = Instant::now();
        let trained = train(&split, &data.user_content, &data.item_content, &factors, &cfg)
            .unwrap();
        let train_time = t2.elapsed();

        let totals: Vec<f64> = trained.curve.iter().map(|l| l.total).collect();
        let smoothed: Vec<f64> = (0..totals.len().saturating_sub(4))
            .map(|i| totals[i..i + 5].iter().sum::<f64>() / 5.0)
            .collect();
        let last = smoothed.len();
        let tail = &smoothed[last.saturating_sub(last / 2)..];
        let mut violations = 0;
        let mut soft_violations = 0;
        for w in tail.windows(2) {
            if w[1] > w[0] {
                violations += 1;
            }
            if w[1] > w[0] * 1.001 {
                soft_violations += 1;
            }
        }
        let net_descent = tail.first().map(|a| a - tail.last().unwrap()).unwrap_or(0.0);
        println!("  conv: soft-violations {soft_violations}, net tail descent {net_descent:.2}");
        if std::env::var("P_DUMP").is_ok() {
            let show: Vec<String> = smoothed.iter().rev().take(40).rev().map(|v| format!("{v:.2}")).collect();
            println!("  smoothed tail: {}", show.join(" "));
        }
        println!(
            "mode {:?}: train {:?}, total[0]={:.1} total[mid]={:.1} total[end]={:.1}, tail-violations {}/{}",
            mode,
            train_time,
            totals.first().unwrap(),
            totals[totals.len() / 2],
            totals.last().unwrap(),
            violations,
            tail.len().saturating_sub(1)
        );

        // Encode everything; cold entities get the zero factor slot.
        let user_codes = trained
            .model
            .encode_entities(Side::User, &data.user_content, |u| {
                if split.cold_user_ids.contains(&u) {
                    None
                } else {
                    trained.factors.p.row(u as usize).to_slice()
                }
            })
            .unwrap();
        let item_codes = trained
            .model
            .encode_entities(Side::Item, &data.item_content, |j| {
                if split.cold_item_ids.contains(&j) {
                    None
                } else {
                    trained.factors.q.row(j as usize).to_slice()
                }
            })
            .unwrap();

        // Code diagnostics: per-bit balance and positive vs random distances.
        {
            let mut bit_ones = vec![0usize; 32];
            for e in 0..user_codes.n() {
                let row = user_codes.row(e);
                for (k, slot) in bit_ones.iter_mut().enumerate() { if row.bit(k) { *slot += 1; } }
            }
            let balance: Vec<f64> = bit_ones.iter().map(|&c| c as f64 / user_codes.n() as f64).collect();
            let bmin = balance.iter().cloned().fold(1.0f64, f64::min);
            let bmax = balance.iter().cloned().fold(0.0f64, f64::max);
            let mut pos_dist = 0.0;
            for t in split.warm_test.triples().iter().take(2000) {
                pos_dist += cgh::model::hamming_words(user_codes.row_words(t.user as usize), item_codes.row_words(t.item as usize)) as f64;
            }
            pos_dist /= split.warm_test.len().min(2000) as f64;
            let mut rnd_dist = 0.0;
            let npairs = 2000usize;
            for idx in 0..npairs {
                let u = (idx * 37) % user_codes.n();
                let j = (idx * 61) % item_codes.n();
                rnd_dist += cgh::model::hamming_words(user_codes.row_words(u), item_codes.row_words(j)) as f64;
            }
            rnd_dist /= npairs as f64;
            println!("  codes: user bit-balance [{bmin:.2},{bmax:.2}], mean dist pos={pos_dist:.2} rnd={rnd_dist:.2}");
        }
        // Cross-protocol diagnostics: this model against all three test sets.
        {
            let diag = |test: &cgh::data::SparseRatings, target: Side, name: &str| {
                let protocol = EvalProtocol {
                    test,
                    exclusions: &data.ratings,
                    target,
                    n_negatives: 1000,
                    ks: vec![10],
                    seed: 11,
                };
                let rep = match target {
                    Side::Item => run_eval(&protocol, &HammingScorer { query_codes: &user_codes, candidate_codes: &item_codes }).unwrap(),
                    Side::User => run_eval(&protocol, &HammingScorer { query_codes: &item_codes, candidate_codes: &user_codes }).unwrap(),
                };
                println!("  diag {name}: acc@10={:.4}", rep.accuracy_at(10).unwrap());
            };
            diag(&split.warm_test, Side::Item, "warm");
            diag(&split.cold_item, Side::Item, "cold-item");
            diag(&split.cold_user, Side::User, "cold-user");
        }
        let t3 = Instant::now();
        match mode {
            TrainMode::Warm => {
                let protocol = EvalProtocol {
                    test: &split.warm_test,
                    exclusions: &data.ratings,
                    target: Side::Item,
                    n_negatives: 1000,
                    ks: vec![1, 10, 50],
                    seed: 11,
                };
                let scorer = HammingScorer {
                    query_codes: &user_codes,
                    candidate_codes: &item_codes,
                };
                let rep = run_eval(&protocol, &scorer).unwrap();
                println!(
                    "  warm eval ({} pairs, {:?}): acc@1={:.4} acc@10={:.4} acc@50={:.4} mrr={:.4} chance@10={:.4}",
                    rep.n_test,
                    t3.elapsed(),
                    rep.accuracy_at(1).unwrap(),
                    rep.accuracy_at(10).unwrap(),
                    rep.accuracy_at(50).unwrap(),
                    rep.mrr,
                    10.0 / 1001.0
                );
            }
            TrainMode::ColdItem => {
                let protocol = EvalProtocol {
                    test: &split.cold_item,
                    exclusions: &data.ratings,
                    target: Side::Item,
                    n_negatives: 1000,
                    ks: vec![10],
                    seed: 11,
                };
                let scorer = HammingScorer {
                    query_codes: &user_codes,
                    candidate_codes: &item_codes,
                };
                let rep = run_eval(&protocol, &scorer).unwrap();
                println!(
                    "  cold-item eval ({} pairs, shortfall {}): acc@10={:.4}",
                    rep.n_test,
                    rep.shortfall_pairs,
                    rep.accuracy_at(10).unwrap()
                );
            }
            TrainMode::ColdUser => {
                // Marketing eval on the model with a trained user codebook.
                let miner = MinerScorer {
                    model: &trained.model,
                    item_content: &data.item_content,
                    user_content: &data.user_content,
                    item_factors: Some(&trained.factors.q),
                    cold_items: &split.cold_item_ids,
                    policy: CodePolicy::Mirror,
                    user_codes: None,
                    metric: Metric::Euclidean,
                };
                let t4 = Instant::now();
                let mkt = eval_marketing(
                    &split.warm_test,
                    &data.ratings,
                    &split.cold_item_ids,
                    &miner,
                    &[10, 50, 100],
                    1000,
                    13,
                )
                .unwrap();
                let mkt_cold = eval_marketing(
                    &split.cold_item,
                    &data.ratings,
                    &split.cold_item_ids,
                    &miner,
                    &[10, 50, 100],
                    1000,
                    13,
                )
                .unwrap();
                println!(
                    "  marketing ({:?}): warm acc@100={:.4} (n={}), cold acc@100={:.4} (n={})",
                    t4.elapsed(),
                    mkt.warm.accuracy_at(100).unwrap(),
                    mkt.warm.n_test,
                    mkt_cold.cold.accuracy_at(100).unwrap(),
                    mkt_cold.cold.n_test
                );
                let protocol = EvalProtocol {
                    test: &split.cold_user,
                    exclusions: &data.ratings,
                    target: Side::User,
                    n_negatives: 1000,
                    ks: vec![10],
                    seed: 11,
                };
                let scorer = HammingScorer {
                    query_codes: &item_codes,
                    candidate_codes: &user_codes,
                };
                let rep = run_eval(&protocol, &scorer).unwrap();
                println!(
                    "  cold-user eval ({} pairs, shortfall {}): acc@10={:.4}",
                    rep.n_test,
                    rep.shortfall_pairs,
                    rep.accuracy_at(10).unwrap()
                );
            }
        }
    }
    println!("total probe time {:?}", t0.elapsed());
}
