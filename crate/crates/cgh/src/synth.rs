//! Planted synthetic data drawn from the model's own generative process:
//! random codes, content = codebook . code + Gaussian noise, ratings
//! thresholded from the code similarity delta. A configurable share of
//! entities is made rare by keeping only a few of their ratings, which the
//! splitter then classifies as cold.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ContentMatrix, Rating, Side, SparseRatings};
use crate::model::codes::{hamming_words, BinaryCode, BinaryCodeMatrix};

#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub r: usize,
    pub d_u: usize,
    pub d_v: usize,
    /// A pair is a positive rating when at least this many bits agree,
    /// i.e. delta = agree/r clears min_agree/r.
    pub min_agree: usize,
    /// Content noise standard deviation.
    pub noise: f64,
    /// Entities forced rare: only `rare_keep` of their ratings survive.
    pub rare_users: usize,
    pub rare_items: usize,
    pub rare_keep: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_users: 1100,
            n_items: 1100,
            r: 32,
            d_u: 24,
            d_v: 24,
            min_agree: 23,
            noise: 0.1,
            rare_users: 150,
            rare_items: 150,
            rare_keep: 3,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedData {
    pub ratings: SparseRatings,
    pub user_content: ContentMatrix,
    pub item_content: ContentMatrix,
    pub true_user_codes: BinaryCodeMatrix,
    pub true_item_codes: BinaryCodeMatrix,
    pub user_codebook: Array2<f64>,
    pub item_codebook: Array2<f64>,
}

fn random_codes(n: usize, r: usize, rng: &mut ChaCha8Rng) -> BinaryCodeMatrix {
    let mut m = BinaryCodeMatrix::zeros(n, r);
    for i in 0..n {
        let bits: Vec<bool> = (0..r).map(|_| rng.random::<bool>()).collect();
        m.set_row(i, &BinaryCode::from_bits(&bits)).expect("uniform r");
    }
    m
}

fn content_from_codes(
    codes: &BinaryCodeMatrix,
    codebook: &Array2<f64>,
    noise: f64,
    side: Side,
    rng: &mut ChaCha8Rng,
) -> ContentMatrix {
    let d = codebook.nrows();
    let rows: Vec<Vec<f64>> = (0..codes.n())
        .map(|i| {
            let code = codes.row(i);
            (0..d)
                .map(|row| {
                    let mut v = 0.0;
                    for k in 0..codes.r() {
                        if code.bit(k) {
                            v += codebook[(row, k)];
                        }
                    }
                    let eps: f64 = StandardNormal.sample(rng);
                    v + noise * eps
                })
                .collect()
        })
        .collect();
    ContentMatrix::from_dense(side, &rows).expect("finite content")
}

/// Keep at most `keep` ratings for each of `count` sampled entities; returns
/// the surviving triple mask.
fn thin_entities(
    triples: &[Rating],
    alive: &mut [bool],
    count: usize,
    keep: usize,
    n_entities: usize,
    by_user: bool,
    rng: &mut ChaCha8Rng,
) {
    if count == 0 || n_entities == 0 {
        return;
    }
    let chosen = sample(rng, n_entities, count.min(n_entities));
    for entity in chosen.iter() {
        let entity = entity as u32;
        let mine: Vec<usize> = triples
            .iter()
            .enumerate()
            .filter(|(idx, t)| {
                alive[*idx] && (if by_user { t.user } else { t.item }) == entity
            })
            .map(|(idx, _)| idx)
            .collect();
        if mine.len() <= keep {
            continue;
        }
        let keep_positions = sample(rng, mine.len(), keep);
        let kept: Vec<usize> = keep_positions.iter().map(|p| mine[p]).collect();
        for &idx in &mine {
            if !kept.contains(&idx) {
                alive[idx] = false;
            }
        }
    }
}

pub fn generate_planted(cfg: &PlantedConfig) -> PlantedData {
    assert!(cfg.min_agree <= cfg.r);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let true_user_codes = random_codes(cfg.n_users, cfg.r, &mut rng);
    let true_item_codes = random_codes(cfg.n_items, cfg.r, &mut rng);

    let scale = 1.0 / (cfg.r as f64).sqrt();
    let draw_codebook = |d: usize, rng: &mut ChaCha8Rng| {
        Array2::from_shape_fn((d, cfg.r), |_| {
            let v: f64 = StandardNormal.sample(rng);
            scale * v
        })
    };
    let user_codebook = draw_codebook(cfg.d_u, &mut rng);
    let item_codebook = draw_codebook(cfg.d_v, &mut rng);

    let user_content = content_from_codes(
        &true_user_codes,
        &user_codebook,
        cfg.noise,
        Side::User,
        &mut rng,
    );
    let item_content = content_from_codes(
        &true_item_codes,
        &item_codebook,
        cfg.noise,
        Side::Item,
        &mut rng,
    );

    let max_dist = (cfg.r - cfg.min_agree) as u32;
    let mut triples = Vec::new();
    for i in 0..cfg.n_users {
        let bu = true_user_codes.row_words(i);
        for j in 0..cfg.n_items {
            if hamming_words(bu, true_item_codes.row_words(j)) <= max_dist {
                triples.push(Rating {
                    user: i as u32,
                    item: j as u32,
                });
            }
        }
    }

    let mut alive = vec![true; triples.len()];
    thin_entities(
        &triples,
        &mut alive,
        cfg.rare_items,
        cfg.rare_keep,
        cfg.n_items,
        false,
        &mut rng,
    );
    thin_entities(
        &triples,
        &mut alive,
        cfg.rare_users,
        cfg.rare_keep,
        cfg.n_users,
        true,
        &mut rng,
    );
    let survivors: Vec<Rating> = triples
        .into_iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(t, _)| t)
        .collect();

    let ratings = SparseRatings::new(cfg.n_users, cfg.n_items, survivors)
        .expect("indices within bounds");
    PlantedData {
        ratings,
        user_content,
        item_content,
        true_user_codes,
        true_item_codes,
        user_codebook,
        item_codebook,
    }
}
