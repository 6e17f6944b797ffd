//! Potential-user mining for an item through the generative step: encode the
//! item, pick the best-matching user-side code, decode a synthetic user
//! content vector, and nearest-neighbor search the real user set. Works for
//! cold-start items since no ratings enter the path.

use ndarray::Array1;

use crate::data::{ContentMatrix, Side};
use crate::error::{CghError, Result};
use crate::index::{RankedEntry, RankedList};
use crate::model::codes::{hamming_words, BinaryCode, BinaryCodeMatrix};
use crate::model::{decode, CghModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodePolicy {
    /// b_p = d_j, the unconstrained maximizer of delta.
    Mirror,
    /// The existing user code with maximal delta, ties by ascending user id.
    Constrained,
}

impl CodePolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mirror" => Ok(CodePolicy::Mirror),
            "constrained" => Ok(CodePolicy::Constrained),
            other => Err(CghError::Config(format!("unknown code policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(CghError::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Pick the user-side code maximizing delta(b, d_j).
pub fn select_user_code(
    item_code: &BinaryCode,
    policy: CodePolicy,
    user_codes: Option<&BinaryCodeMatrix>,
) -> Result<BinaryCode> {
    match policy {
        CodePolicy::Mirror => Ok(item_code.clone()),
        CodePolicy::Constrained => {
            let codes = user_codes.ok_or(CghError::MissingUserCodes)?;
            if codes.n() == 0 {
                return Err(CghError::MissingUserCodes);
            }
            if codes.r() != item_code.r() {
                return Err(CghError::LengthMismatch {
                    left: codes.r(),
                    right: item_code.r(),
                });
            }
            let mut best = 0usize;
            let mut best_dist = u32::MAX;
            for i in 0..codes.n() {
                let dist = hamming_words(item_code.words(), codes.row_words(i));
                if dist < best_dist {
                    best_dist = dist;
                    best = i;
                }
            }
            Ok(codes.row(best))
        }
    }
}

/// Synthetic user content: the user-side Gaussian mean C_u . b_p.
pub fn generate_user(code: &BinaryCode, model: &CghModel) -> Result<Array1<f64>> {
    decode(code, &model.user.decoder)
}

fn distance(metric: Metric, query: &[f64], query_norm_sq: f64, content: &ContentMatrix, id: u32) -> f64 {
    let row_dot = content.row_dot(id as usize, query);
    let row_norm_sq = content.row_norm_sq(id as usize);
    match metric {
        Metric::Euclidean => {
            (query_norm_sq - 2.0 * row_dot + row_norm_sq).max(0.0).sqrt()
        }
        Metric::Cosine => {
            let denom = query_norm_sq.sqrt() * row_norm_sq.sqrt();
            if denom == 0.0 {
                1.0
            } else {
                1.0 - row_dot / denom
            }
        }
    }
}

/// Exact linear-scan k nearest candidates to `query` among content rows,
/// ascending distance, ties by ascending id.
pub fn knn_users(
    query: &Array1<f64>,
    user_content: &ContentMatrix,
    candidates: &[u32],
    k: usize,
    metric: Metric,
) -> Result<RankedList> {
    if k > candidates.len() {
        return Err(CghError::KExceedsN {
            k,
            n: candidates.len(),
        });
    }
    if query.len() != user_content.dim() {
        return Err(CghError::LengthMismatch {
            left: query.len(),
            right: user_content.dim(),
        });
    }
    let q = query.as_slice().expect("standard layout");
    let q_norm_sq: f64 = q.iter().map(|v| v * v).sum();
    let mut scored: Vec<(f64, u32)> = candidates
        .iter()
        .map(|&id| (distance(metric, q, q_norm_sq, user_content, id), id))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    Ok(RankedList {
        entries: scored
            .into_iter()
            .map(|(score, id)| RankedEntry { id, score })
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct PotentialUserQuery<'a> {
    /// Sparse content row of the item, dim d_v.
    pub item_content: &'a [(u32, f64)],
    /// Latent factor of the item; None zero-fills (cold-start).
    pub item_factor: Option<&'a [f64]>,
    pub k: usize,
    /// Candidate user ids; None means every user in the content matrix.
    pub candidates: Option<Vec<u32>>,
    pub policy: CodePolicy,
    pub metric: Metric,
}

#[derive(Debug, Clone)]
pub struct PotentialUserResult {
    pub synthetic_user: Array1<f64>,
    pub selected_code: BinaryCode,
    pub item_code: BinaryCode,
    pub ranked: RankedList,
}

/// The full mining pipeline: encode item -> select user code -> decode
/// synthetic user -> nearest neighbors over real users. Deterministic.
pub fn mine_potential_users(
    query: &PotentialUserQuery<'_>,
    model: &CghModel,
    user_content: &ContentMatrix,
    user_codes: Option<&BinaryCodeMatrix>,
) -> Result<PotentialUserResult> {
    let item_code = model.encode_map_for(Side::Item, query.item_content, query.item_factor)?;
    let selected_code = select_user_code(&item_code, query.policy, user_codes)?;
    let synthetic_user = generate_user(&selected_code, model)?;
    let all_candidates: Vec<u32>;
    let candidates: &[u32] = match &query.candidates {
        Some(c) => c,
        None => {
            all_candidates = (0..user_content.n_rows() as u32).collect();
            &all_candidates
        }
    };
    let ranked = knn_users(&synthetic_user, user_content, candidates, query.k, query.metric)?;
    Ok(PotentialUserResult {
        synthetic_user,
        selected_code,
        item_code,
        ranked,
    })
}
