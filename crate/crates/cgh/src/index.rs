//! Hamming-space and real-space top-k ranking over entity codes, plus the
//! timing benchmark comparing the two retrieval backends.
//!
//! Both backends use a bounded selection heap of size k rather than a full
//! sort, so a query allocates O(k) beyond the index itself. Ties are broken
//! by ascending id everywhere.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CghError, Result};
use crate::model::codes::{hamming_words, BinaryCode, BinaryCodeMatrix};

/// Number of differing bits between two codes of equal length.
pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.r() != b.r() {
        return Err(CghError::LengthMismatch {
            left: a.r(),
            right: b.r(),
        });
    }
    Ok(hamming_words(a.words(), b.words()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub id: u32,
    pub score: f64,
}

/// Ranked (id, score) pairs. Scores are Hamming distances (ascending) or
/// inner products (descending) depending on the backend that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// Heap candidates order worst-first so the heap top is the weakest kept entry.

#[derive(PartialEq, Eq)]
struct HammingCand {
    dist: u32,
    id: u32,
}

impl Ord for HammingCand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for HammingCand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct RealCand {
    score: f64,
    id: u32,
}

impl PartialEq for RealCand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RealCand {}

impl Ord for RealCand {
    // Worse = smaller inner product, ties broken toward larger id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for RealCand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn bounded_push<T: Ord>(heap: &mut BinaryHeap<T>, k: usize, cand: T) {
    if heap.len() < k {
        heap.push(cand);
    } else if let Some(mut top) = heap.peek_mut() {
        if cand < *top {
            *top = cand;
        }
    }
}

/// Immutable linear-scan index over bit-packed codes.
#[derive(Debug, Clone)]
pub struct HammingIndex {
    codes: BinaryCodeMatrix,
    ids: Vec<u32>,
}

impl HammingIndex {
    pub fn new(codes: BinaryCodeMatrix, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != codes.n() {
            return Err(CghError::LengthMismatch {
                left: ids.len(),
                right: codes.n(),
            });
        }
        Ok(HammingIndex { codes, ids })
    }

    /// Index whose ids are the row positions 0..n.
    pub fn from_codes(codes: BinaryCodeMatrix) -> Self {
        let ids = (0..codes.n() as u32).collect();
        HammingIndex { codes, ids }
    }

    pub fn len(&self) -> usize {
        self.codes.n()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.n() == 0
    }

    pub fn r(&self) -> usize {
        self.codes.r()
    }

    /// The k ids nearest to `query` in Hamming distance, ties by ascending id.
    pub fn top_k(&self, query: &BinaryCode, k: usize) -> Result<RankedList> {
        if query.r() != self.codes.r() {
            return Err(CghError::LengthMismatch {
                left: query.r(),
                right: self.codes.r(),
            });
        }
        if k > self.codes.n() {
            return Err(CghError::KExceedsN {
                k,
                n: self.codes.n(),
            });
        }
        let qw = query.words();
        let mut heap: BinaryHeap<HammingCand> = BinaryHeap::with_capacity(k + 1);
        for pos in 0..self.codes.n() {
            let dist = hamming_words(qw, self.codes.row_words(pos));
            bounded_push(&mut heap, k, HammingCand { dist, id: self.ids[pos] });
        }
        let entries = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| RankedEntry {
                id: c.id,
                score: c.dist as f64,
            })
            .collect();
        Ok(RankedList { entries })
    }
}

/// Top-k rows of `vectors` by inner product with `query`, descending, ties by
/// ascending row id.
pub fn real_top_k(vectors: &Array2<f64>, query: ArrayView1<'_, f64>, k: usize) -> Result<RankedList> {
    if query.len() != vectors.ncols() {
        return Err(CghError::LengthMismatch {
            left: query.len(),
            right: vectors.ncols(),
        });
    }
    let n = vectors.nrows();
    if k > n {
        return Err(CghError::KExceedsN { k, n });
    }
    let q = query
        .as_slice()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| query.to_vec());
    let mut heap: BinaryHeap<RealCand> = BinaryHeap::with_capacity(k + 1);
    for (pos, row) in vectors.rows().into_iter().enumerate() {
        let row = row.as_slice().expect("standard layout");
        let mut score = 0.0;
        for (a, b) in row.iter().zip(&q) {
            score += a * b;
        }
        bounded_push(&mut heap, k, RealCand { score, id: pos as u32 });
    }
    let entries = heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| RankedEntry {
            id: c.id,
            score: c.score,
        })
        .collect();
    Ok(RankedList { entries })
}

/// One measured benchmark row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub backend: &'static str,
    pub k: usize,
    pub r: usize,
    pub median_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub r: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![80_000, 320_000, 1_280_000],
            r: 50,
            k: 10,
            trials: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    /// Per size: the Hamming and real ranked results, for determinism checks.
    pub hamming_results: Vec<RankedList>,
    pub real_results: Vec<RankedList>,
}

impl BenchOutcome {
    /// CSV with header `n,backend,k,r,median_seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,backend,k,r,median_seconds\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.9}\n",
                row.n, row.backend, row.k, row.r, row.median_seconds
            ));
        }
        out
    }
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn sign_code(v: &[f64]) -> BinaryCode {
    // sign(0) maps to bit 1, matching the encoder's MAP convention.
    let bits: Vec<bool> = v.iter().map(|&x| x >= 0.0).collect();
    BinaryCode::from_bits(&bits)
}

/// Time Hamming vs real-valued top-k over synthetic data: standard-normal
/// vectors, codes derived from them by the sign function. Ranked outputs are
/// captured outside the timed loop and do not depend on `trials`.
pub fn bench(cfg: &BenchConfig) -> BenchOutcome {
    let mut rows = Vec::new();
    let mut hamming_results = Vec::new();
    let mut real_results = Vec::new();

    for (size_idx, &n) in cfg.sizes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(size_idx as u64 + 1);

        let query_vec: Vec<f64> = (0..cfg.r)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let query_code = sign_code(&query_vec);

        let vectors =
            Array2::from_shape_fn((n, cfg.r), |_| StandardNormal.sample(&mut rng));
        let mut codes = BinaryCodeMatrix::zeros(n, cfg.r);
        for (i, row) in vectors.rows().into_iter().enumerate() {
            let code = sign_code(row.as_slice().expect("standard layout"));
            codes.set_row(i, &code).expect("uniform r");
        }

        let query_view = ArrayView1::from(&query_vec);
        let real_ranked = real_top_k(&vectors, query_view, cfg.k).expect("k <= n");
        let mut real_times = Vec::with_capacity(cfg.trials);
        for _ in 0..cfg.trials {
            let start = Instant::now();
            let out = real_top_k(&vectors, query_view, cfg.k).expect("k <= n");
            real_times.push(start.elapsed().as_secs_f64());
            assert_eq!(out.entries.len(), cfg.k);
        }
        drop(vectors);

        let index = HammingIndex::from_codes(codes);
        let hamming_ranked = index.top_k(&query_code, cfg.k).expect("k <= n");
        let mut hamming_times = Vec::with_capacity(cfg.trials);
        for _ in 0..cfg.trials {
            let start = Instant::now();
            let out = index.top_k(&query_code, cfg.k).expect("k <= n");
            hamming_times.push(start.elapsed().as_secs_f64());
            assert_eq!(out.entries.len(), cfg.k);
        }

        rows.push(BenchRow {
            n,
            backend: "hamming",
            k: cfg.k,
            r: cfg.r,
            median_seconds: median(&mut hamming_times),
        });
        rows.push(BenchRow {
            n,
            backend: "real",
            k: cfg.k,
            r: cfg.r,
            median_seconds: median(&mut real_times),
        });
        hamming_results.push(hamming_ranked);
        real_results.push(real_ranked);
    }

    BenchOutcome {
        rows,
        hamming_results,
        real_results,
    }
}

/// Brute-force Hamming ranking, the oracle for `HammingIndex::top_k`.
pub fn brute_force_hamming_top_k(
    codes: &BinaryCodeMatrix,
    ids: &[u32],
    query: &BinaryCode,
    k: usize,
) -> RankedList {
    let mut all: Vec<(u32, u32)> = (0..codes.n())
        .map(|pos| (hamming_words(query.words(), codes.row_words(pos)), ids[pos]))
        .collect();
    all.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    RankedList {
        entries: all
            .into_iter()
            .take(k)
            .map(|(dist, id)| RankedEntry {
                id,
                score: dist as f64,
            })
            .collect(),
    }
}

/// Brute-force inner-product ranking, the oracle for `real_top_k`. Uses the
/// same sequential accumulation as the scan so scores agree bit-for-bit.
pub fn brute_force_real_top_k(
    vectors: &Array2<f64>,
    query: ArrayView1<'_, f64>,
    k: usize,
) -> RankedList {
    let mut all: Vec<(f64, u32)> = vectors
        .rows()
        .into_iter()
        .enumerate()
        .map(|(pos, row)| {
            let mut score = 0.0;
            for (a, b) in row.iter().zip(query.iter()) {
                score += a * b;
            }
            (score, pos as u32)
        })
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    RankedList {
        entries: all
            .into_iter()
            .take(k)
            .map(|(score, id)| RankedEntry { id, score })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_codes(n: usize, r: usize, rng: &mut ChaCha8Rng) -> BinaryCodeMatrix {
        let mut m = BinaryCodeMatrix::zeros(n, r);
        for i in 0..n {
            let bits: Vec<bool> = (0..r).map(|_| rng.random::<bool>()).collect();
            m.set_row(i, &BinaryCode::from_bits(&bits)).unwrap();
        }
        m
    }

    #[test]
    fn hamming_distance_identical_is_zero() {
        let c = BinaryCode::from_bits(&[true, false, true, true]);
        assert_eq!(hamming_distance(&c, &c).unwrap(), 0);
    }

    #[test]
    fn hamming_distance_small_example() {
        // 1010 vs 0110 differ in the first two positions.
        let a = BinaryCode::from_bits(&[true, false, true, false]);
        let b = BinaryCode::from_bits(&[false, true, true, false]);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 2);
    }

    #[test]
    fn hamming_distance_matches_bit_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let bits_a: Vec<bool> = (0..50).map(|_| rng.random::<bool>()).collect();
            let bits_b: Vec<bool> = (0..50).map(|_| rng.random::<bool>()).collect();
            let naive = bits_a
                .iter()
                .zip(&bits_b)
                .filter(|(x, y)| x != y)
                .count() as u32;
            let a = BinaryCode::from_bits(&bits_a);
            let b = BinaryCode::from_bits(&bits_b);
            assert_eq!(hamming_distance(&a, &b).unwrap(), naive);
        }
    }

    #[test]
    fn hamming_distance_length_mismatch() {
        let a = BinaryCode::zeros(4);
        let b = BinaryCode::zeros(5);
        assert!(matches!(
            hamming_distance(&a, &b),
            Err(CghError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn hamming_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let codes: Vec<BinaryCode> = (0..3)
                .map(|_| {
                    let bits: Vec<bool> = (0..64).map(|_| rng.random::<bool>()).collect();
                    BinaryCode::from_bits(&bits)
                })
                .collect();
            let dab = hamming_distance(&codes[0], &codes[1]).unwrap();
            let dbc = hamming_distance(&codes[1], &codes[2]).unwrap();
            let dac = hamming_distance(&codes[0], &codes[2]).unwrap();
            assert!(dac <= dab + dbc);
        }
    }

    #[test]
    fn top_k_exact_match_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let codes = random_codes(200, 32, &mut rng);
        let query = codes.row(57);
        let index = HammingIndex::from_codes(codes);
        let out = index.top_k(&query, 5).unwrap();
        assert_eq!(out.entries[0].score, 0.0);
        // Lowest id among exact matches wins; 57 is an exact match.
        assert!(out.entries[0].id <= 57);
    }

    #[test]
    fn top_k_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let codes = random_codes(500, 50, &mut rng);
        let ids: Vec<u32> = (0..500).collect();
        let index = HammingIndex::from_codes(codes.clone());
        for _ in 0..50 {
            let bits: Vec<bool> = (0..50).map(|_| rng.random::<bool>()).collect();
            let query = BinaryCode::from_bits(&bits);
            let got = index.top_k(&query, 10).unwrap();
            let want = brute_force_hamming_top_k(&codes, &ids, &query, 10);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn top_k_full_ranking_is_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let codes = random_codes(64, 16, &mut rng);
        let index = HammingIndex::from_codes(codes);
        let query = BinaryCode::zeros(16);
        let out = index.top_k(&query, 64).unwrap();
        let mut ids = out.ids();
        ids.sort_unstable();
        assert_eq!(ids, (0..64u32).collect::<Vec<_>>());
    }

    #[test]
    fn top_k_k_exceeds_n() {
        let codes = BinaryCodeMatrix::zeros(3, 8);
        let index = HammingIndex::from_codes(codes);
        let query = BinaryCode::zeros(8);
        assert!(matches!(
            index.top_k(&query, 4),
            Err(CghError::KExceedsN { k: 4, n: 3 })
        ));
    }

    #[test]
    fn real_top_k_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let vectors = Array2::from_shape_fn((1000, 8), |_| rng.random::<f64>() - 0.5);
        for _ in 0..20 {
            let query: Vec<f64> = (0..8).map(|_| rng.random::<f64>() - 0.5).collect();
            let qv = ArrayView1::from(&query);
            let got = real_top_k(&vectors, qv, 10).unwrap();
            let want = brute_force_real_top_k(&vectors, qv, 10);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn real_top_k_self_row_first_with_unit_norms() {
        // Orthonormal-ish rows: identity matrix, query = row 2.
        let vectors = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let query = vectors.row(2).to_owned();
        let out = real_top_k(&vectors, query.view(), 1).unwrap();
        assert_eq!(out.entries[0].id, 2);
    }

    #[test]
    fn real_top_k_k1_is_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let vectors = Array2::from_shape_fn((100, 6), |_| rng.random::<f64>() - 0.5);
        let query: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let qv = ArrayView1::from(&query);
        let got = real_top_k(&vectors, qv, 1).unwrap();
        let want = brute_force_real_top_k(&vectors, qv, 1);
        assert_eq!(got.entries[0].id, want.entries[0].id);
    }

    #[test]
    fn bench_results_do_not_depend_on_trials() {
        let base = BenchConfig {
            sizes: vec![2_000, 4_000],
            r: 50,
            k: 10,
            trials: 1,
            seed: 99,
        };
        let mut more = base.clone();
        more.trials = 9;
        let a = bench(&base);
        let b = bench(&more);
        assert_eq!(a.hamming_results, b.hamming_results);
        assert_eq!(a.real_results, b.real_results);
    }
}
