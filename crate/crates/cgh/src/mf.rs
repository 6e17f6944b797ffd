//! Weighted matrix factorization of the implicit rating matrix.
//!
//! Alternating least squares over the full matrix: observed positives carry
//! confidence `a`, every implicit zero carries confidence `b` (a > b > 0).
//! The per-row normal equations use the usual rank-correction form, so a
//! half-sweep costs O(r^2 * nnz + r^3 * rows) rather than touching every cell.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::SparseRatings;
use crate::error::{CghError, Result};

#[derive(Debug, Clone)]
pub struct MfConfig {
    pub r: usize,
    /// Confidence on observed positives.
    pub a: f64,
    /// Confidence on implicit zeros.
    pub b: f64,
    pub reg: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            r: 50,
            a: 1.0,
            b: 0.01,
            reg: 0.1,
            iters: 15,
            seed: 42,
        }
    }
}

impl MfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(CghError::Config("mf: r must be >= 1".into()));
        }
        if !(self.a > self.b && self.b > 0.0) {
            return Err(CghError::Config("mf: need a > b > 0".into()));
        }
        if self.reg < 0.0 {
            return Err(CghError::Config("mf: reg must be >= 0".into()));
        }
        Ok(())
    }
}

/// Latent factors P (users) and Q (items), r columns each.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    pub p: Array2<f64>,
    pub q: Array2<f64>,
}

const FACTORS_MAGIC: &[u8; 4] = b"CGHF";
const FACTORS_VERSION: u32 = 1;

impl LatentFactors {
    pub fn r(&self) -> usize {
        self.p.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.q.nrows()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(FACTORS_MAGIC)?;
        w.write_u32::<LittleEndian>(FACTORS_VERSION)?;
        w.write_u64::<LittleEndian>(self.r() as u64)?;
        w.write_u64::<LittleEndian>(self.n_users() as u64)?;
        w.write_u64::<LittleEndian>(self.n_items() as u64)?;
        for m in [&self.p, &self.q] {
            for &v in m.as_slice().expect("standard layout") {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |message: &str| CghError::CorruptArtifact {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        let mut rd = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        rd.read_exact(&mut magic)?;
        if &magic != FACTORS_MAGIC {
            return Err(corrupt("bad magic, expected CGHF"));
        }
        if rd.read_u32::<LittleEndian>()? != FACTORS_VERSION {
            return Err(corrupt("unsupported version"));
        }
        let r = rd.read_u64::<LittleEndian>()? as usize;
        let n_users = rd.read_u64::<LittleEndian>()? as usize;
        let n_items = rd.read_u64::<LittleEndian>()? as usize;
        let mut read_matrix = |rows: usize| -> Result<Array2<f64>> {
            let mut data = vec![0.0f64; rows * r];
            for v in data.iter_mut() {
                *v = rd.read_f64::<LittleEndian>()?;
            }
            Array2::from_shape_vec((rows, r), data)
                .map_err(|e| corrupt(&format!("shape: {e}")))
        };
        let p = read_matrix(n_users)?;
        let q = read_matrix(n_items)?;
        Ok(LatentFactors { p, q })
    }
}

/// Solve A x = rhs for symmetric positive-definite A (dense, n x n) by
/// Cholesky factorization. Returns None when a pivot fails, i.e. the system
/// is singular or indefinite.
fn cholesky_solve(a: &Array2<f64>, rhs: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let mut l = a.clone();
    for j in 0..n {
        let mut diag = l[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let diag = diag.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / diag;
        }
    }
    // Forward substitution L y = rhs.
    let mut y = rhs.clone();
    for i in 0..n {
        for k in 0..i {
            let t = y[k];
            y[i] -= l[(i, k)] * t;
        }
        y[i] /= l[(i, i)];
    }
    // Back substitution L^T x = y.
    let mut x = y;
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = x[k];
            x[i] -= l[(k, i)] * t;
        }
        x[i] /= l[(i, i)];
    }
    Some(x)
}

fn init_matrix(rows: usize, r: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let scale = 0.5 / (r as f64).sqrt();
    Array2::from_shape_fn((rows, r), |_| rng.random_range(-scale..scale))
}

/// One ALS half-sweep: re-solve every row of `target` given `other` fixed.
/// For row i with positive set S: A = b G + (a - b) sum_{j in S} q_j q_j^T
/// + reg I and rhs = a sum_{j in S} q_j, where G = other^T other.
fn solve_side<'a>(
    target: &mut Array2<f64>,
    other: &Array2<f64>,
    positives_of: impl Fn(u32) -> &'a [u32],
    cfg: &MfConfig,
    side: &'static str,
) -> Result<()> {
    let r = cfg.r;
    let gram = other.t().dot(other);
    for i in 0..target.nrows() {
        let mut a_mat = &gram * cfg.b;
        for d in 0..r {
            a_mat[(d, d)] += cfg.reg;
        }
        let mut rhs = Array1::zeros(r);
        for &j in positives_of(i as u32) {
            let row = other.row(j as usize);
            for x in 0..r {
                let rx = row[x];
                rhs[x] += cfg.a * rx;
                for y in 0..r {
                    a_mat[(x, y)] += (cfg.a - cfg.b) * rx * row[y];
                }
            }
        }
        match cholesky_solve(&a_mat, &rhs) {
            Some(solution) => target.row_mut(i).assign(&solution),
            None => return Err(CghError::SingularSystem { side, row: i }),
        }
    }
    Ok(())
}

/// Weighted ALS over the full implicit matrix. Deterministic given the seed;
/// the objective is non-increasing across sweeps.
pub fn factorize(ratings: &SparseRatings, cfg: &MfConfig) -> Result<LatentFactors> {
    cfg.validate()?;
    if ratings.is_empty() {
        return Err(CghError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = init_matrix(ratings.n_users(), cfg.r, &mut rng);
    let mut q = init_matrix(ratings.n_items(), cfg.r, &mut rng);

    for _ in 0..cfg.iters {
        solve_side(&mut p, &q, |u| ratings.items_of(u), cfg, "user")?;
        solve_side(&mut q, &p, |j| ratings.users_of(j), cfg, "item")?;
    }
    Ok(LatentFactors { p, q })
}

/// Weighted squared loss plus regularizer:
/// sum_ij C_ij (r_ij - p_i . q_j)^2 + reg (|P|^2 + |Q|^2).
///
/// Evaluated algebraically: the all-cells term b sum (p.q)^2 is
/// tr(P G P^T)-style with G = Q^T Q, then positives are corrected to
/// a (1 - p.q)^2.
pub fn mf_objective(
    ratings: &SparseRatings,
    factors: &LatentFactors,
    cfg: &MfConfig,
) -> Result<f64> {
    if factors.n_users() != ratings.n_users() || factors.n_items() != ratings.n_items() {
        return Err(CghError::DimensionMismatch(format!(
            "factors {}x{} vs ratings {}x{}",
            factors.n_users(),
            factors.n_items(),
            ratings.n_users(),
            ratings.n_items()
        )));
    }
    let gram = factors.q.t().dot(&factors.q);
    let mut total = 0.0;
    for i in 0..factors.n_users() {
        let p_i = factors.p.row(i);
        total += cfg.b * p_i.dot(&gram.dot(&p_i));
    }
    for t in ratings.triples() {
        let pred = factors.p.row(t.user as usize).dot(&factors.q.row(t.item as usize));
        total += cfg.a * (1.0 - pred) * (1.0 - pred) - cfg.b * pred * pred;
    }
    let norm_sq = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>();
    total += cfg.reg * (norm_sq(&factors.p) + norm_sq(&factors.q));
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rating;

    fn brute_force_objective(
        ratings: &SparseRatings,
        factors: &LatentFactors,
        cfg: &MfConfig,
    ) -> f64 {
        let mut total = 0.0;
        for i in 0..ratings.n_users() {
            for j in 0..ratings.n_items() {
                let r_ij = if ratings.is_positive(i as u32, j as u32) { 1.0 } else { 0.0 };
                let c = if r_ij > 0.0 { cfg.a } else { cfg.b };
                let pred = factors.p.row(i).dot(&factors.q.row(j));
                total += c * (r_ij - pred) * (r_ij - pred);
            }
        }
        let norm_sq = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>();
        total + cfg.reg * (norm_sq(&factors.p) + norm_sq(&factors.q))
    }

    fn toy_ratings() -> SparseRatings {
        SparseRatings::new(
            4,
            5,
            vec![
                Rating { user: 0, item: 0 },
                Rating { user: 0, item: 2 },
                Rating { user: 1, item: 1 },
                Rating { user: 2, item: 2 },
                Rating { user: 2, item: 3 },
                Rating { user: 3, item: 4 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn objective_matches_brute_force_double_loop() {
        let ratings = toy_ratings();
        let cfg = MfConfig { r: 3, a: 1.0, b: 0.2, reg: 0.05, iters: 1, seed: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let factors = LatentFactors {
            p: Array2::from_shape_fn((4, 3), |_| rng.random::<f64>() - 0.5),
            q: Array2::from_shape_fn((5, 3), |_| rng.random::<f64>() - 0.5),
        };
        let fast = mf_objective(&ratings, &factors, &cfg).unwrap();
        let slow = brute_force_objective(&ratings, &factors, &cfg);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn objective_zero_factors_single_positive() {
        let ratings = SparseRatings::new(1, 1, vec![Rating { user: 0, item: 0 }]).unwrap();
        let cfg = MfConfig { r: 2, a: 1.0, b: 0.01, reg: 0.0, iters: 1, seed: 1 };
        let factors = LatentFactors {
            p: Array2::zeros((1, 2)),
            q: Array2::zeros((1, 2)),
        };
        let obj = mf_objective(&ratings, &factors, &cfg).unwrap();
        assert!((obj - cfg.a).abs() < 1e-15);
    }

    #[test]
    fn objective_zero_for_exact_factorization() {
        // One user, one item, p.q = 1 exactly, b-weighted zeros absent.
        let ratings = SparseRatings::new(1, 1, vec![Rating { user: 0, item: 0 }]).unwrap();
        let cfg = MfConfig { r: 1, a: 1.0, b: 0.5, reg: 0.0, iters: 1, seed: 1 };
        let factors = LatentFactors {
            p: Array2::from_elem((1, 1), 1.0),
            q: Array2::from_elem((1, 1), 1.0),
        };
        let obj = mf_objective(&ratings, &factors, &cfg).unwrap();
        assert!(obj.abs() < 1e-15);
    }

    #[test]
    fn implicit_zero_carries_weight_b() {
        // Removing one zero cell's contribution changes the brute-force
        // objective by exactly b * (p_i . q_j)^2.
        let ratings = toy_ratings();
        let cfg = MfConfig { r: 2, a: 1.0, b: 0.3, reg: 0.0, iters: 1, seed: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let factors = LatentFactors {
            p: Array2::from_shape_fn((4, 2), |_| rng.random::<f64>() - 0.5),
            q: Array2::from_shape_fn((5, 2), |_| rng.random::<f64>() - 0.5),
        };
        // (1, 0) is a zero cell in toy_ratings.
        assert!(!ratings.is_positive(1, 0));
        let full = brute_force_objective(&ratings, &factors, &cfg);
        let pred = factors.p.row(1).dot(&factors.q.row(0));
        let mut without = 0.0;
        for i in 0..4 {
            for j in 0..5 {
                if (i, j) == (1, 0) {
                    continue;
                }
                let r_ij = if ratings.is_positive(i as u32, j as u32) { 1.0 } else { 0.0 };
                let c = if r_ij > 0.0 { cfg.a } else { cfg.b };
                let p = factors.p.row(i).dot(&factors.q.row(j));
                without += c * (r_ij - p) * (r_ij - p);
            }
        }
        assert!((full - without - cfg.b * pred * pred).abs() < 1e-12);
    }

    #[test]
    fn als_objective_non_increasing() {
        let ratings = synthetic(60, 50, 400, 17);
        let cfg = MfConfig { r: 8, a: 1.0, b: 0.05, reg: 0.1, iters: 1, seed: 4 };
        // Run sweep by sweep and watch the objective.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = init_matrix(ratings.n_users(), cfg.r, &mut rng);
        let mut q = init_matrix(ratings.n_items(), cfg.r, &mut rng);
        let mut prev = mf_objective(&ratings, &LatentFactors { p: p.clone(), q: q.clone() }, &cfg).unwrap();
        for _ in 0..8 {
            solve_side(&mut p, &q, |u| ratings.items_of(u), &cfg, "user").unwrap();
            solve_side(&mut q, &p, |j| ratings.users_of(j), &cfg, "item").unwrap();
            let obj = mf_objective(&ratings, &LatentFactors { p: p.clone(), q: q.clone() }, &cfg).unwrap();
            assert!(obj <= prev + 1e-9, "objective rose: {prev} -> {obj}");
            prev = obj;
        }
    }

    fn synthetic(n_users: usize, n_items: usize, n: usize, seed: u64) -> SparseRatings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut triples = Vec::new();
        for _ in 0..n * 2 {
            triples.push(Rating {
                user: rng.random_range(0..n_users as u32),
                item: rng.random_range(0..n_items as u32),
            });
        }
        triples.sort_unstable_by_key(|t| (t.user, t.item));
        triples.dedup();
        triples.truncate(n);
        SparseRatings::new(n_users, n_items, triples).unwrap()
    }

    #[test]
    fn seed_determinism() {
        let ratings = synthetic(30, 30, 150, 23);
        let cfg = MfConfig { r: 5, a: 1.0, b: 0.02, reg: 0.05, iters: 6, seed: 9 };
        let f1 = factorize(&ratings, &cfg).unwrap();
        let f2 = factorize(&ratings, &cfg).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn planted_rank_one_recovered() {
        // R = 1 where p_i q_j >= tau, a planted rank-1 structure; with tiny b
        // and reg the observed ones reconstruct to better than 1e-3.
        let n_users = 40;
        let n_items = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pu: Vec<f64> = (0..n_users).map(|_| rng.random::<f64>() + 0.5).collect();
        let qv: Vec<f64> = (0..n_items).map(|_| rng.random::<f64>() + 0.5).collect();
        let mut triples = Vec::new();
        for i in 0..n_users {
            for j in 0..n_items {
                if pu[i] * qv[j] >= 1.0 {
                    triples.push(Rating { user: i as u32, item: j as u32 });
                }
            }
        }
        let ratings = SparseRatings::new(n_users, n_items, triples).unwrap();
        assert!(ratings.len() > 100);
        let cfg = MfConfig { r: 1, a: 1.0, b: 1e-5, reg: 1e-9, iters: 30, seed: 6 };
        let factors = factorize(&ratings, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for t in ratings.triples() {
            let pred = factors.p.row(t.user as usize).dot(&factors.q.row(t.item as usize));
            worst = worst.max((pred - 1.0).abs());
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn empty_ratings_rejected() {
        let ratings = SparseRatings::empty(3, 3);
        let cfg = MfConfig::default();
        assert!(matches!(
            factorize(&ratings, &cfg),
            Err(CghError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn r50_produces_50_columns() {
        let ratings = synthetic(25, 25, 120, 31);
        let cfg = MfConfig { r: 50, a: 1.0, b: 0.01, reg: 0.1, iters: 2, seed: 7 };
        let factors = factorize(&ratings, &cfg).unwrap();
        assert_eq!(factors.p.ncols(), 50);
        assert_eq!(factors.q.ncols(), 50);
    }

    #[test]
    fn singular_system_reported() {
        // reg = 0 with rank-deficient gram: single rating, r = 2. The user
        // solve sees A = b Q^T Q + (a-b) q q^T which is rank 1.
        let ratings = SparseRatings::new(1, 1, vec![Rating { user: 0, item: 0 }]).unwrap();
        let cfg = MfConfig { r: 2, a: 1.0, b: 0.5, reg: 0.0, iters: 1, seed: 3 };
        assert!(matches!(
            factorize(&ratings, &cfg),
            Err(CghError::SingularSystem { .. })
        ));
    }

    #[test]
    fn factors_save_load_round_trip() {
        let ratings = synthetic(10, 12, 50, 41);
        let cfg = MfConfig { r: 4, a: 1.0, b: 0.05, reg: 0.1, iters: 3, seed: 11 };
        let factors = factorize(&ratings, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("factors.bin");
        factors.save(&path).unwrap();
        let back = LatentFactors::load(&path).unwrap();
        assert_eq!(factors, back);

        let bytes1 = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = M M^T + I is SPD; check A x = rhs.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>() - 0.5);
        let mut a = m.dot(&m.t());
        for d in 0..4 {
            a[(d, d)] += 1.0;
        }
        let rhs = Array1::from_shape_fn(4, |_| rng.random::<f64>() - 0.5);
        let x = cholesky_solve(&a, &rhs).unwrap();
        let resid = &a.dot(&x) - &rhs;
        assert!(resid.iter().all(|v| v.abs() < 1e-10));
    }
}
