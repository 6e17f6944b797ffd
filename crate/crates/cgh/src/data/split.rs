//! Warm / cold-user / cold-item dataset splitting.
//!
//! Entities with fewer than `cold_threshold` positive ratings in the full set
//! are cold. A rating touching a cold item goes to the cold-item set; failing
//! that, a cold user sends it to the cold-user set; everything else is warm
//! and split into train/test by a seeded draw.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ratings::{Rating, SparseRatings};
use crate::error::{CghError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub warm_train: SparseRatings,
    pub warm_test: SparseRatings,
    pub cold_user: SparseRatings,
    pub cold_item: SparseRatings,
    pub cold_user_ids: BTreeSet<u32>,
    pub cold_item_ids: BTreeSet<u32>,
}

impl DatasetSplit {
    pub fn total_ratings(&self) -> usize {
        self.warm_train.len() + self.warm_test.len() + self.cold_user.len() + self.cold_item.len()
    }

    /// Persist as four rating files plus an id-set file inside `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.warm_train.save(&dir.join("warm_train.tsv"))?;
        self.warm_test.save(&dir.join("warm_test.tsv"))?;
        self.cold_user.save(&dir.join("cold_user.tsv"))?;
        self.cold_item.save(&dir.join("cold_item.tsv"))?;
        let mut w = BufWriter::new(fs::File::create(dir.join("cold_ids.tsv"))?);
        for id in &self.cold_user_ids {
            writeln!(w, "user\t{id}")?;
        }
        for id in &self.cold_item_ids {
            writeln!(w, "item\t{id}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let warm_train = SparseRatings::load(&dir.join("warm_train.tsv"))?;
        let warm_test = SparseRatings::load(&dir.join("warm_test.tsv"))?;
        let cold_user = SparseRatings::load(&dir.join("cold_user.tsv"))?;
        let cold_item = SparseRatings::load(&dir.join("cold_item.tsv"))?;
        let mut cold_user_ids = BTreeSet::new();
        let mut cold_item_ids = BTreeSet::new();
        let ids_path = dir.join("cold_ids.tsv");
        let file = BufReader::new(fs::File::open(&ids_path)?);
        for (idx, line) in file.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let err = || CghError::Parse {
                path: ids_path.clone(),
                line: idx + 1,
                message: "expected `user|item<TAB>id`".into(),
            };
            let kind = fields.next().ok_or_else(err)?;
            let id: u32 = fields.next().ok_or_else(err)?.parse().map_err(|_| err())?;
            match kind {
                "user" => cold_user_ids.insert(id),
                "item" => cold_item_ids.insert(id),
                _ => return Err(err()),
            };
        }
        Ok(DatasetSplit {
            warm_train,
            warm_test,
            cold_user,
            cold_item,
            cold_user_ids,
            cold_item_ids,
        })
    }
}

/// Split `ratings` deterministically. `warm_test_frac` is the probability a
/// warm rating lands in the test set.
pub fn split_dataset(
    ratings: &SparseRatings,
    cold_threshold: usize,
    warm_test_frac: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    assert!(cold_threshold >= 1, "cold_threshold must be >= 1");
    assert!(
        warm_test_frac > 0.0 && warm_test_frac < 1.0,
        "warm_test_frac must lie in (0, 1)"
    );

    let user_counts = ratings.user_counts();
    let item_counts = ratings.item_counts();
    let cold_user_ids: BTreeSet<u32> = (0..ratings.n_users() as u32)
        .filter(|&u| user_counts[u as usize] < cold_threshold)
        .collect();
    let cold_item_ids: BTreeSet<u32> = (0..ratings.n_items() as u32)
        .filter(|&j| item_counts[j as usize] < cold_threshold)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warm_train = Vec::new();
    let mut warm_test = Vec::new();
    let mut cold_user = Vec::new();
    let mut cold_item = Vec::new();

    // Triples iterate in canonical (user, item) order, so the draw sequence
    // is reproducible.
    for &t in ratings.triples() {
        if cold_item_ids.contains(&t.item) {
            cold_item.push(t);
        } else if cold_user_ids.contains(&t.user) {
            cold_user.push(t);
        } else if rng.random::<f64>() < warm_test_frac {
            warm_test.push(t);
        } else {
            warm_train.push(t);
        }
    }

    if warm_train.is_empty() {
        return Err(CghError::DegenerateSplit);
    }

    let build = |triples: Vec<Rating>| {
        SparseRatings::new(ratings.n_users(), ratings.n_items(), triples)
    };
    Ok(DatasetSplit {
        warm_train: build(warm_train)?,
        warm_test: build(warm_test)?,
        cold_user: build(cold_user)?,
        cold_item: build(cold_item)?,
        cold_user_ids,
        cold_item_ids,
    })
}
