//! Implicit-feedback rating triples.
//!
//! Only positive entries are stored; absent cells are implicit zeros. The
//! text format is one `user<TAB>item<TAB>value` triple per line (any ASCII
//! whitespace separates fields), values coerced to {0,1}.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{CghError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
}

/// Deduplicated positive ratings with CSR-style adjacency in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseRatings {
    n_users: usize,
    n_items: usize,
    /// Sorted by (user, item).
    triples: Vec<Rating>,
    user_offsets: Vec<usize>,
    items_by_user: Vec<u32>,
    item_offsets: Vec<usize>,
    users_by_item: Vec<u32>,
}

impl SparseRatings {
    /// Build from positive triples with explicit dimensions. Triples may come
    /// in any order; exact duplicates collapse.
    pub fn new(n_users: usize, n_items: usize, mut triples: Vec<Rating>) -> Result<Self> {
        for t in &triples {
            if (t.user as usize) >= n_users || (t.item as usize) >= n_items {
                return Err(CghError::DimensionMismatch(format!(
                    "rating ({}, {}) outside {}x{}",
                    t.user, t.item, n_users, n_items
                )));
            }
        }
        triples.sort_unstable_by_key(|t| (t.user, t.item));
        triples.dedup();

        let mut user_offsets = vec![0usize; n_users + 1];
        for t in &triples {
            user_offsets[t.user as usize + 1] += 1;
        }
        for i in 0..n_users {
            user_offsets[i + 1] += user_offsets[i];
        }
        let items_by_user = triples.iter().map(|t| t.item).collect();

        let mut item_offsets = vec![0usize; n_items + 1];
        for t in &triples {
            item_offsets[t.item as usize + 1] += 1;
        }
        for j in 0..n_items {
            item_offsets[j + 1] += item_offsets[j];
        }
        let mut users_by_item = vec![0u32; triples.len()];
        let mut cursor = item_offsets.clone();
        for t in &triples {
            users_by_item[cursor[t.item as usize]] = t.user;
            cursor[t.item as usize] += 1;
        }

        Ok(SparseRatings {
            n_users,
            n_items,
            triples,
            user_offsets,
            items_by_user,
            item_offsets,
            users_by_item,
        })
    }

    pub fn empty(n_users: usize, n_items: usize) -> Self {
        SparseRatings::new(n_users, n_items, Vec::new()).expect("no triples to validate")
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Number of stored positive ratings.
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Rating] {
        &self.triples
    }

    /// Items positively rated by `user`, ascending.
    pub fn items_of(&self, user: u32) -> &[u32] {
        let u = user as usize;
        &self.items_by_user[self.user_offsets[u]..self.user_offsets[u + 1]]
    }

    /// Users who positively rated `item`, ascending.
    pub fn users_of(&self, item: u32) -> &[u32] {
        let j = item as usize;
        &self.users_by_item[self.item_offsets[j]..self.item_offsets[j + 1]]
    }

    pub fn is_positive(&self, user: u32, item: u32) -> bool {
        self.items_of(user).binary_search(&item).is_ok()
    }

    pub fn user_counts(&self) -> Vec<usize> {
        (0..self.n_users)
            .map(|u| self.user_offsets[u + 1] - self.user_offsets[u])
            .collect()
    }

    pub fn item_counts(&self) -> Vec<usize> {
        (0..self.n_items)
            .map(|j| self.item_offsets[j + 1] - self.item_offsets[j])
            .collect()
    }

    /// Canonical text form: sorted `user<TAB>item<TAB>1` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# ratings n_users={} n_items={}", self.n_users, self.n_items)?;
        for t in &self.triples {
            writeln!(w, "{}\t{}\t1", t.user, t.item)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a file written by [`SparseRatings::save`], restoring dimensions
    /// from the header line.
    pub fn load(path: &Path) -> Result<Self> {
        let file = BufReader::new(File::open(path)?);
        let mut n_users = None;
        let mut n_items = None;
        let mut triples = Vec::new();
        for (idx, line) in file.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("n_users=") {
                        n_users = v.parse::<usize>().ok();
                    } else if let Some(v) = field.strip_prefix("n_items=") {
                        n_items = v.parse::<usize>().ok();
                    }
                }
                continue;
            }
            let (user, item, value) = parse_triple(path, line_no, trimmed)?;
            if value > 0.0 {
                triples.push(Rating { user, item });
            }
        }
        match (n_users, n_items) {
            (Some(nu), Some(ni)) => SparseRatings::new(nu, ni, triples),
            _ => {
                let nu = triples.iter().map(|t| t.user as usize + 1).max().unwrap_or(0);
                let ni = triples.iter().map(|t| t.item as usize + 1).max().unwrap_or(0);
                SparseRatings::new(nu, ni, triples)
            }
        }
    }
}

fn parse_triple(path: &Path, line_no: usize, line: &str) -> Result<(u32, u32, f64)> {
    let err = |message: String| CghError::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let mut fields = line.split_whitespace();
    let user = fields
        .next()
        .ok_or_else(|| err("missing user field".into()))?
        .parse::<u32>()
        .map_err(|e| err(format!("bad user id: {e}")))?;
    let item = fields
        .next()
        .ok_or_else(|| err("missing item field".into()))?
        .parse::<u32>()
        .map_err(|e| err(format!("bad item id: {e}")))?;
    let value = fields
        .next()
        .ok_or_else(|| err("missing value field".into()))?
        .parse::<f64>()
        .map_err(|e| err(format!("bad value: {e}")))?;
    if fields.next().is_some() {
        return Err(err("trailing fields".into()));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(err(format!("value {value} outside [0, 1]")));
    }
    Ok((user, item, value))
}

/// Parse raw `user<TAB>item<TAB>value` triples. Values in [0,1] are coerced
/// to {0,1} (anything positive is a positive rating); duplicate pairs with
/// conflicting coerced values are an error, identical ones collapse.
pub fn load_ratings(path: &Path) -> Result<SparseRatings> {
    let file = BufReader::new(File::open(path)?);
    let mut seen: HashMap<(u32, u32), bool> = HashMap::new();
    let mut order: Vec<(u32, u32)> = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (user, item, value) = parse_triple(path, idx + 1, trimmed)?;
        let positive = value > 0.0;
        match seen.get(&(user, item)) {
            Some(&prev) if prev != positive => {
                return Err(CghError::DuplicateEntry { user, item });
            }
            Some(_) => {}
            None => {
                seen.insert((user, item), positive);
                order.push((user, item));
            }
        }
    }
    let triples: Vec<Rating> = order
        .into_iter()
        .filter(|pair| seen[pair])
        .map(|(user, item)| Rating { user, item })
        .collect();
    let n_users = seen.keys().map(|&(u, _)| u as usize + 1).max().unwrap_or(0);
    let n_items = seen.keys().map(|&(_, i)| i as usize + 1).max().unwrap_or(0);
    SparseRatings::new(n_users, n_items, triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.tsv");
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn load_two_triples() {
        let (_dir, path) = write_file("0\t0\t1\n1\t2\t1\n");
        let r = load_ratings(&path).unwrap();
        assert_eq!(r.n_users(), 2);
        assert_eq!(r.n_items(), 3);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn load_empty_file() {
        let (_dir, path) = write_file("");
        let r = load_ratings(&path).unwrap();
        assert_eq!(r.n_users(), 0);
        assert_eq!(r.n_items(), 0);
        assert_eq!(r.len(), 0);
    }

    #[test]
    fn identical_duplicates_collapse() {
        let (_dir, path) = write_file("0\t0\t1\n0\t0\t1\n");
        let r = load_ratings(&path).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        let (_dir, path) = write_file("0\t0\t1\n0\t0\t0\n");
        assert!(matches!(
            load_ratings(&path),
            Err(CghError::DuplicateEntry { user: 0, item: 0 })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let (_dir, path) = write_file("0\t0\t1\nnot a line\n");
        match load_ratings(&path) {
            Err(CghError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_valued_entries_are_implicit() {
        let (_dir, path) = write_file("0\t0\t1\n0\t1\t0\n");
        let r = load_ratings(&path).unwrap();
        assert_eq!(r.len(), 1);
        // But dimensions still cover the explicitly mentioned zero pair.
        assert_eq!(r.n_items(), 2);
        assert!(!r.is_positive(0, 1));
    }

    #[test]
    fn adjacency_both_directions() {
        let r = SparseRatings::new(
            3,
            4,
            vec![
                Rating { user: 0, item: 1 },
                Rating { user: 0, item: 3 },
                Rating { user: 2, item: 1 },
            ],
        )
        .unwrap();
        assert_eq!(r.items_of(0), &[1, 3]);
        assert_eq!(r.items_of(1), &[] as &[u32]);
        assert_eq!(r.users_of(1), &[0, 2]);
        assert!(r.is_positive(2, 1));
        assert!(!r.is_positive(2, 3));
        assert_eq!(r.user_counts(), vec![2, 0, 1]);
        assert_eq!(r.item_counts(), vec![0, 2, 0, 1]);
    }

    #[test]
    fn save_load_round_trip() {
        let r = SparseRatings::new(
            5,
            7,
            vec![Rating { user: 4, item: 6 }, Rating { user: 0, item: 0 }],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.tsv");
        r.save(&path).unwrap();
        let back = SparseRatings::load(&path).unwrap();
        assert_eq!(r, back);

        // write -> read -> write produces identical bytes
        let bytes1 = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }
}
