//! Bag-of-words content and TF-IDF feature selection.
//!
//! Raw corpora are term-count rows keyed by entity id. Selection keeps the
//! `d` vocabulary terms with the highest corpus-level TF-IDF score
//! (total term frequency times ln(N_docs / doc_frequency)), re-indexes them
//! into [0, d) in rank order, and fills rows with per-document
//! count * idf weights.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{CghError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

/// Sparse rows over a fixed feature space. A row may be empty (an entity
/// with no content). TF-IDF-selected matrices carry nonnegative weights by
/// construction; synthetic content may be signed.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentMatrix {
    side: Side,
    dim: usize,
    /// Per entity, (feature, weight) pairs sorted by feature index.
    rows: Vec<Vec<(u32, f64)>>,
}

impl ContentMatrix {
    pub fn new(side: Side, dim: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        for row in &rows {
            for &(f, w) in row {
                if f as usize >= dim {
                    return Err(CghError::DimensionMismatch(format!(
                        "feature {f} outside dim {dim}"
                    )));
                }
                if !w.is_finite() {
                    return Err(CghError::DimensionMismatch(format!(
                        "invalid feature weight {w}"
                    )));
                }
            }
        }
        let mut rows = rows;
        for row in rows.iter_mut() {
            row.sort_unstable_by_key(|&(f, _)| f);
        }
        Ok(ContentMatrix { side, dim, rows })
    }

    /// Dense rows, one per entity.
    pub fn from_dense(side: Side, dense: &[Vec<f64>]) -> Result<Self> {
        let dim = dense.first().map(|r| r.len()).unwrap_or(0);
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(f, &v)| (f as u32, v))
                    .collect()
            })
            .collect();
        ContentMatrix::new(side, dim, rows)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// Scatter row `i` into the first `dim` slots of `buf` (zero-filled first).
    pub fn densify_into(&self, i: usize, buf: &mut [f64]) {
        for slot in buf[..self.dim].iter_mut() {
            *slot = 0.0;
        }
        for &(f, w) in &self.rows[i] {
            buf[f as usize] = w;
        }
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w * w).sum()
    }

    /// Dot product of row `i` against a dense vector of length `dim`.
    pub fn row_dot(&self, i: usize, dense: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(f, w)| w * dense[f as usize]).sum()
    }

    /// Extend with empty rows so the matrix covers `n` entities.
    pub fn pad_rows(&mut self, n: usize) {
        while self.rows.len() < n {
            self.rows.push(Vec::new());
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "# content side={} dim={} rows={}",
            self.side.name(),
            self.dim,
            self.rows.len()
        )?;
        for (entity, row) in self.rows.iter().enumerate() {
            for &(f, weight) in row {
                writeln!(w, "{entity}\t{f}\t{weight:.17e}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |message: String| CghError::CorruptArtifact {
            path: path.to_path_buf(),
            message,
        };
        let file = BufReader::new(File::open(path)?);
        let mut side = None;
        let mut dim = None;
        let mut n_rows = None;
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
        for (idx, line) in file.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("side=") {
                        side = Some(match v {
                            "user" => Side::User,
                            "item" => Side::Item,
                            other => return Err(corrupt(format!("bad side {other}"))),
                        });
                    } else if let Some(v) = field.strip_prefix("dim=") {
                        dim = v.parse::<usize>().ok();
                    } else if let Some(v) = field.strip_prefix("rows=") {
                        n_rows = v.parse::<usize>().ok();
                    }
                }
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let entity: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt(format!("line {}: bad entity", idx + 1)))?;
            let feature: u32 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt(format!("line {}: bad feature", idx + 1)))?;
            let weight: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt(format!("line {}: bad weight", idx + 1)))?;
            if rows.len() <= entity {
                rows.resize_with(entity + 1, Vec::new);
            }
            rows[entity].push((feature, weight));
        }
        let side = side.ok_or_else(|| corrupt("missing side header".into()))?;
        let dim = dim.ok_or_else(|| corrupt("missing dim header".into()))?;
        if let Some(n) = n_rows {
            if rows.len() > n {
                return Err(corrupt("more rows than header declares".into()));
            }
            rows.resize_with(n, Vec::new);
        }
        ContentMatrix::new(side, dim, rows)
    }
}

/// Raw term counts per entity, before feature selection.
#[derive(Debug, Clone, Default)]
pub struct RawCorpus {
    /// Row index = entity id; term -> count.
    pub docs: Vec<HashMap<String, u64>>,
}

impl RawCorpus {
    pub fn n_entities(&self) -> usize {
        self.docs.len()
    }
}

/// Parse `entity<TAB>term<TAB>count` lines; repeated (entity, term) pairs sum.
pub fn load_raw_content(path: &Path) -> Result<RawCorpus> {
    let file = BufReader::new(File::open(path)?);
    let mut docs: Vec<HashMap<String, u64>> = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| CghError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let mut fields = trimmed.split_whitespace();
        let entity: usize = fields
            .next()
            .ok_or_else(|| err("missing entity".into()))?
            .parse()
            .map_err(|e| err(format!("bad entity id: {e}")))?;
        let term = fields.next().ok_or_else(|| err("missing term".into()))?.to_string();
        let count: u64 = fields
            .next()
            .ok_or_else(|| err("missing count".into()))?
            .parse()
            .map_err(|e| err(format!("bad count: {e}")))?;
        if fields.next().is_some() {
            return Err(err("trailing fields".into()));
        }
        if docs.len() <= entity {
            docs.resize_with(entity + 1, HashMap::new);
        }
        *docs[entity].entry(term).or_insert(0) += count;
    }
    Ok(RawCorpus { docs })
}

/// A selected vocabulary term with its corpus-level score.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabEntry {
    pub term: String,
    pub score: f64,
    pub idf: f64,
}

/// Keep the `d` highest-scoring terms (score = total term frequency times
/// ln(N_docs / doc_frequency), ties broken by term), re-index rows into
/// [0, min(d, vocab)), and weight each kept term by count * idf.
pub fn tfidf_select(corpus: &RawCorpus, d: usize, side: Side) -> Result<(ContentMatrix, Vec<VocabEntry>)> {
    assert!(d >= 1, "target dimension must be >= 1");
    let n_docs = corpus.docs.iter().filter(|doc| !doc.is_empty()).count();

    let mut total_tf: HashMap<&str, u64> = HashMap::new();
    let mut doc_freq: HashMap<&str, u64> = HashMap::new();
    for doc in &corpus.docs {
        for (term, &count) in doc {
            *total_tf.entry(term).or_insert(0) += count;
            *doc_freq.entry(term).or_insert(0) += 1;
        }
    }
    if total_tf.is_empty() {
        return Err(CghError::EmptyVocabulary);
    }

    let mut scored: Vec<(&str, f64, f64)> = total_tf
        .iter()
        .map(|(&term, &tf)| {
            let df = doc_freq[term];
            let idf = (n_docs as f64 / df as f64).ln();
            (term, tf as f64 * idf, idf)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    scored.truncate(d);

    let vocab: Vec<VocabEntry> = scored
        .iter()
        .map(|&(term, score, idf)| VocabEntry {
            term: term.to_string(),
            score,
            idf,
        })
        .collect();
    let index_of: HashMap<&str, u32> = scored
        .iter()
        .enumerate()
        .map(|(i, &(term, _, _))| (term, i as u32))
        .collect();

    let rows: Vec<Vec<(u32, f64)>> = corpus
        .docs
        .iter()
        .map(|doc| {
            let mut row: Vec<(u32, f64)> = doc
                .iter()
                .filter_map(|(term, &count)| {
                    index_of.get(term.as_str()).map(|&f| {
                        (f, count as f64 * vocab[f as usize].idf)
                    })
                })
                .collect();
            row.sort_unstable_by_key(|&(f, _)| f);
            row
        })
        .collect();

    let matrix = ContentMatrix::new(side, vocab.len(), rows)?;
    Ok((matrix, vocab))
}

pub fn save_vocab(vocab: &[VocabEntry], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vocab feature\tterm\tscore\tidf")?;
    for (i, entry) in vocab.iter().enumerate() {
        writeln!(w, "{i}\t{}\t{:.17e}\t{:.17e}", entry.term, entry.score, entry.idf)?;
    }
    w.flush()?;
    Ok(())
}
