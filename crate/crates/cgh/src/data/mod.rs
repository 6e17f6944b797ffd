//! Dataset ingestion: ratings, content, TF-IDF selection, and splits.

pub mod content;
pub mod ratings;
pub mod split;

pub use content::{load_raw_content, save_vocab, tfidf_select, ContentMatrix, RawCorpus, Side, VocabEntry};
pub use ratings::{load_ratings, Rating, SparseRatings};
pub use split::{split_dataset, DatasetSplit};
