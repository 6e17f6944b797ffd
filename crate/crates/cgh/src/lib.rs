//! A hybrid recommender built on binary codes: entities are encoded into
//! r-bit hash codes from content and collaborative signals, recommendations
//! rank by Hamming distance, cold-start entities encode from content alone,
//! and the generative (decoding) side mines potential users for an item.
//!
//! Pipeline: [`data`] ingests ratings/content and splits warm vs cold;
//! [`mf`] produces the latent factors fed into the encoder input; [`train`]
//! optimizes the joint objective (rating fit, content reconstruction, KL to
//! a Bernoulli prior, regularizer) with straight-through code gradients;
//! [`index`] serves bit-packed Hamming top-k; [`marketing`] mines potential
//! users through the decoder; [`eval`] implements the sampled Accuracy@k /
//! MRR protocols.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod marketing;
pub mod mf;
pub mod model;
pub mod synth;
pub mod train;

pub use config::RunConfig;
pub use error::{CghError, Result};

/// Run `f` inside a rayon pool with a fixed worker count. Parallel and
/// serial evaluation produce identical results; a single worker keeps
/// timing-sensitive runs deterministic.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CghError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
