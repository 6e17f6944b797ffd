//! The code model: per-side encoder (inference step), codebook decoder
//! (generative step), Bernoulli prior, and the Hamming-similarity rating
//! predictor, plus checkpoint persistence.

pub mod codes;
pub mod decoder;
pub mod encoder;
pub mod prior;

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Side;
use crate::error::{CghError, Result};
use crate::io::{find, read_tensors, write_tensors, NamedTensor};
use crate::model::codes::{BinaryCode, BinaryCodeMatrix};
use crate::model::decoder::DecoderParams;
use crate::model::encoder::{assemble_input, DenseLayer, EncoderParams};
use crate::model::prior::PriorParams;

pub use crate::model::codes::hamming_words;
pub use crate::model::decoder::{decode, decode_real};
pub use crate::model::encoder::{encode_map, encode_probs, sample_code, sigmoid};
pub use crate::model::prior::log_prior;

/// Predicted rating: 1 - Hamming distance / r, on the grid {0, 1/r, ..., 1}.
pub fn predict_rating(b: &BinaryCode, d: &BinaryCode) -> Result<f64> {
    if b.r() != d.r() {
        return Err(CghError::LengthMismatch {
            left: b.r(),
            right: d.r(),
        });
    }
    let dist = hamming_words(b.words(), d.words());
    Ok(1.0 - dist as f64 / b.r() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideModel {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub prior: PriorParams,
    pub content_dim: usize,
}

/// Structural hyperparameters of a fresh model.
#[derive(Debug, Clone)]
pub struct ModelShape {
    pub r: usize,
    pub hidden: Vec<usize>,
    /// Per-bit prior mean, fixed (not learned).
    pub rho: f64,
    pub lambda_u: f64,
    pub lambda_v: f64,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            r: 50,
            hidden: vec![512, 256],
            rho: 0.5,
            lambda_u: 1.0,
            lambda_v: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CghModel {
    pub user: SideModel,
    pub item: SideModel,
    pub r: usize,
}

impl CghModel {
    /// Fresh model with seeded initialization. Draw order is fixed: user
    /// encoder, user codebook, item encoder, item codebook.
    pub fn init(user_dim: usize, item_dim: usize, shape: &ModelShape, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = shape.r;
        let user_encoder = EncoderParams::init(user_dim + r, &shape.hidden, r, &mut rng);
        let user_codebook = init_codebook(user_dim, r, &mut rng);
        let item_encoder = EncoderParams::init(item_dim + r, &shape.hidden, r, &mut rng);
        let item_codebook = init_codebook(item_dim, r, &mut rng);
        Ok(CghModel {
            user: SideModel {
                encoder: user_encoder,
                decoder: DecoderParams::new(user_codebook, shape.lambda_u)?,
                prior: PriorParams::uniform(r, shape.rho)?,
                content_dim: user_dim,
            },
            item: SideModel {
                encoder: item_encoder,
                decoder: DecoderParams::new(item_codebook, shape.lambda_v)?,
                prior: PriorParams::uniform(r, shape.rho)?,
                content_dim: item_dim,
            },
            r,
        })
    }

    pub fn side(&self, side: Side) -> &SideModel {
        match side {
            Side::User => &self.user,
            Side::Item => &self.item,
        }
    }

    /// Posterior bit probabilities for one entity. `factor = None` zero-fills
    /// the latent slot (cold-start path); corruption > 0 needs the rng.
    pub fn encode_probs_for<R: Rng>(
        &self,
        side: Side,
        content: &[(u32, f64)],
        factor: Option<&[f64]>,
        corruption: f64,
        rng: &mut R,
    ) -> Result<Array1<f64>> {
        let sm = self.side(side);
        let input = assemble_input(content, sm.content_dim, factor, self.r, corruption, rng);
        encode_probs(&sm.encoder, &input)
    }

    /// Sign-MAP code for one entity (no corruption).
    pub fn encode_map_for(
        &self,
        side: Side,
        content: &[(u32, f64)],
        factor: Option<&[f64]>,
    ) -> Result<BinaryCode> {
        let sm = self.side(side);
        let mut no_rng = NoCorruption;
        let input = assemble_input(content, sm.content_dim, factor, self.r, 0.0, &mut no_rng);
        encode_map(&sm.encoder, &input)
    }

    /// MAP-encode every entity of a side. `factor_of(e)` returns the latent
    /// row for warm entities and None for cold ones.
    pub fn encode_entities<'a>(
        &self,
        side: Side,
        content: &crate::data::ContentMatrix,
        factor_of: impl Fn(u32) -> Option<&'a [f64]>,
    ) -> Result<BinaryCodeMatrix> {
        let n = content.n_rows();
        let mut out = BinaryCodeMatrix::zeros(n, self.r);
        for e in 0..n {
            let code = self.encode_map_for(side, content.row(e), factor_of(e as u32))?;
            out.set_row(e, &code)?;
        }
        Ok(out)
    }

    /// Posterior probabilities for every entity, rows as a dense matrix. The
    /// real-valued ranking baseline scores with these.
    pub fn encode_probs_all<'a>(
        &self,
        side: Side,
        content: &crate::data::ContentMatrix,
        factor_of: impl Fn(u32) -> Option<&'a [f64]>,
    ) -> Result<Array2<f64>> {
        let n = content.n_rows();
        let mut out = Array2::zeros((n, self.r));
        let mut no_rng = NoCorruption;
        for e in 0..n {
            let sm = self.side(side);
            let input = assemble_input(
                content.row(e),
                sm.content_dim,
                factor_of(e as u32),
                self.r,
                0.0,
                &mut no_rng,
            );
            let probs = encode_probs(&sm.encoder, &input)?;
            out.row_mut(e).assign(&probs);
        }
        Ok(out)
    }

    /// Trainable tensors as flat slices in a fixed order: per side, hidden
    /// layer weights/biases, projection weight/bias, then the codebook.
    /// Gradient and velocity buffers use the same order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for sm in [&self.user, &self.item] {
            for layer in &sm.encoder.hidden {
                out.push(layer.weight.as_slice().expect("standard layout"));
                out.push(layer.bias.as_slice().expect("standard layout"));
            }
            out.push(sm.encoder.proj.weight.as_slice().expect("standard layout"));
            out.push(sm.encoder.proj.bias.as_slice().expect("standard layout"));
            out.push(sm.decoder.codebook.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for sm in [&mut self.user, &mut self.item] {
            for layer in &mut sm.encoder.hidden {
                out.push(layer.weight.as_slice_mut().expect("standard layout"));
                out.push(layer.bias.as_slice_mut().expect("standard layout"));
            }
            out.push(sm.encoder.proj.weight.as_slice_mut().expect("standard layout"));
            out.push(sm.encoder.proj.bias.as_slice_mut().expect("standard layout"));
            out.push(sm.decoder.codebook.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn all_params_finite(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tensors = vec![NamedTensor::scalar("r", self.r as f64)];
        for (prefix, sm) in [("user", &self.user), ("item", &self.item)] {
            tensors.push(NamedTensor::scalar(
                &format!("{prefix}.content_dim"),
                sm.content_dim as f64,
            ));
            tensors.push(NamedTensor::scalar(&format!("{prefix}.lambda"), sm.decoder.lambda));
            tensors.push(NamedTensor::vector(
                &format!("{prefix}.rho"),
                sm.prior.rho().to_vec(),
            ));
            for (l, layer) in sm.encoder.hidden.iter().enumerate() {
                tensors.push(tensor_of(&format!("{prefix}.enc.{l}.w"), &layer.weight));
                tensors.push(NamedTensor::vector(
                    &format!("{prefix}.enc.{l}.b"),
                    layer.bias.to_vec(),
                ));
            }
            tensors.push(tensor_of(&format!("{prefix}.proj.w"), &sm.encoder.proj.weight));
            tensors.push(NamedTensor::vector(
                &format!("{prefix}.proj.b"),
                sm.encoder.proj.bias.to_vec(),
            ));
            tensors.push(tensor_of(&format!("{prefix}.codebook"), &sm.decoder.codebook));
        }
        write_tensors(path, &tensors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let tensors = read_tensors(path)?;
        let r = find(&tensors, "r", path)?.data[0] as usize;
        let mut sides = Vec::with_capacity(2);
        for prefix in ["user", "item"] {
            let content_dim =
                find(&tensors, &format!("{prefix}.content_dim"), path)?.data[0] as usize;
            let lambda = find(&tensors, &format!("{prefix}.lambda"), path)?.data[0];
            let rho = find(&tensors, &format!("{prefix}.rho"), path)?;
            let mut hidden = Vec::new();
            for l in 0.. {
                let name = format!("{prefix}.enc.{l}.w");
                let Some(w) = tensors.iter().find(|t| t.name == name) else {
                    break;
                };
                let b = find(&tensors, &format!("{prefix}.enc.{l}.b"), path)?;
                hidden.push(DenseLayer {
                    weight: matrix_of(w, path)?,
                    bias: Array1::from_vec(b.data.clone()),
                });
            }
            let proj = DenseLayer {
                weight: matrix_of(find(&tensors, &format!("{prefix}.proj.w"), path)?, path)?,
                bias: Array1::from_vec(find(&tensors, &format!("{prefix}.proj.b"), path)?.data.clone()),
            };
            let codebook = matrix_of(find(&tensors, &format!("{prefix}.codebook"), path)?, path)?;
            sides.push(SideModel {
                encoder: EncoderParams { hidden, proj },
                decoder: DecoderParams::new(codebook, lambda)?,
                prior: PriorParams::new(Array1::from_vec(rho.data.clone()))?,
                content_dim,
            });
        }
        let item = sides.pop().expect("two sides");
        let user = sides.pop().expect("two sides");
        Ok(CghModel { user, item, r })
    }
}

fn init_codebook<R: Rng>(d: usize, r: usize, rng: &mut R) -> Array2<f64> {
    let scale = 1.0 / (r as f64).sqrt();
    Array2::from_shape_fn((d, r), |_| rng.random_range(-scale..scale))
}

fn tensor_of(name: &str, m: &Array2<f64>) -> NamedTensor {
    NamedTensor::matrix(
        name,
        m.nrows(),
        m.ncols(),
        m.as_slice().expect("standard layout").to_vec(),
    )
}

fn matrix_of(t: &NamedTensor, path: &Path) -> Result<Array2<f64>> {
    if t.shape.len() != 2 {
        return Err(CghError::CorruptArtifact {
            path: path.to_path_buf(),
            message: format!("tensor {} is not a matrix", t.name),
        });
    }
    Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data.clone()).map_err(|e| {
        CghError::CorruptArtifact {
            path: path.to_path_buf(),
            message: format!("tensor {}: {e}", t.name),
        }
    })
}

/// Rng stand-in for paths where corruption is structurally off.
struct NoCorruption;

impl rand::RngCore for NoCorruption {
    fn next_u32(&mut self) -> u32 {
        unreachable!("corruption disabled")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("corruption disabled")
    }

    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        unreachable!("corruption disabled")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_rating_identical_codes() {
        let c = BinaryCode::from_bits(&[true, false, true]);
        assert_eq!(predict_rating(&c, &c).unwrap(), 1.0);
    }

    #[test]
    fn predict_rating_complement_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<bool> = (0..50).map(|_| rng.random::<bool>()).collect();
        let c = BinaryCode::from_bits(&bits);
        assert_eq!(predict_rating(&c, &c.complement()).unwrap(), 0.0);
    }

    #[test]
    fn predict_rating_formula() {
        // r = 50, distance 10 -> 0.8.
        let mut a = BinaryCode::zeros(50);
        let b = BinaryCode::zeros(50);
        for k in 0..10 {
            a.set_bit(k, true);
        }
        assert!((predict_rating(&a, &b).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn predict_rating_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x: Vec<bool> = (0..17).map(|_| rng.random::<bool>()).collect();
            let y: Vec<bool> = (0..17).map(|_| rng.random::<bool>()).collect();
            let a = BinaryCode::from_bits(&x);
            let b = BinaryCode::from_bits(&y);
            let ab = predict_rating(&a, &b).unwrap();
            let ba = predict_rating(&b, &a).unwrap();
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let shape = ModelShape {
            r: 6,
            hidden: vec![5, 4],
            rho: 0.5,
            lambda_u: 1.5,
            lambda_v: 0.75,
        };
        let model = CghModel::init(7, 9, &shape, 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.bin");
        model.save(&path).unwrap();
        let back = CghModel::load(&path).unwrap();
        assert_eq!(model, back);

        let bytes1 = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let shape = ModelShape { r: 4, hidden: vec![3], ..ModelShape::default() };
        let a = CghModel::init(5, 6, &shape, 9).unwrap();
        let b = CghModel::init(5, 6, &shape, 9).unwrap();
        assert_eq!(a, b);
        let c = CghModel::init(5, 6, &shape, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn encode_entities_covers_all_rows() {
        let shape = ModelShape { r: 4, hidden: vec![3], ..ModelShape::default() };
        let model = CghModel::init(3, 3, &shape, 5).unwrap();
        let content = crate::data::ContentMatrix::new(
            Side::User,
            3,
            vec![vec![(0, 1.0)], vec![], vec![(2, 0.5)]],
        )
        .unwrap();
        let factors = Array2::<f64>::zeros((3, 4));
        let codes = model
            .encode_entities(Side::User, &content, |e| {
                factors.row(e as usize).to_slice()
            })
            .unwrap();
        assert_eq!(codes.n(), 3);
        assert_eq!(codes.r(), 4);
    }
}
