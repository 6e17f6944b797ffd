//! The inference step: content plus latent factor in, per-bit Bernoulli
//! posterior out, sign-MAP binarization on top.
//!
//! The encoder is a stack of tanh layers followed by a linear projection to
//! r logits; per-bit probabilities are sigmoids of the logits. The empty
//! stack (projection only) is a plain linear encoder.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{CghError, Result};
use crate::model::codes::BinaryCode;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// out x in.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn init<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (in_dim.max(1) as f64).sqrt();
        DenseLayer {
            weight: Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-scale..scale)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        DenseLayer {
            weight: Array2::from_shape_fn((dim, dim), |(i, j)| if i == j { 1.0 } else { 0.0 }),
            bias: Array1::zeros(dim),
        }
    }

    pub fn affine(&self, input: &[f64]) -> Array1<f64> {
        let mut out = self.bias.clone();
        for (o, row) in out.iter_mut().zip(self.weight.rows()) {
            let row = row.as_slice().expect("standard layout");
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *o += acc;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub hidden: Vec<DenseLayer>,
    pub proj: DenseLayer,
}

impl EncoderParams {
    pub fn init<R: Rng>(input_dim: usize, hidden_widths: &[usize], r: usize, rng: &mut R) -> Self {
        let mut hidden = Vec::with_capacity(hidden_widths.len());
        let mut prev = input_dim;
        for &width in hidden_widths {
            hidden.push(DenseLayer::init(width, prev, rng));
            prev = width;
        }
        EncoderParams {
            hidden,
            proj: DenseLayer::init(r, prev, rng),
        }
    }

    /// A projection-only encoder with the identity map; input_dim must equal r.
    pub fn identity(r: usize) -> Self {
        EncoderParams {
            hidden: Vec::new(),
            proj: DenseLayer::identity(r),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map(|l| l.weight.ncols())
            .unwrap_or_else(|| self.proj.weight.ncols())
    }

    pub fn r(&self) -> usize {
        self.proj.weight.nrows()
    }

    /// Full forward pass, keeping the hidden activations for backprop.
    pub fn forward(&self, input: &[f64]) -> Forward {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut activations = Vec::with_capacity(self.hidden.len());
        let mut current: Vec<f64> = input.to_vec();
        for layer in &self.hidden {
            let pre = layer.affine(&current);
            let act: Array1<f64> = pre.mapv(f64::tanh);
            current = act.to_vec();
            activations.push(act);
        }
        let logits = self.proj.affine(&current);
        let probs = logits.mapv(sigmoid);
        Forward {
            input: input.to_vec(),
            activations,
            logits,
            probs,
        }
    }
}

/// Cached activations from one encoder forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub input: Vec<f64>,
    pub activations: Vec<Array1<f64>>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

/// Assemble the encoder input [content, factor], optionally corrupting
/// coordinates to zero independently with probability `corruption`
/// (denoising-style, training only). `factor = None` zero-fills the latent
/// slot, the cold-start path.
pub fn assemble_input<R: Rng>(
    content: &[(u32, f64)],
    content_dim: usize,
    factor: Option<&[f64]>,
    r: usize,
    corruption: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut input = vec![0.0; content_dim + r];
    for &(f, w) in content {
        input[f as usize] = w;
    }
    if let Some(f) = factor {
        debug_assert_eq!(f.len(), r);
        input[content_dim..].copy_from_slice(f);
    }
    if corruption > 0.0 {
        for slot in input.iter_mut() {
            if rng.random::<f64>() < corruption {
                *slot = 0.0;
            }
        }
    }
    input
}

/// Per-bit posterior probabilities sigma(logits) for an assembled input.
pub fn encode_probs(enc: &EncoderParams, input: &[f64]) -> Result<Array1<f64>> {
    if input.len() != enc.input_dim() {
        return Err(CghError::DimensionMismatch(format!(
            "encoder input {} vs expected {}",
            input.len(),
            enc.input_dim()
        )));
    }
    Ok(enc.forward(input).probs)
}

/// Sign-MAP code: bit k set iff logit_k >= 0 (sign(0) counts as +1), which is
/// exactly prob_k >= 0.5.
pub fn encode_map(enc: &EncoderParams, input: &[f64]) -> Result<BinaryCode> {
    if input.len() != enc.input_dim() {
        return Err(CghError::DimensionMismatch(format!(
            "encoder input {} vs expected {}",
            input.len(),
            enc.input_dim()
        )));
    }
    let fwd = enc.forward(input);
    let bits: Vec<bool> = fwd.logits.iter().map(|&z| z >= 0.0).collect();
    Ok(BinaryCode::from_bits(&bits))
}

/// Independent per-bit Bernoulli draws.
pub fn sample_code<R: Rng>(probs: &Array1<f64>, rng: &mut R) -> BinaryCode {
    let bits: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
    BinaryCode::from_bits(&bits)
}
