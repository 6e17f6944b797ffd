//! The generative step: a code selects codebook columns whose sum is the
//! Gaussian mean of the reconstructed content vector.

use ndarray::{Array1, Array2};

use crate::error::{CghError, Result};
use crate::model::codes::BinaryCode;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// Codebook, content_dim x r; column k is the codeword of bit k.
    pub codebook: Array2<f64>,
    /// Gaussian precision of the content model; strictly positive.
    pub lambda: f64,
}

impl DecoderParams {
    pub fn new(codebook: Array2<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(CghError::Config(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(DecoderParams { codebook, lambda })
    }

    pub fn content_dim(&self) -> usize {
        self.codebook.nrows()
    }

    pub fn r(&self) -> usize {
        self.codebook.ncols()
    }
}

/// Content mean C . b with code bits as 0/1 reals; summing the active columns
/// avoids touching inactive ones.
pub fn decode(code: &BinaryCode, dec: &DecoderParams) -> Result<Array1<f64>> {
    if code.r() != dec.r() {
        return Err(CghError::LengthMismatch {
            left: code.r(),
            right: dec.r(),
        });
    }
    let mut out = Array1::zeros(dec.content_dim());
    for k in 0..code.r() {
        if code.bit(k) {
            out += &dec.codebook.column(k);
        }
    }
    Ok(out)
}

/// Dense variant over real-valued code vectors; the relaxed training path and
/// the linearity oracle both use it.
pub fn decode_real(code: &[f64], codebook: &Array2<f64>) -> Array1<f64> {
    debug_assert_eq!(code.len(), codebook.ncols());
    let mut out = Array1::zeros(codebook.nrows());
    for (k, &c) in code.iter().enumerate() {
        if c != 0.0 {
            out.scaled_add(c, &codebook.column(k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_decoder(d: usize, r: usize, seed: u64) -> DecoderParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DecoderParams::new(
            Array2::from_shape_fn((d, r), |_| rng.random::<f64>() - 0.5),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_code_decodes_to_zero() {
        let dec = random_decoder(4, 3, 1);
        let out = decode(&BinaryCode::zeros(3), &dec).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_hot_code_selects_column() {
        let dec = random_decoder(5, 4, 2);
        let mut code = BinaryCode::zeros(4);
        code.set_bit(2, true);
        let out = decode(&code, &dec).unwrap();
        for (got, want) in out.iter().zip(dec.codebook.column(2)) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn decode_matches_dense_multiply_oracle() {
        let dec = random_decoder(5, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let bits: Vec<bool> = (0..3).map(|_| rng.random::<bool>()).collect();
            let code = BinaryCode::from_bits(&bits);
            let got = decode(&code, &dec).unwrap();
            // Independent dense matrix-vector product.
            let reals = code.to_reals();
            let mut want = vec![0.0; 5];
            for (row, w) in want.iter_mut().enumerate() {
                for (col, &c) in reals.iter().enumerate() {
                    *w += dec.codebook[(row, col)] * c;
                }
            }
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_is_linear_in_real_codes() {
        let dec = random_decoder(6, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let b1: Vec<bool> = (0..4).map(|_| rng.random::<bool>()).collect();
            let b2: Vec<bool> = (0..4).map(|_| rng.random::<bool>()).collect();
            let c1 = BinaryCode::from_bits(&b1);
            let c2 = BinaryCode::from_bits(&b2);
            let sum_of_decodes = decode(&c1, &dec).unwrap() + decode(&c2, &dec).unwrap();
            let real_sum: Vec<f64> = c1
                .to_reals()
                .iter()
                .zip(c2.to_reals())
                .map(|(a, b)| a + b)
                .collect();
            let decode_of_sum = decode_real(&real_sum, &dec.codebook);
            for (a, b) in sum_of_decodes.iter().zip(decode_of_sum.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nonpositive_lambda_rejected() {
        assert!(DecoderParams::new(Array2::zeros((2, 2)), 0.0).is_err());
    }

    #[test]
    fn length_mismatch_reported() {
        let dec = random_decoder(3, 4, 7);
        assert!(matches!(
            decode(&BinaryCode::zeros(3), &dec),
            Err(CghError::LengthMismatch { .. })
        ));
    }
}
