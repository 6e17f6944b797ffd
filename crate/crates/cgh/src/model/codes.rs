//! Bit-packed binary codes.
//!
//! An r-bit code is stored in `ceil(r/64)` little-endian machine words: bit k
//! of a code lives at word `k / 64`, bit position `k % 64`. Padding bits above
//! r are always zero, which lets Hamming distances run word-wise without
//! masking.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{CghError, Result};

pub const WORD_BITS: usize = 64;

/// Words needed to hold an r-bit code.
pub fn words_per_code(r: usize) -> usize {
    r.div_ceil(WORD_BITS)
}

/// A single r-bit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCode {
    r: usize,
    words: Vec<u64>,
}

impl BinaryCode {
    pub fn zeros(r: usize) -> Self {
        BinaryCode {
            r,
            words: vec![0u64; words_per_code(r)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut code = BinaryCode::zeros(bits.len());
        for (k, &bit) in bits.iter().enumerate() {
            if bit {
                code.words[k / WORD_BITS] |= 1u64 << (k % WORD_BITS);
            }
        }
        code
    }

    /// Build from raw words; padding bits must already be zero.
    pub fn from_words(r: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_per_code(r) {
            return Err(CghError::LengthMismatch {
                left: words.len(),
                right: words_per_code(r),
            });
        }
        let code = BinaryCode { r, words };
        debug_assert!(code.padding_clear());
        Ok(code)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, k: usize) -> bool {
        assert!(k < self.r, "bit index {k} out of range for r={}", self.r);
        (self.words[k / WORD_BITS] >> (k % WORD_BITS)) & 1 == 1
    }

    pub fn set_bit(&mut self, k: usize, value: bool) {
        assert!(k < self.r, "bit index {k} out of range for r={}", self.r);
        let mask = 1u64 << (k % WORD_BITS);
        if value {
            self.words[k / WORD_BITS] |= mask;
        } else {
            self.words[k / WORD_BITS] &= !mask;
        }
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.r).map(|k| self.bit(k)).collect()
    }

    /// Code bits as 0.0/1.0 reals, the form the decoder consumes.
    pub fn to_reals(&self) -> Vec<f64> {
        (0..self.r).map(|k| if self.bit(k) { 1.0 } else { 0.0 }).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Bitwise complement with padding bits kept zero.
    pub fn complement(&self) -> Self {
        let mut out = BinaryCode {
            r: self.r,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.mask_padding();
        out
    }

    fn mask_padding(&mut self) {
        let tail = self.r % WORD_BITS;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    fn padding_clear(&self) -> bool {
        let tail = self.r % WORD_BITS;
        if tail == 0 {
            return true;
        }
        match self.words.last() {
            Some(last) => last & !((1u64 << tail) - 1) == 0,
            None => true,
        }
    }
}

/// Word-wise Hamming distance between two equally long word slices.
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// n codes of r bits each, packed contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodeMatrix {
    n: usize,
    r: usize,
    wpc: usize,
    words: Vec<u64>,
}

const CODES_MAGIC: &[u8; 4] = b"CGHB";
const CODES_VERSION: u32 = 1;

impl BinaryCodeMatrix {
    pub fn zeros(n: usize, r: usize) -> Self {
        let wpc = words_per_code(r);
        BinaryCodeMatrix {
            n,
            r,
            wpc,
            words: vec![0u64; n * wpc],
        }
    }

    pub fn from_codes(codes: &[BinaryCode]) -> Result<Self> {
        let r = codes.first().map(|c| c.r()).unwrap_or(0);
        let mut m = BinaryCodeMatrix::zeros(codes.len(), r);
        for (i, code) in codes.iter().enumerate() {
            m.set_row(i, code)?;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn set_row(&mut self, i: usize, code: &BinaryCode) -> Result<()> {
        if code.r() != self.r {
            return Err(CghError::LengthMismatch {
                left: code.r(),
                right: self.r,
            });
        }
        self.words[i * self.wpc..(i + 1) * self.wpc].copy_from_slice(code.words());
        Ok(())
    }

    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.wpc..(i + 1) * self.wpc]
    }

    pub fn row(&self, i: usize) -> BinaryCode {
        BinaryCode {
            r: self.r,
            words: self.row_words(i).to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CODES_MAGIC)?;
        w.write_u32::<LittleEndian>(CODES_VERSION)?;
        w.write_u64::<LittleEndian>(self.n as u64)?;
        w.write_u64::<LittleEndian>(self.r as u64)?;
        for word in &self.words {
            w.write_u64::<LittleEndian>(*word)?;
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
        if &magic != CODES_MAGIC {
            return Err(corrupt("bad magic, expected CGHB"));
        }
        let version = rd.read_u32::<LittleEndian>()?;
        if version != CODES_VERSION {
            return Err(corrupt("unsupported version"));
        }
        let n = rd.read_u64::<LittleEndian>()? as usize;
        let r = rd.read_u64::<LittleEndian>()? as usize;
        let wpc = words_per_code(r);
        let mut words = vec![0u64; n * wpc];
        for word in words.iter_mut() {
            *word = rd.read_u64::<LittleEndian>()?;
        }
        let m = BinaryCodeMatrix { n, r, wpc, words };
        for i in 0..n {
            let row = m.row(i);
            if !row.padding_clear() {
                return Err(corrupt("nonzero padding bits"));
            }
        }
        Ok(m)
    }
}
