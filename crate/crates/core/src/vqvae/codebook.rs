use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

/// `K` embedding vectors of dimension `D`, one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    embeddings: Matrix,
}

impl Codebook {
    pub fn new(embeddings: Matrix) -> Result<Self> {
        if embeddings.rows() < 2 {
            return Err(Error::Config(format!("codebook needs K ≥ 2, got {}", embeddings.rows())));
        }
        if embeddings.cols() == 0 {
            return Err(Error::Config("codebook embedding dimension is zero".into()));
        }
        if !embeddings.is_finite() {
            return Err(Error::Parameter("codebook has non-finite entries".into()));
        }
        Ok(Codebook { embeddings })
    }

    pub fn size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub(crate) fn embeddings_mut(&mut self) -> &mut Matrix {
        &mut self.embeddings
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.embeddings.row(k)
    }

    /// Fails if two rows are within `1e-10` of each other.
    pub fn check_distinct(&self) -> Result<()> {
        for i in 0..self.size() {
            for j in i + 1..self.size() {
                let d = libm::sqrt(squared_distance(self.row(i), self.row(j)));
                if d <= 1e-10 {
                    return Err(Error::Training {
                        parameter: "codebook".into(),
                        reason: format!("rows {i} and {j} coincide (distance {d:e})"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    pub code_index: usize,
    pub embedding: Vec<f64>,
    pub encoder_output: Vec<f64>,
    /// Euclidean distance between the encoder output and the chosen row.
    pub distance: f64,
}

impl QuantizationResult {
    /// One-hot categorical posterior over the `k` codes.
    pub fn posterior(&self, k: usize) -> Vec<f64> {
        let mut p = vec![0.0; k];
        p[self.code_index] = 1.0;
        p
    }
}

/// Index of the nearest codebook row (squared Euclidean), lowest index on ties.
pub(crate) fn nearest(z: &[f64], codebook: &Codebook) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = squared_distance(z, codebook.row(0));
    for k in 1..codebook.size() {
        let d = squared_distance(z, codebook.row(k));
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Nearest-neighbour lookup of one encoder output.
pub fn quantize(encoder_output: &[f64], codebook: &Codebook) -> Result<QuantizationResult> {
    if encoder_output.len() != codebook.dim() {
        return Err(Error::dim("quantize input", codebook.dim(), encoder_output.len()));
    }
    let (code_index, d2) = nearest(encoder_output, codebook);
    Ok(QuantizationResult {
        code_index,
        embedding: codebook.row(code_index).to_vec(),
        encoder_output: encoder_output.to_vec(),
        distance: libm::sqrt(d2),
    })
}

/// Per-code frame counts and the perplexity `exp(H)` of the usage distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookUsage {
    pub counts: Vec<usize>,
    pub total: usize,
    pub perplexity: f64,
}

impl CodebookUsage {
    pub fn fraction(&self, k: usize) -> f64 {
        self.counts[k] as f64 / self.total.max(1) as f64
    }

    pub fn active_codes(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

pub fn codebook_usage_from_indices<I: IntoIterator<Item = usize>>(k: usize, indices: I) -> CodebookUsage {
    let mut counts = vec![0usize; k];
    for i in indices {
        counts[i] += 1;
    }
    let total: usize = counts.iter().sum();
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * libm::log(p)
        })
        .sum();
    CodebookUsage {
        counts,
        total,
        perplexity: if total == 0 { 1.0 } else { libm::exp(entropy) },
    }
}
