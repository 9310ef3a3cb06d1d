use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sequence::FeatureSequence;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSplit {
    Train,
    Validation,
    Test,
}

/// Per-dimension z-scoring statistics (population standard deviation).
///
/// The split the statistics came from is recorded so evaluation code can
/// refuse normalizers that saw held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: DataSplit,
}

const MIN_STD: f64 = 1e-8;

/// Fits z-scoring statistics on training sequences.
pub fn fit_normalizer<'a, I>(train: I) -> Result<Normalizer>
where
    I: IntoIterator<Item = &'a FeatureSequence>,
{
    Normalizer::fit_on(DataSplit::Train, train)
}

impl Normalizer {
    pub fn fit_on<'a, I>(split: DataSplit, sequences: I) -> Result<Normalizer>
    where
        I: IntoIterator<Item = &'a FeatureSequence>,
    {
        let seqs: Vec<&FeatureSequence> = sequences.into_iter().collect();
        let Some(first) = seqs.first() else {
            return Err(Error::Config("cannot fit a normalizer on zero sequences".into()));
        };
        let d = first.dim();
        let mut sum = vec![0.0; d];
        let mut n = 0usize;
        for s in &seqs {
            if s.dim() != d {
                return Err(Error::dim("normalizer input", d, s.dim()));
            }
            for r in s.frames().iter_rows() {
                for (a, v) in sum.iter_mut().zip(r) {
                    *a += v;
                }
            }
            n += s.len();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; d];
        for s in &seqs {
            for r in s.frames().iter_rows() {
                for ((a, v), m) in sq.iter_mut().zip(r).zip(&mean) {
                    *a += (v - m) * (v - m);
                }
            }
        }
        let std: Vec<f64> = sq.iter().map(|s| libm::sqrt(s / n as f64)).collect();
        if let Some(j) = std.iter().position(|&s| !(s >= MIN_STD)) {
            return Err(Error::Fit {
                role: format!("dim_{j}"),
                reason: format!("standard deviation {} below {MIN_STD}", std[j]),
            });
        }
        Ok(Normalizer {
            mean,
            std,
            fitted_on: split,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn require_train(&self) -> Result<()> {
        if self.fitted_on != DataSplit::Train {
            return Err(Error::Config(format!(
                "normalizer was fitted on the {:?} split; only training statistics may be used",
                self.fitted_on
            )));
        }
        Ok(())
    }

    pub fn apply_matrix(&self, frames: &Matrix) -> Result<Matrix> {
        if frames.cols() != self.dim() {
            return Err(Error::dim("normalizer", self.dim(), frames.cols()));
        }
        let mut out = frames.clone();
        for t in 0..out.rows() {
            for ((v, m), s) in out.row_mut(t).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn invert_matrix(&self, frames: &Matrix) -> Result<Matrix> {
        if frames.cols() != self.dim() {
            return Err(Error::dim("normalizer", self.dim(), frames.cols()));
        }
        let mut out = frames.clone();
        for t in 0..out.rows() {
            for ((v, m), s) in out.row_mut(t).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        seq.with_frames(self.apply_matrix(seq.frames())?)
    }

    pub fn invert(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        seq.with_frames(self.invert_matrix(seq.frames())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Modality, FRAME_PERIOD};

    fn seq(rows: &[[f64; 2]]) -> FeatureSequence {
        FeatureSequence::new("u", Modality::Acoustic, FRAME_PERIOD, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn hand_arithmetic() {
        let n = Normalizer {
            mean: vec![5.0],
            std: vec![2.0],
            fitted_on: DataSplit::Train,
        };
        let out = n.apply_matrix(&Matrix::from_rows(&[[7.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[1.0]);
    }

    #[test]
    fn constant_dimension_is_rejected() {
        let err = fit_normalizer([&seq(&[[1.0, 3.0], [2.0, 3.0], [4.0, 3.0]])]).unwrap_err();
        assert!(matches!(err, Error::Fit { ref role, .. } if role == "dim_1"));
    }

    #[test]
    fn non_train_normalizer_is_refused() {
        let n = Normalizer::fit_on(DataSplit::Test, [&seq(&[[1.0, 3.0], [2.0, 5.0]])]).unwrap();
        assert!(n.require_train().is_err());
        assert!(fit_normalizer([&seq(&[[1.0, 3.0], [2.0, 5.0]])]).unwrap().require_train().is_ok());
    }
}
