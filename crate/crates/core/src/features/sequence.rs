use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Frame period shared by every stream, in seconds.
pub const FRAME_PERIOD: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Articulatory,
    Acoustic,
    Fused,
    /// Articulatory parameters predicted from audio by an inversion model.
    ArticulatoryInferred,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Articulatory => "articulatory",
            Modality::Acoustic => "acoustic",
            Modality::Fused => "fused",
            Modality::ArticulatoryInferred => "articulatory-inferred",
        }
    }

    pub fn is_articulatory(self) -> bool {
        matches!(self, Modality::Articulatory | Modality::ArticulatoryInferred)
    }

    /// Whether a model trained on `self` accepts input tagged `other`.
    /// Inferred articulatory streams share the ground-truth schema.
    pub fn accepts(self, other: Modality) -> bool {
        self == other || (self.is_articulatory() && other.is_articulatory())
    }
}

impl core::fmt::Display for Modality {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "articulatory" => Ok(Modality::Articulatory),
            "acoustic" => Ok(Modality::Acoustic),
            "fused" => Ok(Modality::Fused),
            "articulatory-inferred" => Ok(Modality::ArticulatoryInferred),
            other => Err(Error::Modality(format!("unknown modality `{other}`"))),
        }
    }
}

/// A `[T × F]` matrix of frames for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    utterance_id: String,
    modality: Modality,
    frame_period: f64,
    frames: Matrix,
}

impl FeatureSequence {
    pub fn new(utterance_id: impl Into<String>, modality: Modality, frame_period: f64, frames: Matrix) -> Result<Self> {
        let utterance_id = utterance_id.into();
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::EmptyUtterance(utterance_id));
        }
        if !frames.is_finite() {
            return Err(Error::Ingestion(format!("utterance `{utterance_id}` has non-finite frames")));
        }
        if !(frame_period > 0.0) {
            return Err(Error::Parameter(format!("frame period {frame_period} must be positive")));
        }
        Ok(FeatureSequence {
            utterance_id,
            modality,
            frame_period,
            frames,
        })
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn into_frames(self) -> Matrix {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn with_frames(&self, frames: Matrix) -> Result<Self> {
        FeatureSequence::new(self.utterance_id.clone(), self.modality, self.frame_period, frames)
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }
}

/// Early fusion: `[articulatory | acoustic]` per frame.
///
/// Lengths differing by at most two frames are truncated to the shorter one;
/// a larger mismatch is an alignment error.
pub fn concat_modalities(art: &FeatureSequence, ac: &FeatureSequence) -> Result<FeatureSequence> {
    if !art.modality.is_articulatory() || ac.modality != Modality::Acoustic {
        return Err(Error::Modality(format!(
            "early fusion needs articulatory + acoustic, got {} + {}",
            art.modality, ac.modality
        )));
    }
    if art.utterance_id != ac.utterance_id {
        return Err(Error::Alignment(format!(
            "utterance ids differ: `{}` vs `{}`",
            art.utterance_id, ac.utterance_id
        )));
    }
    if (art.frame_period - ac.frame_period).abs() > 1e-12 {
        return Err(Error::Alignment(format!(
            "frame periods differ: {} vs {}",
            art.frame_period, ac.frame_period
        )));
    }
    let (ta, tc) = (art.len(), ac.len());
    if ta.abs_diff(tc) > 2 {
        return Err(Error::Alignment(format!(
            "`{}`: {ta} articulatory frames vs {tc} acoustic frames",
            art.utterance_id
        )));
    }
    let t = ta.min(tc);
    let (fa, fc) = (art.dim(), ac.dim());
    let mut frames = Matrix::zeros(t, fa + fc);
    for i in 0..t {
        let row = frames.row_mut(i);
        row[..fa].copy_from_slice(art.frames.row(i));
        row[fa..].copy_from_slice(ac.frames.row(i));
    }
    FeatureSequence::new(art.utterance_id.clone(), Modality::Fused, art.frame_period, frames)
}

/// Inverse of [`concat_modalities`]: the first `art_dim` columns are articulatory.
pub fn split_fused(fused: &FeatureSequence, art_dim: usize) -> Result<(FeatureSequence, FeatureSequence)> {
    if fused.modality != Modality::Fused {
        return Err(Error::Modality(format!("expected fused input, got {}", fused.modality)));
    }
    if art_dim == 0 || art_dim >= fused.dim() {
        return Err(Error::dim("fused split point", fused.dim() - 1, art_dim));
    }
    let t = fused.len();
    let fc = fused.dim() - art_dim;
    let mut art = Matrix::zeros(t, art_dim);
    let mut ac = Matrix::zeros(t, fc);
    for i in 0..t {
        let row = fused.frames.row(i);
        art.row_mut(i).copy_from_slice(&row[..art_dim]);
        ac.row_mut(i).copy_from_slice(&row[art_dim..]);
    }
    Ok((
        FeatureSequence::new(fused.utterance_id.clone(), Modality::Articulatory, fused.frame_period, art)?,
        FeatureSequence::new(fused.utterance_id.clone(), Modality::Acoustic, fused.frame_period, ac)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(id: &str, m: Modality, t: usize, f: usize, base: f64) -> FeatureSequence {
        let data = (0..t * f).map(|i| base + i as f64 * 0.5).collect();
        FeatureSequence::new(id, m, FRAME_PERIOD, Matrix::from_vec(t, f, data).unwrap()).unwrap()
    }

    #[test]
    fn fused_widths_follow_both_layouts() {
        for (fa, expected) in [(7, 47), (6, 46)] {
            let f = concat_modalities(
                &seq("u", Modality::Articulatory, 10, fa, 0.0),
                &seq("u", Modality::Acoustic, 10, 40, 100.0),
            )
            .unwrap();
            assert_eq!(f.dim(), expected);
            assert_eq!(f.len(), 10);
            assert_eq!(f.modality(), Modality::Fused);
        }
    }

    #[test]
    fn concat_then_split_is_exact() {
        let art = seq("u", Modality::Articulatory, 12, 7, -3.25);
        let ac = seq("u", Modality::Acoustic, 12, 40, 1.0 / 3.0);
        let (a, c) = split_fused(&concat_modalities(&art, &ac).unwrap(), 7).unwrap();
        assert_eq!(a, art);
        assert_eq!(c, ac);
    }

    #[test]
    fn small_length_mismatch_truncates_large_one_fails() {
        let art = seq("u", Modality::Articulatory, 12, 6, 0.0);
        let f = concat_modalities(&art, &seq("u", Modality::Acoustic, 10, 40, 0.0)).unwrap();
        assert_eq!(f.len(), 10);
        let err = concat_modalities(&art, &seq("u", Modality::Acoustic, 9, 40, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn mismatched_utterances_are_rejected() {
        let err = concat_modalities(
            &seq("a", Modality::Articulatory, 4, 6, 0.0),
            &seq("b", Modality::Acoustic, 4, 40, 0.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn empty_and_non_finite_frames_are_rejected() {
        assert!(matches!(
            FeatureSequence::new("e", Modality::Acoustic, FRAME_PERIOD, Matrix::zeros(0, 40)),
            Err(Error::EmptyUtterance(_))
        ));
        let bad = Matrix::from_vec(1, 2, alloc::vec![1.0, f64::NAN]).unwrap();
        assert!(FeatureSequence::new("n", Modality::Acoustic, FRAME_PERIOD, bad).is_err());
    }
}
