use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqart_core::features::{FeatureSequence, Modality};
use vqart_core::Matrix;

use crate::error::{Error, Result};
use crate::io::json::{read_json, write_json};

/// Metadata stored next to a feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub utterance_id: String,
    pub modality: Modality,
    pub frame_period: f64,
    pub frames: usize,
    pub dims: usize,
}

/// `frames/u1.acoustic.csv` → `frames/u1.acoustic.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Header `dim_0..dim_{F-1}`, one row per frame. Values are written in
/// shortest round-trip form so reading gives back the same bits.
pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_record((0..seq.dim()).map(|i| format!("dim_{i}")))
        .map_err(|e| Error::format(path, e.to_string()))?;
    for row in seq.frames().iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &FeatureSidecar {
            utterance_id: seq.utterance_id().to_string(),
            modality: seq.modality(),
            frame_period: seq.frame_period(),
            frames: seq.len(),
            dims: seq.dim(),
        },
    )
}

pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let meta: FeatureSidecar = read_json(&sidecar_path(path))?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if header.len() != meta.dims || header.iter().enumerate().any(|(i, h)| h != format!("dim_{i}")) {
        return Err(Error::format(path, format!("header is not dim_0..dim_{}", meta.dims.saturating_sub(1))));
    }
    let mut values = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        for s in record.iter() {
            values.push(
                s.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("row {}: `{s}` is not a number", n + 2)))?,
            );
        }
    }
    let rows = values.len() / meta.dims.max(1);
    if rows != meta.frames {
        return Err(Error::format(path, format!("sidecar says {} frames, file has {rows}", meta.frames)));
    }
    let frames = Matrix::from_vec(rows, meta.dims, values)?;
    Ok(FeatureSequence::new(meta.utterance_id, meta.modality, meta.frame_period, frames)?)
}
