use std::path::Path;

use vqart_core::features::{ArticulatoryLayout, FRAME_PERIOD};
use vqart_core::Matrix;

use crate::error::{Error, Result};

/// Relative tolerance on the spacing of the time column.
const RATE_TOLERANCE: f64 = 1e-3;

/// Coil coordinates in millimetres, `[T × 2C]` with `x, y` per coil.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaTrack {
    pub times: Vec<f64>,
    pub coils: Vec<String>,
    pub data: Matrix,
}

impl EmaTrack {
    /// Columns reordered to follow `layout`; extra coils in the file are dropped.
    pub fn select(&self, layout: &ArticulatoryLayout, path: &Path) -> Result<Matrix> {
        let mut cols = Vec::with_capacity(2 * layout.coils.len());
        for coil in &layout.coils {
            let i = self
                .coils
                .iter()
                .position(|c| *c == coil.name)
                .ok_or_else(|| Error::format(path, format!("coil `{}` required by the layout is missing", coil.name)))?;
            cols.extend([2 * i, 2 * i + 1]);
        }
        let flat = self.data.iter_rows().flat_map(|r| cols.iter().map(|&c| r[c])).collect();
        Ok(Matrix::from_vec(self.data.rows(), cols.len(), flat)?)
    }
}

/// Header `time,<coil>_x,<coil>_y,...`; rows must be 10 ms apart.
pub fn read_ema_csv(path: &Path) -> Result<EmaTrack> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if header.len() < 3 || header.len() % 2 == 0 {
        return Err(Error::format(path, "expected a time column followed by <coil>_x,<coil>_y pairs"));
    }
    let mut coils = Vec::new();
    for pair in header.iter().skip(1).collect::<Vec<_>>().chunks(2) {
        let (Some(cx), Some(cy)) = (pair[0].strip_suffix("_x"), pair[1].strip_suffix("_y")) else {
            return Err(Error::format(path, format!("columns `{}`,`{}` are not a <coil>_x,<coil>_y pair", pair[0], pair[1])));
        };
        if cx != cy {
            return Err(Error::format(path, format!("columns `{}` and `{}` name different coils", pair[0], pair[1])));
        }
        coils.push(cx.to_string());
    }
    let width = 2 * coils.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let mut fields = record.iter().map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::format(path, format!("row {}: `{s}` is not a number", n + 2)))
        });
        times.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        for v in fields {
            values.push(v?);
        }
    }
    if times.is_empty() {
        return Err(Error::format(path, "no frames"));
    }
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        if ((dt - FRAME_PERIOD) / FRAME_PERIOD).abs() > RATE_TOLERANCE {
            return Err(Error::format(
                path,
                format!("EMA must be sampled at 100 Hz; found a step of {dt} s at t = {}", w[0]),
            ));
        }
    }
    Ok(EmaTrack {
        coils,
        data: Matrix::from_vec(times.len(), width, values)?,
        times,
    })
}

pub fn write_ema_csv(path: &Path, track: &EmaTrack) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut header = vec!["time".to_string()];
    for c in &track.coils {
        header.push(format!("{c}_x"));
        header.push(format!("{c}_y"));
    }
    w.write_record(&header).map_err(|e| Error::format(path, e.to_string()))?;
    for (t, row) in track.times.iter().zip(track.data.iter_rows()) {
        let rec: Vec<String> = std::iter::once(*t).chain(row.iter().copied()).map(|v| v.to_string()).collect();
        w.write_record(&rec).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
