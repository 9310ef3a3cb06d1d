//! Guided PCA over EMA coil coordinates.
//!
//! The jaw parameter is the first principal component of the jaw coil(s).
//! Lip and tongue coordinates are regressed on it and role-wise PCA of the
//! residuals keeps two lip and three tongue components. The velum, when
//! recorded, contributes its first principal component. Output order is
//! `[jaw, lips×2, tongue×3, (velum)]`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sequence::{FeatureSequence, Modality, FRAME_PERIOD};
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArticulatorRole {
    Jaw,
    Lips,
    Tongue,
    Velum,
}

impl ArticulatorRole {
    pub const ALL: [ArticulatorRole; 4] = [
        ArticulatorRole::Jaw,
        ArticulatorRole::Lips,
        ArticulatorRole::Tongue,
        ArticulatorRole::Velum,
    ];

    pub fn components(self) -> usize {
        match self {
            ArticulatorRole::Jaw | ArticulatorRole::Velum => 1,
            ArticulatorRole::Lips => 2,
            ArticulatorRole::Tongue => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArticulatorRole::Jaw => "jaw",
            ArticulatorRole::Lips => "lips",
            ArticulatorRole::Tongue => "tongue",
            ArticulatorRole::Velum => "velum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coil {
    pub name: String,
    pub role: ArticulatorRole,
}

/// Ordered coil list; coil `i` occupies columns `2i` (x) and `2i+1` (y).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticulatoryLayout {
    pub coils: Vec<Coil>,
}

impl ArticulatoryLayout {
    pub fn new(coils: Vec<Coil>) -> Result<Self> {
        let layout = ArticulatoryLayout { coils };
        layout.validate()?;
        Ok(layout)
    }

    fn from_names(names: &[(&str, ArticulatorRole)]) -> Self {
        ArticulatoryLayout {
            coils: names
                .iter()
                .map(|(n, r)| Coil {
                    name: n.to_string(),
                    role: *r,
                })
                .collect(),
        }
    }

    /// Seven coils: lower incisor, two lips, three tongue points, velum.
    pub fn mocha() -> Self {
        use ArticulatorRole::*;
        Self::from_names(&[
            ("li", Jaw),
            ("ul", Lips),
            ("ll", Lips),
            ("tt", Tongue),
            ("tb", Tongue),
            ("td", Tongue),
            ("v", Velum),
        ])
    }

    /// Six coils: as [`ArticulatoryLayout::mocha`] without the velum.
    pub fn pb2007() -> Self {
        use ArticulatorRole::*;
        Self::from_names(&[
            ("jaw", Jaw),
            ("ul", Lips),
            ("ll", Lips),
            ("tt", Tongue),
            ("tm", Tongue),
            ("tb", Tongue),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        for role in ArticulatorRole::ALL {
            let dims = 2 * self.role_coils(role).len();
            if role == ArticulatorRole::Velum && dims == 0 {
                continue;
            }
            if dims < role.components() || dims == 0 {
                return Err(Error::Config(format!(
                    "layout has {} coordinates for {}, needs at least {}",
                    dims,
                    role.as_str(),
                    role.components().max(1)
                )));
            }
        }
        Ok(())
    }

    pub fn role_coils(&self, role: ArticulatorRole) -> Vec<usize> {
        self.coils
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn role_columns(&self, role: ArticulatorRole) -> Vec<usize> {
        self.role_coils(role).iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect()
    }

    pub fn has_velum(&self) -> bool {
        !self.role_coils(ArticulatorRole::Velum).is_empty()
    }

    pub fn column_count(&self) -> usize {
        2 * self.coils.len()
    }

    /// 7 with a velum coil, 6 without.
    pub fn output_dim(&self) -> usize {
        if self.has_velum() {
            7
        } else {
            6
        }
    }
}

/// Fitted parameters for one articulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleBlock {
    pub role: ArticulatorRole,
    pub columns: Vec<usize>,
    /// Regression of each column on the jaw parameter (zeros for jaw and velum).
    pub jaw_slope: Vec<f64>,
    /// `[components × columns]`, orthonormal rows.
    pub axes: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedPcaModel {
    pub layout: ArticulatoryLayout,
    pub means: Vec<f64>,
    /// Jaw first, then lips, tongue and velum when present.
    pub blocks: Vec<RoleBlock>,
}

fn principal_axes(data: &Matrix, k: usize) -> Result<Matrix> {
    let (_, vectors) = symmetric_eigen(&data.covariance(&vec![0.0; data.cols()]))?;
    let mut axes = vectors.slice_rows(0, k);
    for i in 0..k {
        let row = axes.row_mut(i);
        let mut lead = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[lead].abs() {
                lead = j;
            }
        }
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(axes)
}

fn centered_columns(ema: &Matrix, columns: &[usize], means: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(ema.rows(), columns.len());
    for t in 0..ema.rows() {
        let src = ema.row(t);
        for (slot, &c) in m.row_mut(t).iter_mut().zip(columns) {
            *slot = src[c] - means[c];
        }
    }
    m
}

const MIN_FRAMES: usize = 100;
const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Fits the guided-PCA model on `[frames × 2·coils]` EMA coordinates.
///
/// A role whose coordinates have (numerically) zero total variance is a fit
/// error, except the jaw: a frozen jaw yields a zero jaw parameter and
/// zero regression slopes, reducing the model to plain role-wise PCA.
pub fn fit_guided_pca(ema: &Matrix, layout: &ArticulatoryLayout) -> Result<GuidedPcaModel> {
    layout.validate()?;
    if ema.cols() != layout.column_count() {
        return Err(Error::dim("EMA columns", layout.column_count(), ema.cols()));
    }
    if ema.rows() < MIN_FRAMES {
        return Err(Error::Fit {
            role: "all".into(),
            reason: format!("{} frames, need at least {MIN_FRAMES}", ema.rows()),
        });
    }
    if !ema.is_finite() {
        return Err(Error::Ingestion("EMA data contain non-finite values".into()));
    }
    let means = ema.column_means();
    let total_variance = |m: &Matrix| {
        let cov = m.covariance(&vec![0.0; m.cols()]);
        (0..m.cols()).map(|i| cov[(i, i)]).sum::<f64>()
    };

    let jaw_cols = layout.role_columns(ArticulatorRole::Jaw);
    let jaw_data = centered_columns(ema, &jaw_cols, &means);
    let jaw_axes = principal_axes(&jaw_data, 1)?;
    let jaw_param: Vec<f64> = jaw_data.iter_rows().map(|r| dot(r, jaw_axes.row(0))).collect();
    let jaw_energy: f64 = jaw_param.iter().map(|j| j * j).sum();
    let jaw_frozen = total_variance(&jaw_data) <= DEGENERATE_VARIANCE;

    let mut blocks = vec![RoleBlock {
        role: ArticulatorRole::Jaw,
        jaw_slope: vec![0.0; jaw_cols.len()],
        columns: jaw_cols,
        axes: jaw_axes,
    }];

    for role in [ArticulatorRole::Lips, ArticulatorRole::Tongue, ArticulatorRole::Velum] {
        let cols = layout.role_columns(role);
        if cols.is_empty() {
            continue;
        }
        let mut data = centered_columns(ema, &cols, &means);
        if total_variance(&data) <= DEGENERATE_VARIANCE {
            return Err(Error::Fit {
                role: role.as_str().into(),
                reason: "coordinates have zero variance".into(),
            });
        }
        let regress = role != ArticulatorRole::Velum && !jaw_frozen;
        let slope: Vec<f64> = (0..cols.len())
            .map(|c| {
                if regress {
                    data.iter_rows().zip(&jaw_param).map(|(r, j)| r[c] * j).sum::<f64>() / jaw_energy
                } else {
                    0.0
                }
            })
            .collect();
        for (t, &j) in jaw_param.iter().enumerate() {
            for (v, s) in data.row_mut(t).iter_mut().zip(&slope) {
                *v -= s * j;
            }
        }
        let axes = principal_axes(&data, role.components())?;
        blocks.push(RoleBlock {
            role,
            columns: cols,
            jaw_slope: slope,
            axes,
        });
    }
    Ok(GuidedPcaModel {
        layout: layout.clone(),
        means,
        blocks,
    })
}

impl GuidedPcaModel {
    pub fn output_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.axes.rows()).sum()
    }

    pub fn project_frame(&self, frame: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_dim());
        let mut jaw = 0.0;
        let mut centered = Vec::new();
        for block in &self.blocks {
            centered.clear();
            centered.extend(
                block
                    .columns
                    .iter()
                    .zip(&block.jaw_slope)
                    .map(|(&c, s)| frame[c] - self.means[c] - s * jaw),
            );
            for axis in block.axes.iter_rows() {
                out.push(dot(axis, &centered));
            }
            if block.role == ArticulatorRole::Jaw {
                jaw = out[0];
            }
        }
        out
    }

    /// Maps parameter frames back to coil coordinates (the in-span part only).
    pub fn reconstruct(&self, params: &Matrix) -> Result<Matrix> {
        if params.cols() != self.output_dim() {
            return Err(Error::dim("guided-PCA parameters", self.output_dim(), params.cols()));
        }
        let mut ema = Matrix::zeros(params.rows(), self.layout.column_count());
        for t in 0..params.rows() {
            let p = params.row(t);
            let jaw = p[0];
            let row = ema.row_mut(t);
            row.copy_from_slice(&self.means);
            let mut offset = 0;
            for block in &self.blocks {
                for (ci, &c) in block.columns.iter().enumerate() {
                    row[c] += block.jaw_slope[ci] * jaw;
                    for k in 0..block.axes.rows() {
                        row[c] += block.axes[(k, ci)] * p[offset + k];
                    }
                }
                offset += block.axes.rows();
            }
        }
        Ok(ema)
    }
}

/// Projects EMA frames into guided-PCA parameters.
pub fn apply_guided_pca(model: &GuidedPcaModel, ema: &Matrix, utterance_id: &str) -> Result<FeatureSequence> {
    if ema.cols() != model.layout.column_count() {
        return Err(Error::dim("EMA columns", model.layout.column_count(), ema.cols()));
    }
    let mut out = Matrix::zeros(ema.rows(), model.output_dim());
    for t in 0..ema.rows() {
        out.row_mut(t).copy_from_slice(&model.project_frame(ema.row(t)));
    }
    FeatureSequence::new(utterance_id, Modality::Articulatory, FRAME_PERIOD, out)
}
