use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::phones::VcvSegment;
use super::report::{AbxDesign, AbxReport, DesignDistances, DistancePair};
use crate::error::{Error, Result};

/// Weight ω on the acoustic distance in `ω·d_ac + d_art`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FusionWeight(f64);

impl FusionWeight {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Parameter(format!("fusion weight must be positive and finite, got {omega}")));
        }
        Ok(FusionWeight(omega))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn late_fusion(acoustic: &DistancePair, articulatory: &DistancePair, omega: FusionWeight) -> DistancePair {
    let w = omega.0;
    DistancePair::new(
        w * acoustic.d_ax + articulatory.d_ax,
        w * acoustic.d_bx + articulatory.d_bx,
    )
}

/// Fuses two distance sets computed on the same design.
pub fn fuse_distances(
    acoustic: &DesignDistances,
    articulatory: &DesignDistances,
    omega: FusionWeight,
) -> Result<DesignDistances> {
    let fuse = |a: &[DistancePair], b: &[DistancePair]| -> Result<Vec<DistancePair>> {
        if a.len() != b.len() {
            return Err(Error::dim("late fusion triplet count", a.len(), b.len()));
        }
        Ok(a.iter().zip(b).map(|(x, y)| late_fusion(x, y, omega)).collect())
    };
    if acoustic.groups.len() != articulatory.groups.len() {
        return Err(Error::dim("late fusion group count", acoustic.groups.len(), articulatory.groups.len()));
    }
    Ok(DesignDistances {
        overall: fuse(&acoustic.overall, &articulatory.overall)?,
        groups: acoustic
            .groups
            .iter()
            .zip(&articulatory.groups)
            .map(|(a, b)| fuse(a, b))
            .collect::<Result<_>>()?,
    })
}

/// `points` values spaced evenly in log scale from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) {
        return Err(Error::Parameter(format!("log grid needs 0 < min ≤ max, got [{min}, {max}]")));
    }
    match points {
        0 => Err(Error::Parameter("log grid needs at least one point".into())),
        1 => Ok(alloc::vec![min]),
        _ => {
            let (lo, hi) = (libm::log10(min), libm::log10(max));
            Ok((0..points)
                .map(|i| {
                    if i + 1 == points {
                        max
                    } else {
                        libm::pow(10.0, lo + (hi - lo) * i as f64 / (points - 1) as f64)
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionPoint {
    pub omega: f64,
    pub overall: f64,
    pub manner: Option<f64>,
    pub place: Option<f64>,
}

pub fn fusion_sweep(
    design: &AbxDesign,
    vcvs: &[VcvSegment],
    acoustic: &DesignDistances,
    articulatory: &DesignDistances,
    omegas: &[f64],
) -> Result<Vec<FusionPoint>> {
    omegas
        .iter()
        .map(|&w| {
            let fused = fuse_distances(acoustic, articulatory, FusionWeight::new(w)?)?;
            let r = AbxReport::from_distances(design, vcvs, &fused)?;
            Ok(FusionPoint {
                omega: w,
                overall: r.overall,
                manner: r.manner_score,
                place: r.place_score,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_must_be_positive() {
        assert!(FusionWeight::new(0.0).is_err());
        assert!(FusionWeight::new(-1.0).is_err());
        assert!(FusionWeight::new(f64::NAN).is_err());
        assert!(FusionWeight::new(1e-3).is_ok());
    }

    #[test]
    fn articulatory_tie_defers_to_acoustics() {
        let art = DistancePair::new(0.4, 0.4);
        for ac in [DistancePair::new(0.1, 0.2), DistancePair::new(0.3, 0.2)] {
            for w in [0.1, 1.0, 10.0] {
                assert_eq!(late_fusion(&ac, &art, FusionWeight::new(w).unwrap()).success, ac.success);
            }
        }
    }

    #[test]
    fn hand_fusion() {
        let f = late_fusion(&DistancePair::new(0.2, 0.1), &DistancePair::new(0.1, 0.4), FusionWeight::new(2.0).unwrap());
        assert!((f.d_ax - 0.5).abs() < 1e-15 && (f.d_bx - 0.6).abs() < 1e-15);
        assert!(f.success);
    }

    #[test]
    fn default_grid() {
        let g = log_grid(0.1, 10.0, 25).unwrap();
        assert_eq!(g.len(), 25);
        assert!((g[0] - 0.1).abs() < 1e-15);
        assert_eq!(g[24], 10.0);
        assert!((g[12] - 1.0).abs() < 1e-12);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - libm::pow(10.0, 2.0 / 24.0)).abs() < 1e-9);
        }
    }
}
