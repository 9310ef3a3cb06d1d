use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::{RngSeed, SeedRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_entries_per_param: Option<usize>,
    pub seed: RngSeed,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            max_entries_per_param: None,
            seed: RngSeed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub checked: usize,
    /// `‖analytic − numeric‖ / (‖analytic‖ + ‖numeric‖)` over the checked entries.
    pub relative_error: f64,
    pub max_abs_error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.entries.iter().map(|e| e.relative_error).fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    pub fn passed(&self) -> bool {
        self.flagged().next().is_none()
    }
}

fn pick_entries(len: usize, max: Option<usize>, rng: &mut SeedRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if let Some(m) = max {
        if m < len {
            rng.shuffle(&mut idx);
            idx.truncate(m);
            idx.sort_unstable();
        }
    }
    idx
}

/// Compares analytic gradients with central differences of `loss`.
///
/// `loss` receives the full (possibly perturbed) parameter list. It must be
/// deterministic: eval mode, or a dropout mask reproduced from a fixed seed.
pub fn gradient_check<F>(
    mut loss: F,
    params: &[(String, Vec<f64>)],
    analytic: &[Vec<f64>],
    opts: GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&[Vec<f64>]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "one analytic gradient per parameter");
    let mut rng = opts.seed.rng();
    let mut values: Vec<Vec<f64>> = params.iter().map(|(_, v)| v.clone()).collect();
    let mut entries = Vec::with_capacity(params.len());
    for (k, (name, _)) in params.iter().enumerate() {
        let idx = pick_entries(values[k].len(), opts.max_entries_per_param, &mut rng);
        let (mut diff2, mut a2, mut n2, mut max_abs) = (0.0, 0.0, 0.0, 0.0f64);
        for &i in &idx {
            let orig = values[k][i];
            values[k][i] = orig + opts.step;
            let up = loss(&values);
            values[k][i] = orig - opts.step;
            let down = loss(&values);
            values[k][i] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic[k][i];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
            max_abs = max_abs.max((a - numeric).abs());
        }
        let denom = libm::sqrt(a2) + libm::sqrt(n2);
        let relative_error = if denom > 0.0 { libm::sqrt(diff2) / denom } else { 0.0 };
        entries.push(GradCheckEntry {
            name: name.clone(),
            checked: idx.len(),
            relative_error,
            max_abs_error: max_abs,
            flagged: !(relative_error <= opts.tolerance),
        });
    }
    GradCheckReport {
        tolerance: opts.tolerance,
        entries,
    }
}
