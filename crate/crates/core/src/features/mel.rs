//! Log-mel spectrogram extraction.
//!
//! Recipe, fixed bit for bit:
//! * frames of `window` seconds every `hop` seconds, no padding, so
//!   `T = 1 + ⌊(N − window_samples) / hop_samples⌋`;
//! * periodic Hann window, zero-padded at the end to `fft_size`;
//! * power spectrum `|X_k|²` for `k = 0..=fft_size/2`;
//! * triangular filters on the Slaney mel scale, area-normalized
//!   (each filter scaled by `2 / (f_right − f_left)`);
//! * `ln(max(power, floor))`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sequence::{FeatureSequence, Modality};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    /// seconds
    pub window: f64,
    /// seconds
    pub hop: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub floor: f64,
    pub fmin: f64,
    /// Defaults to Nyquist when `None`.
    pub fmax: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            sample_rate: 16_000,
            window: 0.025,
            hop: 0.010,
            n_mels: 40,
            fft_size: 512,
            floor: 1e-10,
            fmin: 0.0,
            fmax: None,
        }
    }
}

impl MelConfig {
    pub fn window_samples(&self) -> usize {
        libm::round(self.window * f64::from(self.sample_rate)) as usize
    }

    pub fn hop_samples(&self) -> usize {
        libm::round(self.hop * f64::from(self.sample_rate)) as usize
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        let w = self.window_samples();
        if n_samples < w {
            0
        } else {
            1 + (n_samples - w) / self.hop_samples()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.window_samples();
        let h = self.hop_samples();
        if h == 0 || w == 0 || h > w {
            return Err(Error::Config(format!("need 0 < hop ≤ window, got hop {h} window {w} samples")));
        }
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < w {
            return Err(Error::Config(format!(
                "fft_size {} must be a power of two no smaller than the window ({w})",
                self.fft_size
            )));
        }
        if !(self.floor > 0.0) {
            return Err(Error::Config("log floor must be positive".into()));
        }
        Ok(())
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = libm::log(6.4) / 27.0;
    if hz >= MIN_LOG_HZ {
        min_log_mel + libm::log(hz / MIN_LOG_HZ) / logstep
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = libm::log(6.4) / 27.0;
    if mel >= min_log_mel {
        MIN_LOG_HZ * libm::exp(logstep * (mel - min_log_mel))
    } else {
        F_SP * mel
    }
}

/// Triangular filter weights, `[n_mels × (fft_size/2 + 1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Matrix,
    /// `n_mels + 2` band edges in Hz; filter `m` spans `edges[m]..edges[m+2]`, peaking at `edges[m+1]`.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig) -> Self {
        let sr = f64::from(cfg.sample_rate);
        let n_bins = cfg.fft_size / 2 + 1;
        let fmax = cfg.fmax.unwrap_or(sr / 2.0);
        let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
        let n = cfg.n_mels;
        let edges_hz: Vec<f64> = (0..n + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n + 1) as f64))
            .collect();
        let bin_hz: Vec<f64> = (0..n_bins).map(|k| k as f64 * sr / cfg.fft_size as f64).collect();
        let mut weights = Matrix::zeros(n, n_bins);
        for m in 0..n {
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            let enorm = 2.0 / (right - left);
            let row = weights.row_mut(m);
            for (k, &f) in bin_hz.iter().enumerate() {
                let rising = (f - left) / (center - left);
                let falling = (right - f) / (right - center);
                row[k] = rising.min(falling).max(0.0) * enorm;
            }
        }
        MelFilterbank { weights, edges_hz }
    }

    /// Index of the filter whose center is nearest to `hz`.
    pub fn nearest_filter(&self, hz: f64) -> usize {
        let centers = &self.edges_hz[1..self.edges_hz.len() - 1];
        let mut best = 0;
        for (m, c) in centers.iter().enumerate() {
            if (c - hz).abs() < (centers[best] - hz).abs() {
                best = m;
            }
        }
        best
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights.iter_rows().map(|w| dot(w, power)).collect()
    }
}

/// In-place iterative radix-2 FFT over separate real/imaginary buffers.
struct Fft {
    size: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl Fft {
    fn new(size: usize) -> Self {
        let bits = size.trailing_zeros();
        let bitrev = (0..size)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let half = size / 2;
        let step = -core::f64::consts::TAU / size as f64;
        Fft {
            size,
            cos: (0..half).map(|k| libm::cos(step * k as f64)).collect(),
            sin: (0..half).map(|k| libm::sin(step * k as f64)).collect(),
            bitrev,
        }
    }

    fn run(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.size;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let (wr, wi) = (self.cos[k * stride], self.sin[k * stride]);
                    let a = start + k;
                    let b = a + len / 2;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }
}

/// Reusable extractor holding the window, FFT tables and filterbank.
pub struct MelExtractor {
    cfg: MelConfig,
    window: Vec<f64>,
    fft: Fft,
    filterbank: MelFilterbank,
}

impl MelExtractor {
    pub fn new(cfg: MelConfig) -> Result<Self> {
        cfg.validate()?;
        let w = cfg.window_samples();
        let window = (0..w)
            .map(|n| 0.5 - 0.5 * libm::cos(core::f64::consts::TAU * n as f64 / w as f64))
            .collect();
        Ok(MelExtractor {
            fft: Fft::new(cfg.fft_size),
            filterbank: MelFilterbank::new(&cfg),
            window,
            cfg,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn hann_window(&self) -> &[f64] {
        &self.window
    }

    /// `|X_k|²` of one windowed frame starting at `start`.
    pub fn power_spectrum(&self, samples: &[f64], start: usize) -> Vec<f64> {
        let n = self.cfg.fft_size;
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for (i, w) in self.window.iter().enumerate() {
            re[i] = samples[start + i] * w;
        }
        self.fft.run(&mut re, &mut im);
        (0..=n / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect()
    }

    pub fn extract(&self, samples: &[f64], sample_rate: u32, utterance_id: &str) -> Result<FeatureSequence> {
        if sample_rate != self.cfg.sample_rate {
            return Err(Error::Ingestion(format!(
                "`{utterance_id}` sampled at {sample_rate} Hz, expected {} Hz",
                self.cfg.sample_rate
            )));
        }
        let t = self.cfg.frame_count(samples.len());
        if t == 0 {
            return Err(Error::EmptyUtterance(String::from(utterance_id)));
        }
        let hop = self.cfg.hop_samples();
        let mut frames = Matrix::zeros(t, self.cfg.n_mels);
        for i in 0..t {
            let power = self.power_spectrum(samples, i * hop);
            let mel = self.filterbank.apply(&power);
            for (slot, m) in frames.row_mut(i).iter_mut().zip(mel) {
                *slot = libm::log(m.max(self.cfg.floor));
            }
        }
        FeatureSequence::new(utterance_id, Modality::Acoustic, self.cfg.hop, frames)
    }
}

/// One-shot log-mel extraction. Prefer [`MelExtractor`] for many utterances.
pub fn compute_mel(samples: &[f64], sample_rate: u32, cfg: &MelConfig, utterance_id: &str) -> Result<FeatureSequence> {
    MelExtractor::new(cfg.clone())?.extract(samples, sample_rate, utterance_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(hz: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(core::f64::consts::TAU * hz * i as f64 / 16_000.0))
            .collect()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let cfg = MelConfig::default();
        assert_eq!(cfg.frame_count(16_000), 98);
        let seq = compute_mel(&tone(440.0, 16_000), 16_000, &cfg, "t").unwrap();
        assert_eq!(seq.len(), 98);
        assert_eq!(seq.dim(), 40);
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let seq = compute_mel(&vec![0.0; 16_000], 16_000, &MelConfig::default(), "s").unwrap();
        let floor = libm::log(1e-10);
        assert!(seq.frames().as_slice().iter().all(|&v| v == floor));
    }

    #[test]
    fn fft_matches_direct_dft() {
        let ex = MelExtractor::new(MelConfig::default()).unwrap();
        let x: Vec<f64> = (0..400).map(|i| libm::sin(i as f64 * 0.37) + 0.2 * libm::cos(i as f64 * 1.9)).collect();
        let fast = ex.power_spectrum(&x, 0);
        let w = ex.hann_window();
        for k in [0usize, 1, 17, 100, 255, 256] {
            let (mut re, mut im) = (0.0, 0.0);
            for n in 0..400 {
                let ang = -core::f64::consts::TAU * (k * n) as f64 / 512.0;
                re += x[n] * w[n] * libm::cos(ang);
                im += x[n] * w[n] * libm::sin(ang);
            }
            let direct = re * re + im * im;
            assert!((fast[k] - direct).abs() <= 1e-9 * direct.max(1.0), "bin {k}");
        }
    }

    #[test]
    fn wrong_rate_and_short_input_are_errors() {
        let cfg = MelConfig::default();
        assert!(matches!(compute_mel(&tone(1.0, 800), 8_000, &cfg, "r"), Err(Error::Ingestion(_))));
        assert!(matches!(compute_mel(&tone(1.0, 399), 16_000, &cfg, "r"), Err(Error::EmptyUtterance(_))));
    }

    #[test]
    fn one_hop_shift_shifts_frames() {
        let x: Vec<f64> = (0..8_000).map(|i| libm::sin(i as f64 * 0.05) * libm::cos(i as f64 * 0.0031)).collect();
        let cfg = MelConfig::default();
        let a = compute_mel(&x, 16_000, &cfg, "a").unwrap();
        let b = compute_mel(&x[160..], 16_000, &cfg, "b").unwrap();
        for t in 0..b.len() {
            for (u, v) in a.frames().row(t + 1).iter().zip(b.frames().row(t)) {
                assert!((u - v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn filters_are_area_normalized() {
        let cfg = MelConfig::default();
        let fb = MelFilterbank::new(&cfg);
        // Continuous triangles of height 2/(right-left) integrate to 1; the
        // discrete sum times bin width approximates that for wide filters.
        let bin = 16_000.0 / 512.0;
        let last = fb.weights.row(39).iter().sum::<f64>() * bin;
        assert!((last - 1.0).abs() < 0.05, "area {last}");
        assert!((hz_to_mel(mel_to_hz(27.3)) - 27.3).abs() < 1e-12);
    }
}
