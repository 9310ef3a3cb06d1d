"""Regenerates mel_reference.json: log-mel frames of a fixed test signal,
computed with numpy's FFT and a Slaney-style area-normalized filterbank."""
import json

import numpy as np

SR, WIN, HOP, NFFT, NMELS, FLOOR = 16000, 400, 160, 512, 40, 1e-10


def hz_to_mel(f):
    f = np.asarray(f, dtype=float)
    lin = f / (200.0 / 3.0)
    log = 15.0 + np.log(np.maximum(f, 1e-300) / 1000.0) / (np.log(6.4) / 27.0)
    return np.where(f >= 1000.0, log, lin)


def mel_to_hz(m):
    m = np.asarray(m, dtype=float)
    lin = (200.0 / 3.0) * m
    log = 1000.0 * np.exp((np.log(6.4) / 27.0) * (m - 15.0))
    return np.where(m >= 15.0, log, lin)


def filterbank():
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(SR / 2), NMELS + 2))
    bins = np.fft.rfftfreq(NFFT, 1.0 / SR)
    fb = np.zeros((NMELS, bins.size))
    for m in range(NMELS):
        lo, c, hi = edges[m], edges[m + 1], edges[m + 2]
        tri = np.maximum(0.0, np.minimum((bins - lo) / (c - lo), (hi - bins) / (hi - c)))
        fb[m] = tri * 2.0 / (hi - lo)
    return fb


def main():
    n = 1040
    t = np.arange(n) / SR
    rng = np.random.default_rng(7)
    x = 0.4 * np.sin(2 * np.pi * 440 * t) + 0.2 * np.sin(2 * np.pi * 3100 * t + 0.3) + 0.05 * rng.standard_normal(n)
    x = np.round(x * 32768) / 32768
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(WIN) / WIN)
    fb = filterbank()
    frames = []
    for i in range(1 + (n - WIN) // HOP):
        seg = np.zeros(NFFT)
        seg[:WIN] = x[i * HOP : i * HOP + WIN] * window
        power = np.abs(np.fft.rfft(seg)) ** 2
        frames.append(np.log(np.maximum(fb @ power, FLOOR)).tolist())
    with open("mel_reference.json", "w") as f:
        json.dump({"sample_rate": SR, "samples": x.tolist(), "log_mel": frames}, f)


if __name__ == "__main__":
    main()
