use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

const TINY_NORM: f64 = 1e-12;

/// `1 − cos(a, b)` clamped to `[0, 2]`.
///
/// Bitwise-equal frames are at distance 0. A near-zero vector (norm below
/// `1e-12`) is at distance 1 from any non-degenerate frame and 0 from
/// another near-zero vector.
pub fn frame_cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 0.0;
    }
    let na = libm::sqrt(dot(a, a));
    let nb = libm::sqrt(dot(b, b));
    match (na < TINY_NORM, nb < TINY_NORM) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => (1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0),
    }
}

/// Mean cost along the minimum-total-cost monotone path through `cost`.
///
/// Steps are `(1,0)`, `(0,1)` and `(1,1)` from `(0,0)` to the far corner.
/// Among paths of equal total cost the one with fewer nodes wins, which
/// keeps the result symmetric under transposition.
pub fn dtw_mean_cost(cost: &Matrix) -> f64 {
    let (n, m) = cost.shape();
    let mut acc = vec![(0.0f64, 0usize); n * m];
    let better = |p: (f64, usize), q: (f64, usize)| p.0 < q.0 || (p.0 == q.0 && p.1 < q.1);
    for i in 0..n {
        for j in 0..m {
            let c = cost[(i, j)];
            let prev = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, usize::MAX);
                if i > 0 && better(acc[(i - 1) * m + j], best) {
                    best = acc[(i - 1) * m + j];
                }
                if j > 0 && better(acc[i * m + j - 1], best) {
                    best = acc[i * m + j - 1];
                }
                if i > 0 && j > 0 && better(acc[(i - 1) * m + j - 1], best) {
                    best = acc[(i - 1) * m + j - 1];
                }
                best
            };
            acc[i * m + j] = (prev.0 + c, prev.1 + 1);
        }
    }
    let (total, len) = acc[n * m - 1];
    total / len as f64
}

/// Mean frame-wise cosine distance along the DTW path between two sequences of frames.
pub fn dtw_cosine_distance(a: &Matrix, x: &Matrix) -> Result<f64> {
    if a.rows() == 0 || x.rows() == 0 {
        return Err(Error::Evaluation("DTW on an empty sequence".into()));
    }
    if a.cols() != x.cols() {
        return Err(Error::dim("DTW embedding dimension", a.cols(), x.cols()));
    }
    let mut cost = Matrix::zeros(a.rows(), x.rows());
    for i in 0..a.rows() {
        for j in 0..x.rows() {
            cost[(i, j)] = frame_cosine_distance(a.row(i), x.row(j));
        }
    }
    Ok(dtw_mean_cost(&cost))
}
