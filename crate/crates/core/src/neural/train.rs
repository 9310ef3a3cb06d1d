use alloc::vec::Vec;

use crate::rng::SeedRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopVerdict {
    Improved,
    Continue,
    Stop,
}

/// Patience-based early stopping on a validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopVerdict {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.since_best = 0;
            StopVerdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                StopVerdict::Stop
            } else {
                StopVerdict::Continue
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

/// Shuffles `0..n` and cuts it into batches of `batch` indices (last one may be short).
pub fn sequence_batches(n: usize, batch: usize, rng: &mut SeedRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch.max(1)).map(|c| c.to_vec()).collect()
}
