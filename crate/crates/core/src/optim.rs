//! Training utilities shared by the grounding encoder and the sentence-order
//! head: Adam with L2 weight decay, per-epoch learning-rate decay, early
//! stopping and a seeded train/validation split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Adam with coupled L2 weight decay (`g += wd * p`). One instance updates a
/// fixed list of parameter tensors, identified by position.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(sizes: &[usize], weight_decay: f64) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: sizes.iter().map(|&n| (vec![0.0; n], vec![0.0; n])).collect(),
        }
    }

    /// Applies one update. `tensors[k]` pairs parameters with their gradient.
    pub fn step(&mut self, lr: f64, tensors: &mut [(&mut [f64], &[f64])]) {
        assert_eq!(tensors.len(), self.moments.len(), "tensor count changed");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for ((params, grads), (m, v)) in tensors.iter_mut().zip(&mut self.moments) {
            assert_eq!(params.len(), m.len(), "tensor size changed");
            for i in 0..m.len() {
                let g = grads[i] + self.weight_decay * params[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Learning rate for 0-based `epoch` when the rate shrinks by `decay` (a
/// fraction, e.g. 0.05) after every epoch.
pub fn decayed_lr(initial: f64, decay: f64, epoch: usize) -> f64 {
    initial * (1.0 - decay).powi(epoch as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Waiting,
    Stop,
}

/// Stops once the monitored loss has failed to improve for `patience`
/// consecutive epochs.
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

    /// Records the loss of 1-based `epoch`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Progress {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.since_best = 0;
            return Progress::Improved;
        }
        self.since_best += 1;
        if self.since_best >= self.patience {
            Progress::Stop
        } else {
            Progress::Waiting
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Shuffles `0..n` with ChaCha8 and holds out `round(n * val_fraction)`
/// indices for validation, always leaving at least one training index.
pub fn train_val_split(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((n as f64 * val_fraction).round() as usize).min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Checks the knobs common to both training loops.
pub fn check_common(
    batch_size: usize,
    lr: f64,
    lr_decay: f64,
    val_fraction: f64,
    patience: usize,
) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!("learning rate {lr} must be positive")));
    }
    if !(0.0..1.0).contains(&lr_decay) {
        return Err(Error::Config(format!("lr decay {lr_decay} must be in [0, 1)")));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!(
            "validation fraction {val_fraction} must be in [0, 1)"
        )));
    }
    if patience == 0 {
        return Err(Error::Config("patience must be at least 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(patience: usize, losses: &[f64]) -> (usize, Option<usize>) {
        let mut es = EarlyStopping::new(patience);
        for (i, &l) in losses.iter().enumerate() {
            if es.observe(i + 1, l) == Progress::Stop {
                return (i + 1, es.best_epoch());
            }
        }
        (losses.len(), es.best_epoch())
    }

    #[test]
    fn patience_three() {
        assert_eq!(run(3, &[1.0, 0.9, 0.91, 0.92, 0.93]), (5, Some(2)));
    }

    #[test]
    fn patience_five() {
        assert_eq!(run(5, &[0.5, 0.4, 0.41, 0.42, 0.43, 0.44, 0.45]), (7, Some(2)));
    }

    #[test]
    fn improvement_resets_counter() {
        assert_eq!(run(2, &[1.0, 1.1, 0.5, 0.6, 0.7, 0.1]), (5, Some(3)));
    }

    #[test]
    fn split_sizes() {
        let (t, v) = train_val_split(64, 0.15, 0);
        assert_eq!((t.len(), v.len()), (54, 10));
        let (t, v) = train_val_split(1, 0.15, 0);
        assert_eq!((t.len(), v.len()), (1, 0));
        let (mut all, v) = train_val_split(20, 0.15, 3);
        all.extend(v);
        all.sort();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert_eq!(train_val_split(20, 0.15, 3), train_val_split(20, 0.15, 3));
    }

    #[test]
    fn lr_schedule() {
        assert_eq!(decayed_lr(1.0, 0.05, 0), 1.0);
        assert!((decayed_lr(5e-5, 0.05, 2) - 5e-5 * 0.9025).abs() < 1e-18);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut adam = Adam::new(&[2], 0.0);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            adam.step(0.01, &mut [(&mut x[..], &g[..])]);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn config_checks() {
        assert!(check_common(0, 1e-3, 0.05, 0.15, 3).is_err());
        assert!(check_common(8, 0.0, 0.05, 0.15, 3).is_err());
        assert!(check_common(8, 1e-3, 1.0, 0.15, 3).is_err());
        assert!(check_common(8, 1e-3, 0.05, 0.15, 0).is_err());
        assert!(check_common(8, 1e-3, 0.05, 0.15, 3).is_ok());
    }
}
