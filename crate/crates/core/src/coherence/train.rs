use log::info;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encoder::PairEncoder;
use super::model::{bce_loss, CoherenceModel, SopHead};
use crate::corpus::SopExample;
use crate::optim::{check_common, decayed_lr, train_val_split, Adam, EarlyStopping, Progress};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CoherenceTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for CoherenceTrainConfig {
    fn default() -> Self {
        CoherenceTrainConfig {
            learning_rate: 1e-5,
            weight_decay: 1e-5,
            lr_decay: 0.05,
            batch_size: 32,
            patience: 5,
            max_epochs: 30,
            val_fraction: 0.15,
            seed: 0,
        }
    }
}

impl CoherenceTrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(
            self.batch_size,
            self.learning_rate,
            self.lr_decay,
            self.val_fraction,
            self.patience,
        )?;
        if self.max_epochs == 0 {
            return Err(Error::Config("max epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug)]
pub struct CoherenceOutcome {
    /// Model with the head from the lowest-validation-loss epoch.
    pub model: CoherenceModel,
    pub best_epoch: usize,
    pub history: Vec<CoherenceEpoch>,
}

impl CoherenceOutcome {
    pub fn best(&self) -> Option<&CoherenceEpoch> {
        self.history.iter().find(|e| e.epoch == self.best_epoch)
    }
}

/// Mean loss and accuracy of `head` on the given examples.
fn evaluate(
    encoder: &dyn PairEncoder,
    head: &SopHead,
    data: &[SopExample],
    rows: &[usize],
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for &i in rows {
        let ex = &data[i];
        let seq = super::format_pair(&ex.first, &ex.second, encoder.max_len())?;
        let [p, _] = head.probabilities(&encoder.encode(&seq)?)?;
        loss += bce_loss(p, ex.label);
        if u8::from(p >= 0.5) == ex.label {
            correct += 1;
        }
    }
    let n = rows.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains the sentence-order head (and the encoder, when it is trainable)
/// with binary cross-entropy, Adam, per-epoch decay and early stopping.
pub fn train_coherence(
    data: &[SopExample],
    mut encoder: Box<dyn PairEncoder>,
    config: &CoherenceTrainConfig,
) -> Result<CoherenceOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("sentence-order dataset"));
    }
    let dim = encoder.pooled_dim();
    let (train, val) = train_val_split(data.len(), config.val_fraction, config.seed);
    let monitor = if val.is_empty() { &train } else { &val };

    let mut head = SopHead::init(dim, config.seed);
    let mut best = head.clone();
    let mut adam = Adam::new(&[head.weight.len(), head.bias.len()], config.weight_decay);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order = train.clone();

    for epoch in 1..=config.max_epochs {
        let lr = decayed_lr(config.learning_rate, config.lr_decay, epoch - 1);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut gw = Array2::<f64>::zeros((2, dim));
            let mut gb = Array1::<f64>::zeros(2);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let ex = &data[i];
                let seq = super::format_pair(&ex.first, &ex.second, encoder.max_len())?;
                let pooled = encoder.encode(&seq)?;
                let probs = head.probabilities(&pooled)?;
                let loss = bce_loss(probs[0], ex.label);
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
                }
                loss_sum += loss;
                // label 1 targets class 0 (in order)
                let target = [f64::from(ex.label), 1.0 - f64::from(ex.label)];
                let dz = [(probs[0] - target[0]) * scale, (probs[1] - target[1]) * scale];
                for k in 0..2 {
                    for (g, h) in gw.row_mut(k).iter_mut().zip(&pooled) {
                        *g += dz[k] * h;
                    }
                    gb[k] += dz[k];
                }
                let g_pooled: Vec<f64> = (0..dim)
                    .map(|j| dz[0] * head.weight[[0, j]] + dz[1] * head.weight[[1, j]])
                    .collect();
                encoder.backward(&seq, &g_pooled, lr)?;
            }
            adam.step(
                lr,
                &mut [
                    (head.weight.as_slice_mut().unwrap(), gw.as_slice().unwrap()),
                    (head.bias.as_slice_mut().unwrap(), gb.as_slice().unwrap()),
                ],
            );
        }
        let (val_loss, val_accuracy) = evaluate(encoder.as_ref(), &head, data, monitor)?;
        let record = CoherenceEpoch {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_accuracy,
        };
        info!(
            "epoch {epoch}: lr {lr:.3e} train {:.6} val {val_loss:.6} acc {val_accuracy:.4}",
            record.train_loss
        );
        history.push(record);
        match stopper.observe(epoch, val_loss) {
            Progress::Improved => best = head.clone(),
            Progress::Waiting => {}
            Progress::Stop => break,
        }
    }

    Ok(CoherenceOutcome {
        model: CoherenceModel::new(encoder, best)?,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::HashedBagEncoder;

    #[test]
    fn batch_size_zero_is_config_error() {
        let cfg = CoherenceTrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        let ex = SopExample {
            first: "a".into(),
            second: "b".into(),
            label: 1,
        };
        let r = train_coherence(&[ex], Box::new(HashedBagEncoder::new(2, 16)), &cfg);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn empty_dataset() {
        let r = train_coherence(&[], Box::new(HashedBagEncoder::new(2, 16)), &Default::default());
        assert!(matches!(r, Err(Error::Empty(_))));
    }
}
