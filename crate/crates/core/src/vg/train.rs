use log::{info, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{VgEncoderParams, EMBED_DIM};
use crate::backend::{phrase_vector, region_features, VisionBackend, WordVectors};
use crate::corpus::EntityRegionPair;
use crate::optim::{check_common, decayed_lr, train_val_split, Adam, EarlyStopping, Progress};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct VgTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Fractional learning-rate reduction applied after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub val_fraction: f64,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for VgTrainConfig {
    fn default() -> Self {
        VgTrainConfig {
            learning_rate: 5e-5,
            weight_decay: 1e-5,
            lr_decay: 0.05,
            batch_size: 64,
            patience: 3,
            max_epochs: 30,
            val_fraction: 0.15,
            embed_dim: EMBED_DIM,
            seed: 0,
        }
    }
}

impl VgTrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(
            self.batch_size,
            self.learning_rate,
            self.lr_decay,
            self.val_fraction,
            self.patience,
        )?;
        if self.embed_dim == 0 || self.max_epochs == 0 {
            return Err(Error::Config("embed dim and max epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VgEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean mini-batch loss seen while training this epoch.
    pub train_loss: f64,
    /// Loss on held-out pairs (the training pairs when nothing is held out).
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct VgTrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: VgEncoderParams,
    pub best_epoch: usize,
    pub history: Vec<VgEpoch>,
    /// Training-set loss of the initial parameters.
    pub initial_train_loss: f64,
    /// Training-set loss of the returned parameters.
    pub final_train_loss: f64,
    /// Pairs dropped because no entity token has a word vector.
    pub skipped_oov: usize,
}

struct Inputs {
    features: Array2<f64>,
    vectors: Array2<f64>,
}

impl Inputs {
    fn select(&self, rows: &[usize]) -> (Array2<f64>, Array2<f64>) {
        (
            self.features.select(ndarray::Axis(0), rows),
            self.vectors.select(ndarray::Axis(0), rows),
        )
    }

    /// Mean loss over consecutive chunks of `rows`.
    fn mean_loss(&self, params: &VgEncoderParams, rows: &[usize], batch: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0;
        for chunk in rows.chunks(batch) {
            let (f, v) = self.select(chunk);
            total += params.loss(f.view(), v.view())?;
            n += 1;
        }
        Ok(total / n as f64)
    }
}

fn prepare(
    pairs: &[EntityRegionPair],
    words: &dyn WordVectors,
    vision: &dyn VisionBackend,
) -> Result<(Inputs, usize)> {
    let mut feats = Vec::new();
    let mut vecs = Vec::new();
    let mut skipped = 0;
    let mut feat_dim = None;
    for pair in pairs {
        let v = match phrase_vector(words, &pair.entity_text) {
            Ok(v) => v,
            Err(Error::OutOfVocabulary(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let f = region_features(&pair.region, vision)?;
        match feat_dim {
            None => feat_dim = Some(f.len()),
            Some(d) if d != f.len() => {
                return Err(Error::Dimension {
                    context: "region features",
                    expected: d,
                    found: f.len(),
                })
            }
            _ => {}
        }
        feats.extend(f);
        vecs.extend(v);
    }
    let Some(feat_dim) = feat_dim else {
        return Err(Error::Empty("entity/region pairs with in-vocabulary entities"));
    };
    let n = feats.len() / feat_dim;
    Ok((
        Inputs {
            features: Array2::from_shape_vec((n, feat_dim), feats).expect("feature rows"),
            vectors: Array2::from_shape_vec((n, words.dim()), vecs).expect("vector rows"),
        },
        skipped,
    ))
}

/// Trains the region/noun encoder with Adam, per-epoch learning-rate decay
/// and early stopping on the validation loss.
pub fn train_vg(
    pairs: &[EntityRegionPair],
    words: &dyn WordVectors,
    vision: &dyn VisionBackend,
    config: &VgTrainConfig,
) -> Result<VgTrainOutcome> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("entity/region pair list"));
    }
    let (inputs, skipped_oov) = prepare(pairs, words, vision)?;
    if skipped_oov > 0 {
        warn!("skipped {skipped_oov} pairs with out-of-vocabulary entities");
    }
    let n = inputs.features.nrows();
    let (train, val) = train_val_split(n, config.val_fraction, config.seed);
    let monitor = if val.is_empty() { &train } else { &val };

    let mut params = VgEncoderParams::init(
        inputs.features.ncols(),
        inputs.vectors.ncols(),
        config.embed_dim,
        config.seed,
    );
    let initial_train_loss = inputs.mean_loss(&params, &train, config.batch_size)?;
    let mut adam = Adam::new(
        &[
            params.image_weight.len(),
            params.image_bias.len(),
            params.text_weight.len(),
            params.text_bias.len(),
        ],
        config.weight_decay,
    );
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order = train.clone();

    for epoch in 1..=config.max_epochs {
        let lr = decayed_lr(config.learning_rate, config.lr_decay, epoch - 1);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let (f, v) = inputs.select(chunk);
            let (loss, g) = params.loss_and_gradients(f.view(), v.view()).map_err(|e| match e {
                Error::NonFinite(what) => {
                    Error::NonFinite(format!("{what} at epoch {epoch}, batch {}", batches + 1))
                }
                other => other,
            })?;
            loss_sum += loss;
            batches += 1;
            adam.step(
                lr,
                &mut [
                    (params.image_weight.as_slice_mut().unwrap(), g.image_weight.as_slice().unwrap()),
                    (params.image_bias.as_slice_mut().unwrap(), g.image_bias.as_slice().unwrap()),
                    (params.text_weight.as_slice_mut().unwrap(), g.text_weight.as_slice().unwrap()),
                    (params.text_bias.as_slice_mut().unwrap(), g.text_bias.as_slice().unwrap()),
                ],
            );
        }
        let val_loss = inputs.mean_loss(&params, monitor, config.batch_size)?;
        let record = VgEpoch {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / batches as f64,
            val_loss,
        };
        info!(
            "epoch {epoch}: lr {lr:.3e} train {:.6} val {val_loss:.6}",
            record.train_loss
        );
        history.push(record);
        match stopper.observe(epoch, val_loss) {
            Progress::Improved => best = params.clone(),
            Progress::Waiting => {}
            Progress::Stop => break,
        }
    }

    let final_train_loss = inputs.mean_loss(&best, &train, config.batch_size)?;
    Ok(VgTrainOutcome {
        params: best,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        history,
        initial_train_loss,
        final_train_loss,
        skipped_oov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{HashedVision, HashedWordVectors};
    use crate::corpus::{BoundingBox, RegionPayload, RegionProposal};

    fn pair(entity: &str, features: Vec<f64>) -> EntityRegionPair {
        EntityRegionPair {
            entity_text: entity.into(),
            region: RegionProposal {
                image_id: String::new(),
                bbox: BoundingBox {
                    x: 0.0,
                    y: 0.0,
                    width: 1.0,
                    height: 1.0,
                },
                confidence: 1.0,
                payload: RegionPayload::Features(features),
            },
        }
    }

    #[test]
    fn batch_size_zero_is_config_error() {
        let cfg = VgTrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        let r = train_vg(
            &[pair("dog", vec![1.0])],
            &HashedWordVectors::new(4),
            &HashedVision::new(1),
            &cfg,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn empty_and_all_oov_inputs() {
        let words = HashedWordVectors::new(4).with_oov(["zzz"]);
        let cfg = VgTrainConfig::default();
        assert!(matches!(
            train_vg(&[], &words, &HashedVision::new(1), &cfg),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            train_vg(&[pair("zzz", vec![1.0])], &words, &HashedVision::new(1), &cfg),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn two_epochs_reduce_loss_on_toy_set() {
        let words = HashedWordVectors::new(8);
        let pairs: Vec<EntityRegionPair> = (0..64)
            .map(|i| {
                let name = format!("thing{i}");
                // region features are a fixed function of the word vector
                let v = words.vector(&name).unwrap();
                let f: Vec<f64> = (0..6).map(|k| v[k] - 0.5 * v[(k + 3) % 8]).collect();
                pair(&name, f)
            })
            .collect();
        let cfg = VgTrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            embed_dim: 32,
            max_epochs: 2,
            ..Default::default()
        };
        let out = train_vg(&pairs, &words, &HashedVision::new(6), &cfg).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(out.final_train_loss < out.initial_train_loss);
        let again = train_vg(&pairs, &words, &HashedVision::new(6), &cfg).unwrap();
        assert_eq!(again.params, out.params);
    }
}
