//! Coherence: a sentence-order classifier over pooled pair representations,
//! averaged across the adjacent sentence pairs of a story.

mod encoder;
mod model;
mod train;

pub use encoder::{
    backend_from_config, format_pair, HashedBagEncoder, PairEncoder, PairSequence, CLS, SEP,
};
pub use model::{
    bce_loss, coherence_score, sop_predict, CoherenceModel, CoherenceScore, PairProbability,
    SopHead, PROB_EPSILON,
};
pub use train::{train_coherence, CoherenceEpoch, CoherenceOutcome, CoherenceTrainConfig};
