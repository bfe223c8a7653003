//! Visual grounding: a region/noun dual encoder trained with a symmetric
//! soft-target contrastive loss, and a LogSumExp-pooled grounding score.

mod loss;
mod params;
mod score;
mod train;

pub use loss::{symmetric_loss, symmetric_loss_grad, SymmetricLoss};
pub use params::{encode_region, encode_text, VgEncoderParams, VgGradients, EMBED_DIM};
pub use score::{
    cosine, lse_pool, scale_score, GroundingScore, NounMatch, VgOptions, VgScorer,
    DEFAULT_TOP_REGIONS,
};
pub use train::{train_vg, VgEpoch, VgTrainConfig, VgTrainOutcome};
