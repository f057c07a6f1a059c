//! Arithmetic graded response model (AGRM) quality grading.
//!
//! The crate computes unimodal grade distributions from an ability and an
//! arithmetic ladder of difficulty thresholds, wraps them in a two-branch
//! head that consumes precomputed image/text features, and trains that
//! head with hand-derived gradients.
//!
//! * [`grm`]: closed-form probabilities, peaks, boundary intersections, unimodality.
//! * [`head`]: ability and difficulty branches, activations, initialization.
//! * [`metrics`]: MAE and PLCC losses, SRCC and PLCC metrics.
//! * [`grad`]: reverse-mode gradients and finite-difference checking.
//! * [`data`]: feature-record files, MOS normalization, splits, synthetic data.
//! * [`train`]: AdamW, cosine schedule, training loop, checkpoints.
//! * [`cli`]: command implementations behind the `agrm` binary.

// `!(x > 0.0)` style guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grm;
pub mod head;
pub mod metrics;
pub mod grad;
pub mod data;
pub mod train;
pub mod cli;

pub use error::{AgrmError, Result};
pub use grm::{
    agrm_probs, boundary_thetas, category_probs, cumulative_prob, expected_score, gamma_threshold,
    is_unimodal, modal_grade, peak_ability, rescale_score, AgrmParams, GeneralGrmParams, ProbVector,
};
pub use head::{
    ability_forward, difficulty_forward, head_forward, init_head, telu, Activation, AggMode, FeaturePair,
    HeadConfig, HeadOutput, HeadParams, Modality,
};
pub use metrics::{mae_loss, plcc_loss, plcc_metric, srcc, total_loss};
pub use data::{FeatureRecord, SynthConfig};
pub use train::{Checkpoint, TrainConfig};
