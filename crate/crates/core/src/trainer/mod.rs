//! Training procedures: the two pretext stages, downstream saliency training,
//! learning-rate schedules, checkpoints and the ablation matrix.

mod ablation;
mod checkpoint;
mod config;
mod schedule;
mod stages;

pub use ablation::{AblationConfig, FusionFallback, InitSource};
pub use checkpoint::{Checkpoint, CheckpointMeta, StageTag, FORMAT_VERSION, MAGIC};
pub use config::TrainConfig;
pub use schedule::{poly_lr, warmup_linear_lr, Schedule, ScheduleKind, POLY_POWER, WARMUP_FRACTION};
pub use stages::{
    autoencoder_from_checkpoint, contour_loss_on, derive_seed, initialise_downstream, mean_mae, predict, prepare,
    recon_loss_on, run_downstream, run_stage1, run_stage2, schedule_curve, sod_model_from_checkpoint, Float,
    LossSeries, PretextWeights, Record, Stage1Output, StageOutput, TrainReport,
};
