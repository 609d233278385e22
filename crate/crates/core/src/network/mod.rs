//! Two-stream encoders, the fused top-down saliency network and the pretext autoencoders.

mod autoencoder;
mod backbone;
mod sod;
mod transfer;

pub use autoencoder::{AutoEncoder, Direction};
pub use backbone::{BackboneConfig, Encoder, Stream, LEVELS};
pub use sod::{is_encoder_param, is_head_param, Census, SodConfig, SodForward, SodModel, ENCODER_PREFIXES};
pub use transfer::{transfer_weights, TransferPolicy, TransferReport};
