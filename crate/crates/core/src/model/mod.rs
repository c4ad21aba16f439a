//! The expert-encoder-group transformer: configuration, parameters, forward
//! paths, incremental decoding, and checkpointing.

pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod infer;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, TrainState, CKPT_FORMAT};
pub use config::ECodeConfig;
pub use forward::{
    decode_probs, encode_experts, encode_ic, encode_sample, encoder_output, integrate_experts,
    loss_t, next_token_probs, sample_tokens, sequence_log_prob, BoundParams, ModelError,
    SampleTokens,
};
pub use infer::{session_probs, GenSession};
pub use params::{ECodeParams, StackParams};
