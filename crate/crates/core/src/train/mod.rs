//! Training loop, optimizer, and the decoding stack.

pub mod adamw;
pub mod decode;
pub mod trainer;

pub use adamw::AdamW;
pub use decode::{
    argmax, filtered_distribution, generate, sample_k_candidates, sample_token, DecodeError,
    DecodeParams, Generated,
};
pub use trainer::{evaluate_loss, train, EpochStats, TrainConfig, TrainError};
