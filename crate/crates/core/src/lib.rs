//! Desk-scale laboratory for efficient-code generation: an expert-encoder-group
//! transformer mapping (problem description parts + inefficient program) to an
//! efficient program, plus the measurement machinery around it — a
//! deterministic mini-language with an exact cost model, a runtime predictor
//! that works on broken code, efficiency-gain scoring, efficiency-first
//! candidate filtering, and running-time distribution statistics.

pub mod autograd;
pub mod data;
pub mod minilang;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod seeding;
pub mod train;
pub mod tensor;

/// Scalar type used by the shipping pipeline.
pub type S = f64;
/// Tensor over the pipeline scalar.
pub type Tensor64 = tensor::Tensor<S>;
/// Tape over the pipeline scalar.
pub type Tape64 = autograd::Tape<S>;
