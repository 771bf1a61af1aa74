//! Minimal neural-network stack: reverse-mode autodiff tape, transformer
//! layers over a named parameter registry, and an AdamW optimizer.

pub mod adamw;
pub mod layers;
pub mod tape;

pub use adamw::{warmup_linear, AdamW, AdamWConfig};
pub use layers::{
    causal_mask, normal_init, xavier, DecoderLayer, EncoderLayer, FeedForward, Graph, LayerNorm,
    Linear, MultiHeadAttention, ParamId, ParamSet, LN_EPS,
};
pub use tape::{NodeId, Tape};
