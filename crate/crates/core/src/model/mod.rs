//! Occupancy probability models.
//!
//! A model maps a [`HybridContext`] to the probability that the candidate
//! cell is occupied. Encoder and decoder drive identical model instances
//! through identical `predict`/`update` sequences, so every prediction must
//! be a deterministic function of the context and the model's own state.

mod adaptive;
mod neural;
mod weights;

use std::fmt;
use std::str::FromStr;

use crate::context::HybridContext;
use crate::{Error, Result};

pub use adaptive::{hash_context, AdaptiveModel, HASH_BUCKET_BITS, HASH_SEED};
pub use neural::{ablation_variant, AblationMode, Architecture, NeuralModel, NeuralNet, BN_EPS};
pub use weights::{
    load_weights, save_weights, DType, ModelWeights, Tensor, PVW_MAGIC, PVW_SCHEMA_VERSION,
};

/// Fixed-point scale of [`Probability`].
pub const PROB_ONE: u32 = 1 << 16;

/// Probability of a 1-symbol in units of 1/65536, kept in `1..=65535`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Probability(u16);

impl Probability {
    pub const HALF: Probability = Probability(32768);
    pub const MIN: Probability = Probability(1);
    pub const MAX: Probability = Probability(65535);

    /// Clamps `q` into the codable range.
    pub fn from_quantized(q: u32) -> Self {
        Probability(q.clamp(1, PROB_ONE - 1) as u16)
    }

    /// Rounds `p1 * 65536` and clamps it into the codable range. NaN maps to 1/2.
    pub fn from_p1(p1: f64) -> Self {
        if p1.is_nan() {
            return Self::HALF;
        }
        let q = (p1 * PROB_ONE as f64)
            .round()
            .clamp(1.0, (PROB_ONE - 1) as f64);
        Probability(q as u16)
    }

    pub fn quantized(self) -> u16 {
        self.0
    }

    pub fn p1(self) -> f64 {
        self.0 as f64 / PROB_ONE as f64
    }

    /// Ideal code length of `bit` in bits.
    pub fn cost_bits(self, bit: bool) -> f64 {
        let p = if bit {
            self.0 as f64
        } else {
            (PROB_ONE - self.0 as u32) as f64
        };
        -(p / PROB_ONE as f64).log2()
    }
}

/// Model identifier stored in the container header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    Uniform = 0,
    Adaptive = 1,
    Neural = 2,
}

impl ModelId {
    pub fn from_u8(v: u8) -> Option<ModelId> {
        match v {
            0 => Some(ModelId::Uniform),
            1 => Some(ModelId::Adaptive),
            2 => Some(ModelId::Neural),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Uniform => "uniform",
            ModelId::Adaptive => "adaptive",
            ModelId::Neural => "neural",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ModelId::Uniform),
            "adaptive" => Ok(ModelId::Adaptive),
            "neural" => Ok(ModelId::Neural),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected uniform, adaptive or neural)"
            ))),
        }
    }
}

pub trait EntropyModel {
    fn id(&self) -> ModelId;

    /// Identity of the parameters, stored in the header and checked on decode.
    fn fingerprint(&self) -> u64;

    /// Number of point neighbors the model reads, or `None` when it ignores
    /// the point context.
    fn point_context_size(&self) -> Option<usize> {
        None
    }

    fn predict(&mut self, ctx: &HybridContext) -> Probability;

    /// Called once per coded symbol, in coding order, with the true symbol.
    fn update(&mut self, ctx: &HybridContext, bit: bool) {
        let _ = (ctx, bit);
    }
}

impl<M: EntropyModel + ?Sized> EntropyModel for &mut M {
    fn id(&self) -> ModelId {
        (**self).id()
    }
    fn fingerprint(&self) -> u64 {
        (**self).fingerprint()
    }
    fn point_context_size(&self) -> Option<usize> {
        (**self).point_context_size()
    }
    fn predict(&mut self, ctx: &HybridContext) -> Probability {
        (**self).predict(ctx)
    }
    fn update(&mut self, ctx: &HybridContext, bit: bool) {
        (**self).update(ctx, bit)
    }
}

impl<M: EntropyModel + ?Sized> EntropyModel for Box<M> {
    fn id(&self) -> ModelId {
        (**self).id()
    }
    fn fingerprint(&self) -> u64 {
        (**self).fingerprint()
    }
    fn point_context_size(&self) -> Option<usize> {
        (**self).point_context_size()
    }
    fn predict(&mut self, ctx: &HybridContext) -> Probability {
        (**self).predict(ctx)
    }
    fn update(&mut self, ctx: &HybridContext, bit: bool) {
        (**self).update(ctx, bit)
    }
}

/// Every symbol at probability 1/2.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformModel;

impl EntropyModel for UniformModel {
    fn id(&self) -> ModelId {
        ModelId::Uniform
    }

    fn fingerprint(&self) -> u64 {
        0
    }

    fn predict(&mut self, _ctx: &HybridContext) -> Probability {
        Probability::HALF
    }
}
