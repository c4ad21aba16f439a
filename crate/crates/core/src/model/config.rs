//! Model configuration and named presets.

use serde::{Deserialize, Serialize};

/// Widths, depths, head counts and role caps for the full architecture.
/// The expert group and integration layer run at `d_expert`; the code
/// encoder, decoder, fusion and output head run at `d_model`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ECodeConfig {
    pub d_expert: usize,
    pub d_model: usize,
    pub expert_layers: usize,
    pub integration_layers: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub head_layers: usize,
    /// Heads for every self-attention layer.
    pub self_heads: usize,
    /// Heads for the encoder-decoder fusion layer (48 by default).
    pub cross_heads: usize,
    /// Max tokens per expert part.
    pub expert_cap: usize,
    /// Max positions entering the integration encoder (the concatenated
    /// expert outputs are truncated here).
    pub integration_cap: usize,
    /// Max tokens for the inefficient-code encoder and the decoder.
    pub decoder_cap: usize,
    pub vocab_size: usize,
}

impl Default for ECodeConfig {
    /// Desk-scale default mirroring the composed model families: 2-layer
    /// experts at width 128, 2-layer code encoder/decoder at width 240
    /// (nearest multiple of the 48 fusion heads), caps 512/2048/768.
    fn default() -> Self {
        Self {
            d_expert: 128,
            d_model: 240,
            expert_layers: 2,
            integration_layers: 2,
            encoder_layers: 2,
            decoder_layers: 2,
            head_layers: 2,
            self_heads: 2,
            cross_heads: 48,
            expert_cap: 512,
            integration_cap: 2048,
            decoder_cap: 768,
            vocab_size: 0,
        }
    }
}

impl ECodeConfig {
    /// Small configuration for fast training runs and the pipeline tests.
    pub fn tiny() -> Self {
        Self {
            d_expert: 16,
            d_model: 48,
            expert_layers: 1,
            integration_layers: 1,
            encoder_layers: 1,
            decoder_layers: 1,
            head_layers: 1,
            self_heads: 2,
            cross_heads: 48,
            expert_cap: 48,
            integration_cap: 192,
            decoder_cap: 96,
            vocab_size: 0,
        }
    }

    /// Minimal configuration for finite-difference verification, where
    /// every parameter is perturbed twice.
    pub fn micro() -> Self {
        Self {
            d_expert: 4,
            d_model: 8,
            expert_layers: 1,
            integration_layers: 1,
            encoder_layers: 1,
            decoder_layers: 1,
            head_layers: 1,
            self_heads: 2,
            cross_heads: 4,
            expert_cap: 8,
            integration_cap: 24,
            decoder_cap: 12,
            vocab_size: 0,
        }
    }

    /// Ablation preset: 8 fusion heads instead of 48.
    pub fn ablation_8head() -> Self {
        Self {
            cross_heads: 8,
            ..Self::default()
        }
    }

    pub fn with_vocab(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    /// Divides the role caps by `factor` (the single desk-scale knob).
    pub fn scaled_caps(mut self, factor: usize) -> Self {
        let f = factor.max(1);
        self.expert_cap = (self.expert_cap / f).max(4);
        self.integration_cap = (self.integration_cap / f).max(4);
        self.decoder_cap = (self.decoder_cap / f).max(4);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("d_expert", self.d_expert),
            ("d_model", self.d_model),
            ("expert_layers", self.expert_layers),
            ("integration_layers", self.integration_layers),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("head_layers", self.head_layers),
            ("self_heads", self.self_heads),
            ("cross_heads", self.cross_heads),
            ("expert_cap", self.expert_cap),
            ("integration_cap", self.integration_cap),
            ("decoder_cap", self.decoder_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.d_model % self.cross_heads != 0 {
            return Err(format!(
                "cross_heads {} must divide d_model {}",
                self.cross_heads, self.d_model
            ));
        }
        if self.d_expert % self.self_heads != 0 || self.d_model % self.self_heads != 0 {
            return Err(format!(
                "self_heads {} must divide d_expert {} and d_model {}",
                self.self_heads, self.d_expert, self.d_model
            ));
        }
        if self.vocab_size < 10 {
            return Err(format!(
                "vocab_size {} too small for the reserved symbols",
                self.vocab_size
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [
            ECodeConfig::default().with_vocab(128),
            ECodeConfig::tiny().with_vocab(128),
            ECodeConfig::micro().with_vocab(16),
            ECodeConfig::ablation_8head().with_vocab(128),
        ] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn width_asymmetry_is_config_legal() {
        let cfg = ECodeConfig::tiny().with_vocab(64);
        assert_ne!(cfg.d_expert, cfg.d_model);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_head_split_is_rejected() {
        let cfg = ECodeConfig {
            cross_heads: 7,
            ..ECodeConfig::tiny().with_vocab(64)
        };
        assert!(cfg.validate().is_err());
    }
}
