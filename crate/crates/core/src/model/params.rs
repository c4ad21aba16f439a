//! The complete parameter set and its flat, ordered registry.
//!
//! `named_tensors`/`named_tensors_mut` walk every tensor in one fixed
//! order; the optimizer, the checkpoint format, and the tape binding all
//! rely on that order being identical.

use rand::Rng;

use super::config::ECodeConfig;
use crate::nn::{init_normal, ones, AttentionParams, BlockParams, LinearParams, INIT_STD};
use crate::scalar::Scalar;
use crate::tensor::{NnError, Tensor};

/// A pre-norm block stack with a final layer norm.
#[derive(Debug, Clone)]
pub struct StackParams<F> {
    pub blocks: Vec<BlockParams<F>>,
    pub final_gain: Tensor<F>,
    pub final_shift: Tensor<F>,
}

impl<F: Scalar> StackParams<F> {
    pub fn init<R: Rng>(dim: usize, layers: usize, heads: usize, rng: &mut R) -> Self {
        Self {
            blocks: (0..layers).map(|_| BlockParams::init(dim, heads, rng)).collect(),
            final_gain: ones(dim),
            final_shift: Tensor::zeros(vec![dim]),
        }
    }

    pub fn forward(&self, x: &Tensor<F>, causal: bool) -> Result<Tensor<F>, NnError> {
        let mut x = x.clone();
        for block in &self.blocks {
            x = block.forward(&x, causal)?;
        }
        x.layer_norm_rows(&self.final_gain, &self.final_shift)
    }
}

/// Every learned tensor of the model: five expert stacks, the integration
/// stack and its width-adapting affine map, the causal code encoder, the
/// causal decoder, one cross-attention fusion layer, and the output head
/// stack with its vocabulary projection. Token embeddings are shared per
/// width family (one table for the NL side, one for the code side);
/// positional tables are per role.
#[derive(Debug, Clone)]
pub struct ECodeParams<F> {
    pub config: ECodeConfig,
    pub nl_embedding: Tensor<F>,
    pub expert_pos: Tensor<F>,
    pub experts: Vec<StackParams<F>>,
    pub integration_pos: Tensor<F>,
    pub integration: StackParams<F>,
    pub enlarge: LinearParams<F>,
    pub code_embedding: Tensor<F>,
    pub ic_pos: Tensor<F>,
    pub ic_encoder: StackParams<F>,
    pub dec_pos: Tensor<F>,
    pub decoder: StackParams<F>,
    pub fusion: AttentionParams<F>,
    pub head: StackParams<F>,
    pub vocab_proj: LinearParams<F>,
}

impl<F: Scalar> ECodeParams<F> {
    pub fn init<R: Rng>(config: &ECodeConfig, rng: &mut R) -> Result<Self, String> {
        config.validate()?;
        let c = config;
        Ok(Self {
            config: c.clone(),
            nl_embedding: init_normal(vec![c.vocab_size, c.d_expert], INIT_STD, rng),
            expert_pos: init_normal(vec![c.expert_cap, c.d_expert], INIT_STD, rng),
            experts: (0..5)
                .map(|_| StackParams::init(c.d_expert, c.expert_layers, c.self_heads, rng))
                .collect(),
            integration_pos: init_normal(vec![c.integration_cap, c.d_expert], INIT_STD, rng),
            integration: StackParams::init(c.d_expert, c.integration_layers, c.self_heads, rng),
            enlarge: LinearParams::init(c.d_expert, c.d_model, rng),
            code_embedding: init_normal(vec![c.vocab_size, c.d_model], INIT_STD, rng),
            ic_pos: init_normal(vec![c.decoder_cap, c.d_model], INIT_STD, rng),
            ic_encoder: StackParams::init(c.d_model, c.encoder_layers, c.self_heads, rng),
            dec_pos: init_normal(vec![c.decoder_cap, c.d_model], INIT_STD, rng),
            decoder: StackParams::init(c.d_model, c.decoder_layers, c.self_heads, rng),
            fusion: AttentionParams::init(c.d_model, c.cross_heads, rng),
            head: StackParams::init(c.d_model, c.head_layers, c.self_heads, rng),
            vocab_proj: LinearParams::init(c.d_model, c.vocab_size, rng),
        })
    }

    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out: Vec<(String, &Tensor<F>)> = Vec::new();
        out.push(("nl_embedding".into(), &self.nl_embedding));
        out.push(("expert_pos".into(), &self.expert_pos));
        for (i, stack) in self.experts.iter().enumerate() {
            stack_tensors(&format!("expert{i}"), stack, &mut out);
        }
        out.push(("integration_pos".into(), &self.integration_pos));
        stack_tensors("integration", &self.integration, &mut out);
        out.push(("enlarge.weight".into(), &self.enlarge.weight));
        out.push(("enlarge.bias".into(), &self.enlarge.bias));
        out.push(("code_embedding".into(), &self.code_embedding));
        out.push(("ic_pos".into(), &self.ic_pos));
        stack_tensors("ic", &self.ic_encoder, &mut out);
        out.push(("dec_pos".into(), &self.dec_pos));
        stack_tensors("dec", &self.decoder, &mut out);
        out.push(("fusion.w_q".into(), &self.fusion.w_q));
        out.push(("fusion.w_k".into(), &self.fusion.w_k));
        out.push(("fusion.w_v".into(), &self.fusion.w_v));
        out.push(("fusion.w_h".into(), &self.fusion.w_h));
        stack_tensors("head", &self.head, &mut out);
        out.push(("vocab_proj.weight".into(), &self.vocab_proj.weight));
        out.push(("vocab_proj.bias".into(), &self.vocab_proj.bias));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut out: Vec<(String, &mut Tensor<F>)> = Vec::new();
        out.push(("nl_embedding".into(), &mut self.nl_embedding));
        out.push(("expert_pos".into(), &mut self.expert_pos));
        for (i, stack) in self.experts.iter_mut().enumerate() {
            stack_tensors_mut(&format!("expert{i}"), stack, &mut out);
        }
        out.push(("integration_pos".into(), &mut self.integration_pos));
        stack_tensors_mut("integration", &mut self.integration, &mut out);
        out.push(("enlarge.weight".into(), &mut self.enlarge.weight));
        out.push(("enlarge.bias".into(), &mut self.enlarge.bias));
        out.push(("code_embedding".into(), &mut self.code_embedding));
        out.push(("ic_pos".into(), &mut self.ic_pos));
        stack_tensors_mut("ic", &mut self.ic_encoder, &mut out);
        out.push(("dec_pos".into(), &mut self.dec_pos));
        stack_tensors_mut("dec", &mut self.decoder, &mut out);
        out.push(("fusion.w_q".into(), &mut self.fusion.w_q));
        out.push(("fusion.w_k".into(), &mut self.fusion.w_k));
        out.push(("fusion.w_v".into(), &mut self.fusion.w_v));
        out.push(("fusion.w_h".into(), &mut self.fusion.w_h));
        stack_tensors_mut("head", &mut self.head, &mut out);
        out.push(("vocab_proj.weight".into(), &mut self.vocab_proj.weight));
        out.push(("vocab_proj.bias".into(), &mut self.vocab_proj.bias));
        out
    }
}

fn stack_tensors<'a, F: Scalar>(
    prefix: &str,
    stack: &'a StackParams<F>,
    out: &mut Vec<(String, &'a Tensor<F>)>,
) {
    for (j, b) in stack.blocks.iter().enumerate() {
        let p = format!("{prefix}.block{j}");
        out.push((format!("{p}.ln1_gain"), &b.ln1_gain));
        out.push((format!("{p}.ln1_shift"), &b.ln1_shift));
        out.push((format!("{p}.attn.w_q"), &b.attn.w_q));
        out.push((format!("{p}.attn.w_k"), &b.attn.w_k));
        out.push((format!("{p}.attn.w_v"), &b.attn.w_v));
        out.push((format!("{p}.attn.w_h"), &b.attn.w_h));
        out.push((format!("{p}.ln2_gain"), &b.ln2_gain));
        out.push((format!("{p}.ln2_shift"), &b.ln2_shift));
        out.push((format!("{p}.ffn_in.weight"), &b.ffn_in.weight));
        out.push((format!("{p}.ffn_in.bias"), &b.ffn_in.bias));
        out.push((format!("{p}.ffn_out.weight"), &b.ffn_out.weight));
        out.push((format!("{p}.ffn_out.bias"), &b.ffn_out.bias));
    }
    out.push((format!("{prefix}.final_gain"), &stack.final_gain));
    out.push((format!("{prefix}.final_shift"), &stack.final_shift));
}

fn stack_tensors_mut<'a, F: Scalar>(
    prefix: &str,
    stack: &'a mut StackParams<F>,
    out: &mut Vec<(String, &'a mut Tensor<F>)>,
) {
    for (j, b) in stack.blocks.iter_mut().enumerate() {
        let p = format!("{prefix}.block{j}");
        out.push((format!("{p}.ln1_gain"), &mut b.ln1_gain));
        out.push((format!("{p}.ln1_shift"), &mut b.ln1_shift));
        out.push((format!("{p}.attn.w_q"), &mut b.attn.w_q));
        out.push((format!("{p}.attn.w_k"), &mut b.attn.w_k));
        out.push((format!("{p}.attn.w_v"), &mut b.attn.w_v));
        out.push((format!("{p}.attn.w_h"), &mut b.attn.w_h));
        out.push((format!("{p}.ln2_gain"), &mut b.ln2_gain));
        out.push((format!("{p}.ln2_shift"), &mut b.ln2_shift));
        out.push((format!("{p}.ffn_in.weight"), &mut b.ffn_in.weight));
        out.push((format!("{p}.ffn_in.bias"), &mut b.ffn_in.bias));
        out.push((format!("{p}.ffn_out.weight"), &mut b.ffn_out.weight));
        out.push((format!("{p}.ffn_out.bias"), &mut b.ffn_out.bias));
    }
    out.push((format!("{prefix}.final_gain"), &mut stack.final_gain));
    out.push((format!("{prefix}.final_shift"), &mut stack.final_shift));
}
