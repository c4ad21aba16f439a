//! Forward paths: the plain evaluation path used everywhere, and the taped
//! path used for training. Both run the same composition:
//!
//! 1. five expert encoders over the NL parts (bidirectional, width
//!    `d_expert`), each part prefixed with its marker token;
//! 2. integration encoder over the sequence-concatenated expert outputs,
//!    then the strictly affine enlarge map up to `d_model`;
//! 3. causal encoder over the inefficient code;
//! 4. encoder output = NL features then code features along the sequence;
//! 5. causal decoder over the generated prefix, one multi-head
//!    cross-attention fusion over the encoder output, causal head stack,
//!    vocabulary projection, softmax.

use thiserror::Error;

use super::config::ECodeConfig;
use super::params::ECodeParams;
use crate::autograd::{Tape, Var};
use crate::data::vocab::{self, TokenSeq, Vocabulary};
use crate::data::{split_nl, EpcSample};
use crate::nn::{self, AttentionVars, BlockVars};
use crate::scalar::Scalar;
use crate::tensor::{NnError, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{role} sequence of {len} tokens exceeds its cap {cap}")]
    OverCap {
        role: &'static str,
        len: usize,
        cap: usize,
    },
    #[error("{role} sequence is empty")]
    Empty { role: &'static str },
    #[error("token id {id} outside vocabulary of size {vocab}")]
    BadToken { id: u32, vocab: usize },
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One sample, tokenized for the model: five marker-prefixed NL parts, the
/// inefficient code, and the teacher-forced decoder input/target pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTokens {
    pub parts: [Vec<u32>; 5],
    pub ic: Vec<u32>,
    /// BOS followed by the target shifted right.
    pub ec_input: Vec<u32>,
    /// Target code tokens, ending with EOS.
    pub ec_targets: Vec<u32>,
}

/// Tokenizes a sample against the shared vocabulary, applying every role
/// cap. The first efficient code is the teacher target.
pub fn sample_tokens(
    sample: &EpcSample,
    vocabulary: &Vocabulary,
    config: &ECodeConfig,
) -> Result<SampleTokens, ModelError> {
    let parts_text = split_nl(sample);
    let mut parts: [Vec<u32>; 5] = Default::default();
    for (i, text) in parts_text.iter().enumerate() {
        let marker = vocabulary.id(vocab::PART_MARKERS[i]);
        let mut ids = vec![marker];
        ids.extend(
            vocab::split_words(text)
                .iter()
                .take(config.expert_cap - 1)
                .map(|w| vocabulary.id(w)),
        );
        parts[i] = ids;
    }
    let ic = code_ids(&sample.inefficient_code, vocabulary, config.decoder_cap)?;
    let target = code_ids(
        &sample.efficient_codes[0],
        vocabulary,
        config.decoder_cap,
    )?;
    let mut ec_input = vec![vocab::BOS];
    ec_input.extend(&target[..target.len() - 1]);
    Ok(SampleTokens {
        parts,
        ic,
        ec_input,
        ec_targets: target,
    })
}

fn code_ids(
    source: &str,
    vocabulary: &Vocabulary,
    cap: usize,
) -> Result<Vec<u32>, ModelError> {
    let TokenSeq { ids, .. } = vocab::tokenize_code(source, vocabulary, cap)
        .map_err(|e| ModelError::Config(e.to_string()))?;
    Ok(ids)
}

fn check_cap(role: &'static str, len: usize, cap: usize) -> Result<(), ModelError> {
    if len == 0 {
        return Err(ModelError::Empty { role });
    }
    if len > cap {
        return Err(ModelError::OverCap { role, len, cap });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Plain forward
// ---------------------------------------------------------------------------

fn embed<F: Scalar>(
    table: &Tensor<F>,
    pos: &Tensor<F>,
    ids: &[u32],
) -> Result<Tensor<F>, ModelError> {
    let vocab_rows = table.rows();
    let idx: Vec<usize> = ids
        .iter()
        .map(|&id| {
            let i = id as usize;
            if i >= vocab_rows {
                Err(ModelError::BadToken { id, vocab: vocab_rows })
            } else {
                Ok(i)
            }
        })
        .collect::<Result<_, _>>()?;
    let tok = table.gather_rows(&idx)?;
    let pos_rows: Vec<usize> = (0..ids.len()).collect();
    Ok(tok.add(&pos.gather_rows(&pos_rows)?)?)
}

/// Runs the five expert encoders. Experts are independent: part X only ever
/// flows through expert X.
pub fn encode_experts<F: Scalar>(
    params: &ECodeParams<F>,
    parts: &[Vec<u32>; 5],
) -> Result<[Tensor<F>; 5], ModelError> {
    let mut out: Vec<Tensor<F>> = Vec::with_capacity(5);
    for (i, part) in parts.iter().enumerate() {
        check_cap("expert part", part.len(), params.config.expert_cap)?;
        let x = embed(&params.nl_embedding, &params.expert_pos, part)?;
        out.push(params.experts[i].forward(&x, false)?);
    }
    Ok(out.try_into().expect("five experts"))
}

/// Integration encoder over the concatenated expert features, then the
/// affine enlarge map to `d_model`.
pub fn integrate_experts<F: Scalar>(
    params: &ECodeParams<F>,
    experts: &[Tensor<F>; 5],
) -> Result<Tensor<F>, ModelError> {
    let refs: Vec<&Tensor<F>> = experts.iter().collect();
    let mut x = Tensor::concat_rows(&refs)?;
    if x.rows() > params.config.integration_cap {
        x = x.take_rows(params.config.integration_cap)?;
    }
    let pos_rows: Vec<usize> = (0..x.rows()).collect();
    let x = x.add(&params.integration_pos.gather_rows(&pos_rows)?)?;
    let x = params.integration.forward(&x, false)?;
    Ok(nn::linear(&x, &params.enlarge)?)
}

/// Causal encoder over the inefficient-code tokens.
pub fn encode_ic<F: Scalar>(
    params: &ECodeParams<F>,
    ic: &[u32],
) -> Result<Tensor<F>, ModelError> {
    check_cap("inefficient code", ic.len(), params.config.decoder_cap)?;
    let x = embed(&params.code_embedding, &params.ic_pos, ic)?;
    Ok(params.ic_encoder.forward(&x, true)?)
}

/// Sequence-axis concatenation, NL features first.
pub fn encoder_output<F: Scalar>(
    enc_nl: &Tensor<F>,
    enc_ic: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    Tensor::concat_rows(&[enc_nl, enc_ic])
}

/// Full encoder side for one sample.
pub fn encode_sample<F: Scalar>(
    params: &ECodeParams<F>,
    tokens: &SampleTokens,
) -> Result<Tensor<F>, ModelError> {
    let experts = encode_experts(params, &tokens.parts)?;
    let enc_nl = integrate_experts(params, &experts)?;
    let enc_ic = encode_ic(params, &tokens.ic)?;
    Ok(encoder_output(&enc_nl, &enc_ic)?)
}

/// Decoder-side forward over a full prefix, returning the row distribution
/// at every position (teacher forcing uses all rows; stepwise prediction
/// uses the last).
pub fn decode_probs<F: Scalar>(
    params: &ECodeParams<F>,
    prefix: &[u32],
    enc: &Tensor<F>,
) -> Result<Tensor<F>, ModelError> {
    let prefix = if prefix.is_empty() {
        vec![vocab::BOS]
    } else {
        prefix.to_vec()
    };
    check_cap("decoder prefix", prefix.len(), params.config.decoder_cap)?;
    let x = embed(&params.code_embedding, &params.dec_pos, &prefix)?;
    let dec = params.decoder.forward(&x, true)?;
    let (fused, _) = nn::multi_head_attention_with_weights(&dec, enc, &params.fusion, false)?;
    let h = params.head.forward(&fused, true)?;
    let logits = nn::linear(&h, &params.vocab_proj)?;
    Ok(logits.softmax_rows(false)?)
}

/// Distribution over the vocabulary for the next token after `prefix`
/// (empty prefix means BOS only).
pub fn next_token_probs<F: Scalar>(
    params: &ECodeParams<F>,
    prefix: &[u32],
    enc: &Tensor<F>,
) -> Result<Vec<F>, ModelError> {
    let mut with_bos = vec![vocab::BOS];
    with_bos.extend(prefix);
    let probs = decode_probs(params, &with_bos, enc)?;
    Ok(probs.row(probs.rows() - 1).to_vec())
}

/// Teacher-forced log-likelihood of `ec_targets`: the sum over positions of
/// `ln p(t_i | NL, IC, t_1..t_{i-1})`.
pub fn sequence_log_prob<F: Scalar>(
    params: &ECodeParams<F>,
    tokens: &SampleTokens,
) -> Result<F, ModelError> {
    if tokens.ec_targets.last() != Some(&vocab::EOS) {
        return Err(ModelError::Config(
            "target sequence must end with EOS".into(),
        ));
    }
    for &t in &tokens.ec_targets {
        if t as usize >= params.config.vocab_size {
            return Err(ModelError::BadToken {
                id: t,
                vocab: params.config.vocab_size,
            });
        }
    }
    let enc = encode_sample(params, tokens)?;
    let probs = decode_probs(params, &tokens.ec_input, &enc)?;
    let mut total = F::zero();
    for (row, &target) in tokens.ec_targets.iter().enumerate() {
        total += probs.at(row, target as usize).ln();
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Taped forward (training)
// ---------------------------------------------------------------------------

/// Tape variables mirroring [`ECodeParams`], bound in registry order.
pub struct BoundParams {
    vars: Vec<Var>,
    config: ECodeConfig,
}

struct Cursor<'a> {
    vars: &'a [Var],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Var {
        let v = self.vars[self.at];
        self.at += 1;
        v
    }

    fn block(&mut self, heads: usize) -> BlockVars {
        BlockVars {
            ln1_gain: self.next(),
            ln1_shift: self.next(),
            attn: AttentionVars {
                w_q: self.next(),
                w_k: self.next(),
                w_v: self.next(),
                w_h: self.next(),
                heads,
            },
            ln2_gain: self.next(),
            ln2_shift: self.next(),
            ffn_in_w: self.next(),
            ffn_in_b: self.next(),
            ffn_out_w: self.next(),
            ffn_out_b: self.next(),
        }
    }

    fn stack(&mut self, layers: usize, heads: usize) -> StackVars {
        StackVars {
            blocks: (0..layers).map(|_| self.block(heads)).collect(),
            final_gain: self.next(),
            final_shift: self.next(),
        }
    }
}

struct StackVars {
    blocks: Vec<BlockVars>,
    final_gain: Var,
    final_shift: Var,
}

impl StackVars {
    fn forward<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        mut x: Var,
        causal: bool,
    ) -> Result<Var, NnError> {
        for b in &self.blocks {
            x = nn::block_t(tape, x, b, causal)?;
        }
        tape.layer_norm(x, self.final_gain, self.final_shift)
    }
}

struct BoundView {
    nl_embedding: Var,
    expert_pos: Var,
    experts: Vec<StackVars>,
    integration_pos: Var,
    integration: StackVars,
    enlarge_w: Var,
    enlarge_b: Var,
    code_embedding: Var,
    ic_pos: Var,
    ic_encoder: StackVars,
    dec_pos: Var,
    decoder: StackVars,
    fusion: AttentionVars,
    head: StackVars,
    proj_w: Var,
    proj_b: Var,
}

impl BoundParams {
    /// Binds `vars` (one per registry entry, in registry order).
    pub fn new(config: &ECodeConfig, vars: Vec<Var>) -> Self {
        Self {
            vars,
            config: config.clone(),
        }
    }

    /// The bound variables, in registry order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn view(&self) -> BoundView {
        let c = &self.config;
        let mut cur = Cursor { vars: &self.vars, at: 0 };
        let view = BoundView {
            nl_embedding: cur.next(),
            expert_pos: cur.next(),
            experts: (0..5).map(|_| cur.stack(c.expert_layers, c.self_heads)).collect(),
            integration_pos: cur.next(),
            integration: cur.stack(c.integration_layers, c.self_heads),
            enlarge_w: cur.next(),
            enlarge_b: cur.next(),
            code_embedding: cur.next(),
            ic_pos: cur.next(),
            ic_encoder: cur.stack(c.encoder_layers, c.self_heads),
            dec_pos: cur.next(),
            decoder: cur.stack(c.decoder_layers, c.self_heads),
            fusion: AttentionVars {
                w_q: cur.next(),
                w_k: cur.next(),
                w_v: cur.next(),
                w_h: cur.next(),
                heads: c.cross_heads,
            },
            head: cur.stack(c.head_layers, c.self_heads),
            proj_w: cur.next(),
            proj_b: cur.next(),
        };
        debug_assert_eq!(cur.at, self.vars.len(), "registry order drift");
        view
    }
}

fn embed_t<F: Scalar>(
    tape: &mut Tape<F>,
    table: Var,
    pos: Var,
    ids: &[u32],
) -> Result<Var, NnError> {
    let idx: Vec<usize> = ids.iter().map(|&id| id as usize).collect();
    let tok = tape.gather_rows(table, &idx)?;
    let pos_rows: Vec<usize> = (0..ids.len()).collect();
    let p = tape.gather_rows(pos, &pos_rows)?;
    tape.add(tok, p)
}

/// Loss graph for one sample: mean token cross-entropy of the teacher-forced
/// prediction. Also returns the probability node for accuracy accounting.
pub fn loss_t<F: Scalar>(
    tape: &mut Tape<F>,
    bound: &BoundParams,
    tokens: &SampleTokens,
) -> Result<(Var, Var), ModelError> {
    let c = &bound.config;
    let v = bound.view();
    // Expert group.
    let mut expert_outs = Vec::with_capacity(5);
    for (i, part) in tokens.parts.iter().enumerate() {
        check_cap("expert part", part.len(), c.expert_cap)?;
        let x = embed_t(tape, v.nl_embedding, v.expert_pos, part)?;
        expert_outs.push(v.experts[i].forward(tape, x, false)?);
    }
    // Integration + enlarge.
    let mut cat = tape.concat_rows(&expert_outs)?;
    if tape.value(cat).rows() > c.integration_cap {
        let keep: Vec<usize> = (0..c.integration_cap).collect();
        cat = tape.gather_rows(cat, &keep)?;
    }
    let rows: Vec<usize> = (0..tape.value(cat).rows()).collect();
    let pos = tape.gather_rows(v.integration_pos, &rows)?;
    let x = tape.add(cat, pos)?;
    let x = v.integration.forward(tape, x, false)?;
    let enc_nl = nn::linear_t(tape, x, v.enlarge_w, v.enlarge_b)?;
    // Inefficient-code encoder.
    check_cap("inefficient code", tokens.ic.len(), c.decoder_cap)?;
    let ic = embed_t(tape, v.code_embedding, v.ic_pos, &tokens.ic)?;
    let enc_ic = v.ic_encoder.forward(tape, ic, true)?;
    let enc = tape.concat_rows(&[enc_nl, enc_ic])?;
    // Decoder, fusion, head, vocabulary.
    check_cap("decoder prefix", tokens.ec_input.len(), c.decoder_cap)?;
    let dec_in = embed_t(tape, v.code_embedding, v.dec_pos, &tokens.ec_input)?;
    let dec = v.decoder.forward(tape, dec_in, true)?;
    let fused = nn::multi_head_attention_t(tape, dec, enc, &v.fusion, false)?;
    let h = v.head.forward(tape, fused, true)?;
    let logits = nn::linear_t(tape, h, v.proj_w, v.proj_b)?;
    let probs = tape.softmax_rows(logits, false)?;
    let targets: Vec<usize> = tokens.ec_targets.iter().map(|&t| t as usize).collect();
    let loss = tape.cross_entropy(probs, &targets)?;
    Ok((loss, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocabulary, generate_corpus, DifficultyMix};
    use crate::seeding::rng_from;

    fn fixture() -> (ECodeParams<f64>, Vec<SampleTokens>) {
        let corpus = generate_corpus(4, 9, DifficultyMix::default(), 0.0).unwrap();
        let vocab = build_vocabulary(&corpus);
        let config = ECodeConfig::tiny().with_vocab(vocab.len());
        let params = ECodeParams::init(&config, &mut rng_from(5)).unwrap();
        let tokens = corpus
            .iter()
            .map(|s| sample_tokens(s, &vocab, &config).unwrap())
            .collect();
        (params, tokens)
    }

    #[test]
    fn experts_are_independent() {
        let (params, tokens) = fixture();
        let base = encode_experts(&params, &tokens[0].parts).unwrap();
        // Perturb only the description part (index 1).
        let mut perturbed = tokens[0].parts.clone();
        perturbed[1] = tokens[1].parts[1].clone();
        let alt = encode_experts(&params, &perturbed).unwrap();
        for i in [0usize, 2, 3, 4] {
            assert_eq!(base[i].data(), alt[i].data(), "expert {i} changed");
        }
        assert_ne!(base[1].data(), alt[1].data());
    }

    #[test]
    fn empty_part_is_the_lone_marker() {
        let (params, tokens) = fixture();
        let mut parts = tokens[0].parts.clone();
        parts[0] = vec![crate::data::vocab::PART_MARKERS
            .iter()
            .position(|_| true)
            .map(|_| 5u32)
            .unwrap()];
        let a = encode_experts(&params, &parts).unwrap();
        let b = encode_experts(&params, &parts).unwrap();
        assert_eq!(a[0].data(), b[0].data());
        assert_eq!(a[0].rows(), 1);
    }

    #[test]
    fn enlarge_projects_to_model_width() {
        let (params, tokens) = fixture();
        let experts = encode_experts(&params, &tokens[0].parts).unwrap();
        let enc_nl = integrate_experts(&params, &experts).unwrap();
        assert_eq!(enc_nl.cols(), params.config.d_model);
    }

    #[test]
    fn encoder_concat_is_row_exact() {
        let (params, tokens) = fixture();
        let enc_nl = integrate_experts(
            &params,
            &encode_experts(&params, &tokens[0].parts).unwrap(),
        )
        .unwrap();
        let enc_ic = encode_ic(&params, &tokens[0].ic).unwrap();
        let enc = encoder_output(&enc_nl, &enc_ic).unwrap();
        assert_eq!(enc.rows(), enc_nl.rows() + enc_ic.rows());
        assert_eq!(enc.row(0), enc_nl.row(0));
        assert_eq!(enc.row(enc_nl.rows()), enc_ic.row(0));
    }

    #[test]
    fn ic_encoding_is_causal() {
        let (params, tokens) = fixture();
        let mut ic = tokens[0].ic.clone();
        let full = encode_ic(&params, &ic).unwrap();
        let cut = 3.min(ic.len() - 1);
        // Edit tokens after position `cut`; earlier features must not move.
        for t in ic.iter_mut().skip(cut + 1) {
            *t = crate::data::vocab::UNK;
        }
        let edited = encode_ic(&params, &ic).unwrap();
        for r in 0..=cut {
            assert_eq!(full.row(r), edited.row(r), "row {r} not causal");
        }
    }

    #[test]
    fn next_token_distribution_sums_to_one() {
        let (params, tokens) = fixture();
        let enc = encode_sample(&params, &tokens[0]).unwrap();
        let probs = next_token_probs(&params, &tokens[0].ec_targets[..3].to_vec(), &enc).unwrap();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cross_attention_weights_are_row_stochastic_across_all_heads() {
        let (params, tokens) = fixture();
        let enc = encode_sample(&params, &tokens[0]).unwrap();
        let x = embed(&params.code_embedding, &params.dec_pos, &tokens[0].ec_input).unwrap();
        let dec = params.decoder.forward(&x, true).unwrap();
        let (_, weights) =
            nn::multi_head_attention_with_weights(&dec, &enc, &params.fusion, false).unwrap();
        assert_eq!(weights.len(), params.config.cross_heads);
        for w in &weights {
            for r in 0..w.rows() {
                let sum: f64 = w.row(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn taped_and_plain_forward_agree() {
        let (params, tokens) = fixture();
        // Plain: teacher-forced probabilities.
        let enc = encode_sample(&params, &tokens[0]).unwrap();
        let plain = decode_probs(&params, &tokens[0].ec_input, &enc).unwrap();
        // Taped.
        let mut tape = Tape::new();
        let vars: Vec<Var> = params
            .named_tensors()
            .into_iter()
            .map(|(_, t)| tape.leaf(t.clone()))
            .collect();
        let bound = BoundParams::new(&params.config, vars);
        let (_, probs) = loss_t(&mut tape, &bound, &tokens[0]).unwrap();
        assert_eq!(tape.value(probs).data(), plain.data());
    }

    #[test]
    fn sequence_log_prob_matches_stepwise_sum() {
        let (params, tokens) = fixture();
        for t in &tokens {
            let batch = sequence_log_prob(&params, t).unwrap();
            let enc = encode_sample(&params, t).unwrap();
            let mut stepwise = 0.0;
            let mut prefix: Vec<u32> = Vec::new();
            for &target in &t.ec_targets {
                let probs = next_token_probs(&params, &prefix, &enc).unwrap();
                stepwise += probs[target as usize].ln();
                prefix.push(target);
            }
            assert!(
                (batch - stepwise).abs() < 1e-6,
                "batch {batch} vs stepwise {stepwise}"
            );
            assert!(batch.exp() <= 1.0 + 1e-12);
        }
    }
}
