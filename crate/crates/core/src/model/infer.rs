//! Incremental decoding session. Caches per-block keys/values so one new
//! token costs O(prefix) instead of re-running the whole prefix; the
//! encoder-side fusion keys/values are computed once. Step outputs are
//! verified against the full forward path in tests.

use super::forward::ModelError;
use super::params::ECodeParams;
use crate::data::vocab;
use crate::scalar::Scalar;
use crate::tensor::{Tensor, LAYER_NORM_EPS};

pub struct GenSession<'p, F: Scalar> {
    params: &'p ECodeParams<F>,
    fusion_k: Tensor<F>,
    fusion_v: Tensor<F>,
    dec_caches: Vec<KvCache<F>>,
    head_caches: Vec<KvCache<F>>,
    pos: usize,
}

struct KvCache<F> {
    k: Vec<F>,
    v: Vec<F>,
    rows: usize,
    width: usize,
}

impl<F: Scalar> KvCache<F> {
    fn new(width: usize) -> Self {
        Self {
            k: Vec::new(),
            v: Vec::new(),
            rows: 0,
            width,
        }
    }

    fn push(&mut self, k_row: &[F], v_row: &[F]) {
        debug_assert_eq!(k_row.len(), self.width);
        self.k.extend_from_slice(k_row);
        self.v.extend_from_slice(v_row);
        self.rows += 1;
    }
}

impl<'p, F: Scalar> GenSession<'p, F> {
    /// Starts a session against a fixed encoder output. The first call to
    /// [`GenSession::step`] should pass BOS.
    pub fn new(params: &'p ECodeParams<F>, enc: &Tensor<F>) -> Result<Self, ModelError> {
        let fusion_k = enc.matmul(&params.fusion.w_k)?;
        let fusion_v = enc.matmul(&params.fusion.w_v)?;
        let d = params.config.d_model;
        Ok(Self {
            params,
            fusion_k,
            fusion_v,
            dec_caches: (0..params.decoder.blocks.len())
                .map(|_| KvCache::new(d))
                .collect(),
            head_caches: (0..params.head.blocks.len())
                .map(|_| KvCache::new(d))
                .collect(),
            pos: 0,
        })
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Feeds one token and returns the next-token distribution.
    pub fn step(&mut self, token: u32) -> Result<Vec<F>, ModelError> {
        let p = self.params;
        let c = &p.config;
        if self.pos >= c.decoder_cap {
            return Err(ModelError::OverCap {
                role: "decoder prefix",
                len: self.pos + 1,
                cap: c.decoder_cap,
            });
        }
        let t = token as usize;
        if t >= c.vocab_size {
            return Err(ModelError::BadToken {
                id: token,
                vocab: c.vocab_size,
            });
        }
        let mut x: Vec<F> = p
            .code_embedding
            .row(t)
            .iter()
            .zip(p.dec_pos.row(self.pos))
            .map(|(&e, &q)| e + q)
            .collect();
        for (block, cache) in p.decoder.blocks.iter().zip(&mut self.dec_caches) {
            x = incr_block(block, cache, &x, c.self_heads)?;
        }
        ln_row_inplace(&mut x, &p.decoder.final_gain, &p.decoder.final_shift);

        // One cross-attention fusion over the encoder output.
        let q = row_matmul(&x, &p.fusion.w_q)?;
        let ctx = attend(
            &q,
            &self.fusion_k.data(),
            &self.fusion_v.data(),
            self.fusion_k.rows(),
            c.d_model,
            c.cross_heads,
        );
        let mut fused = row_matmul(&ctx, &p.fusion.w_h)?;

        for (block, cache) in p.head.blocks.iter().zip(&mut self.head_caches) {
            fused = incr_block(block, cache, &fused, c.self_heads)?;
        }
        ln_row_inplace(&mut fused, &p.head.final_gain, &p.head.final_shift);

        let mut logits = row_matmul(&fused, &p.vocab_proj.weight)?;
        for (l, &b) in logits.iter_mut().zip(p.vocab_proj.bias.data()) {
            *l += b;
        }
        self.pos += 1;
        Ok(softmax_row(&logits))
    }
}

fn incr_block<F: Scalar>(
    block: &crate::nn::BlockParams<F>,
    cache: &mut KvCache<F>,
    x: &[F],
    heads: usize,
) -> Result<Vec<F>, ModelError> {
    let d = x.len();
    let mut h = x.to_vec();
    ln_row_inplace(&mut h, &block.ln1_gain, &block.ln1_shift);
    let q = row_matmul(&h, &block.attn.w_q)?;
    let k = row_matmul(&h, &block.attn.w_k)?;
    let v = row_matmul(&h, &block.attn.w_v)?;
    cache.push(&k, &v);
    let ctx = attend(&q, &cache.k, &cache.v, cache.rows, d, heads);
    let attn_out = row_matmul(&ctx, &block.attn.w_h)?;
    let mut x1: Vec<F> = x.iter().zip(&attn_out).map(|(&a, &b)| a + b).collect();
    let mut h2 = x1.clone();
    ln_row_inplace(&mut h2, &block.ln2_gain, &block.ln2_shift);
    let mut f = row_matmul(&h2, &block.ffn_in.weight)?;
    for (fv, &b) in f.iter_mut().zip(block.ffn_in.bias.data()) {
        *fv = crate::tensor::gelu_scalar(*fv + b);
    }
    let out = row_matmul(&f, &block.ffn_out.weight)?;
    for ((xv, &o), &b) in x1.iter_mut().zip(&out).zip(block.ffn_out.bias.data()) {
        *xv += o + b;
    }
    Ok(x1)
}

/// Multi-head scaled dot-product attention of one query row against cached
/// keys/values, matching the batched kernel's per-row arithmetic.
fn attend<F: Scalar>(q: &[F], k: &[F], v: &[F], rows: usize, d: usize, heads: usize) -> Vec<F> {
    let dk = d / heads;
    let scale = F::from_f64(1.0 / (dk as f64).sqrt());
    let mut ctx = vec![F::zero(); d];
    let mut scores = vec![F::zero(); rows];
    for h in 0..heads {
        let base = h * dk;
        for (r, s) in scores.iter_mut().enumerate() {
            let mut acc = F::zero();
            for c in 0..dk {
                acc += q[base + c] * k[r * d + base + c];
            }
            *s = acc * scale;
        }
        softmax_inplace(&mut scores);
        for (r, &s) in scores.iter().enumerate() {
            for c in 0..dk {
                ctx[base + c] += s * v[r * d + base + c];
            }
        }
    }
    ctx
}

fn softmax_inplace<F: Scalar>(xs: &mut [F]) {
    let mut mx = xs[0];
    for &x in xs.iter().skip(1) {
        if x > mx {
            mx = x;
        }
    }
    let mut z = F::zero();
    for x in xs.iter_mut() {
        *x = (*x - mx).exp();
        z += *x;
    }
    for x in xs.iter_mut() {
        *x /= z;
    }
}

fn softmax_row<F: Scalar>(xs: &[F]) -> Vec<F> {
    let mut out = xs.to_vec();
    softmax_inplace(&mut out);
    out
}

fn row_matmul<F: Scalar>(x: &[F], w: &Tensor<F>) -> Result<Vec<F>, ModelError> {
    let (k, n) = (w.rows(), w.cols());
    if x.len() != k {
        return Err(ModelError::Config(format!(
            "row width {} does not match weight {:?}",
            x.len(),
            w.shape()
        )));
    }
    let mut out = vec![F::zero(); n];
    for (p, &xv) in x.iter().enumerate() {
        let wrow = &w.data()[p * n..(p + 1) * n];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
    Ok(out)
}

fn ln_row_inplace<F: Scalar>(x: &mut [F], gain: &Tensor<F>, shift: &Tensor<F>) {
    let cf = F::from_f64(x.len() as f64);
    let eps = F::from_f64(LAYER_NORM_EPS);
    let mean = x.iter().copied().sum::<F>() / cf;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / cf;
    let inv = (var + eps).sqrt().recip();
    for (i, v) in x.iter_mut().enumerate() {
        *v = (*v - mean) * inv * gain.data()[i] + shift.data()[i];
    }
}

/// Cached stepwise distributions for a whole prefix (BOS implied),
/// convenience for scoring paths that want the session semantics.
pub fn session_probs<F: Scalar>(
    params: &ECodeParams<F>,
    enc: &Tensor<F>,
    prefix: &[u32],
) -> Result<Vec<F>, ModelError> {
    let mut session = GenSession::new(params, enc)?;
    let mut probs = session.step(vocab::BOS)?;
    for &t in prefix {
        probs = session.step(t)?;
    }
    Ok(probs)
}
