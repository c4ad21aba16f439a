//! Neural building blocks: affine maps, softmax, multi-head attention,
//! layer norm, cross-entropy, pre-norm transformer blocks, and the
//! finite-difference gradient checker that keeps them honest.
//!
//! Every op exists twice with one shared forward kernel: a plain function on
//! tensors for inference, and a tape builder for training.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autograd::{cross_entropy_value, Tape, Var};
use crate::scalar::Scalar;
use crate::tensor::{NnError, Tensor};

/// Default weight initialization scale (zero-mean normal).
pub const INIT_STD: f64 = 0.02;

/// Affine map `x·W + b` with no activation; the dimension-adapting MLP is
/// exactly this (the ReLU is deliberately absent).
#[derive(Debug, Clone)]
pub struct LinearParams<F> {
    pub weight: Tensor<F>, // [in × out]
    pub bias: Tensor<F>,   // [out]
}

impl<F: Scalar> LinearParams<F> {
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: init_normal(vec![in_dim, out_dim], INIT_STD, rng),
            bias: Tensor::zeros(vec![out_dim]),
        }
    }
}

/// Projections for multi-head attention. `heads` must divide the width.
#[derive(Debug, Clone)]
pub struct AttentionParams<F> {
    pub w_q: Tensor<F>,
    pub w_k: Tensor<F>,
    pub w_v: Tensor<F>,
    pub w_h: Tensor<F>,
    pub heads: usize,
}

impl<F: Scalar> AttentionParams<F> {
    pub fn init<R: Rng>(dim: usize, heads: usize, rng: &mut R) -> Self {
        Self {
            w_q: init_normal(vec![dim, dim], INIT_STD, rng),
            w_k: init_normal(vec![dim, dim], INIT_STD, rng),
            w_v: init_normal(vec![dim, dim], INIT_STD, rng),
            w_h: init_normal(vec![dim, dim], INIT_STD, rng),
            heads,
        }
    }

    fn check(&self, dim: usize) -> Result<usize, NnError> {
        if self.heads == 0 || dim % self.heads != 0 {
            return Err(NnError::Heads {
                op: "multi_head_attention",
                heads: self.heads,
                dim,
            });
        }
        Ok(dim / self.heads)
    }
}

pub fn init_normal<F: Scalar, R: Rng>(shape: Vec<usize>, std: f64, rng: &mut R) -> Tensor<F> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            F::from_f64(z * std)
        })
        .collect();
    Tensor::new(shape, data).expect("shape/product consistent")
}

pub fn ones<F: Scalar>(n: usize) -> Tensor<F> {
    Tensor::new(vec![n], vec![F::one(); n]).expect("shape/product consistent")
}

/// `y = x·W + b`, strictly affine.
pub fn linear<F: Scalar>(x: &Tensor<F>, p: &LinearParams<F>) -> Result<Tensor<F>, NnError> {
    x.matmul(&p.weight)?.add_bias(&p.bias)
}

/// Softmax along `axis` (0 = down columns, 1 = along rows for 2-D input;
/// 1-D input normalizes the whole vector).
pub fn softmax<F: Scalar>(x: &Tensor<F>, axis: usize) -> Result<Tensor<F>, NnError> {
    match (x.shape().len(), axis) {
        (1, 0) | (2, 1) => x.softmax_rows(false),
        (2, 0) => {
            // Transpose, row-softmax, transpose back.
            let (m, c) = (x.rows(), x.cols());
            let mut tdata = vec![F::zero(); m * c];
            for r in 0..m {
                for j in 0..c {
                    tdata[j * m + r] = x.at(r, j);
                }
            }
            let t = Tensor::new(vec![c, m], tdata)?.softmax_rows(false)?;
            let mut out = Tensor::zeros(vec![m, c]);
            for r in 0..m {
                for j in 0..c {
                    out.data_mut()[r * c + j] = t.at(j, r);
                }
            }
            Ok(out)
        }
        _ => Err(NnError::BadAxis {
            op: "softmax",
            axis,
            shape: x.shape().to_vec(),
        }),
    }
}

/// Scaled dot-product attention over `heads` (Q from `q_in`, K and V from
/// `kv_in`), heads concatenated and mixed by the output projection.
pub fn multi_head_attention<F: Scalar>(
    q_in: &Tensor<F>,
    kv_in: &Tensor<F>,
    p: &AttentionParams<F>,
) -> Result<Tensor<F>, NnError> {
    Ok(multi_head_attention_with_weights(q_in, kv_in, p, false)?.0)
}

/// As [`multi_head_attention`], also returning the per-head attention
/// matrices (each row-stochastic).
pub fn multi_head_attention_with_weights<F: Scalar>(
    q_in: &Tensor<F>,
    kv_in: &Tensor<F>,
    p: &AttentionParams<F>,
    causal: bool,
) -> Result<(Tensor<F>, Vec<Tensor<F>>), NnError> {
    let d = q_in.cols();
    if kv_in.cols() != d {
        return Err(NnError::Shape {
            op: "multi_head_attention",
            lhs: q_in.shape().to_vec(),
            rhs: kv_in.shape().to_vec(),
        });
    }
    let d_k = p.check(d)?;
    let q = q_in.matmul(&p.w_q)?;
    let k = kv_in.matmul(&p.w_k)?;
    let v = kv_in.matmul(&p.w_v)?;
    let scale = F::from_f64(1.0 / (d_k as f64).sqrt());
    let mut heads = Vec::with_capacity(p.heads);
    let mut weights = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let qh = q.slice_cols(h * d_k, d_k)?;
        let kh = k.slice_cols(h * d_k, d_k)?;
        let vh = v.slice_cols(h * d_k, d_k)?;
        let attn = qh.matmul_nt(&kh)?.scale(scale).softmax_rows(causal)?;
        heads.push(attn.matmul(&vh)?);
        weights.push(attn);
    }
    let refs: Vec<&Tensor<F>> = heads.iter().collect();
    let out = Tensor::concat_cols(&refs)?.matmul(&p.w_h)?;
    Ok((out, weights))
}

/// Row-wise layer norm; see [`Tensor::layer_norm_rows`].
pub fn layer_norm<F: Scalar>(
    x: &Tensor<F>,
    gain: &Tensor<F>,
    shift: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    x.layer_norm_rows(gain, shift)
}

/// Mean over positions of `-ln p(target)`.
pub fn cross_entropy<F: Scalar>(probs: &Tensor<F>, targets: &[usize]) -> Result<F, NnError> {
    cross_entropy_value(probs, targets)
}

/// Attention FLOP count `2·L²·d`: score computation plus weighted average,
/// constants folded. Splitting a length-`5L` sequence into five length-`L`
/// segments costs exactly one fifth of the monolithic encoder.
pub fn attention_flops(seq_len: u64, dim: u64) -> u64 {
    2 * seq_len * seq_len * dim
}

// ---------------------------------------------------------------------------
// Tape builders
// ---------------------------------------------------------------------------

/// Attention projections bound to tape variables.
#[derive(Clone, Copy)]
pub struct AttentionVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
    pub w_h: Var,
    pub heads: usize,
}

pub fn linear_t<F: Scalar>(
    tape: &mut Tape<F>,
    x: Var,
    weight: Var,
    bias: Var,
) -> Result<Var, NnError> {
    let y = tape.matmul(x, weight)?;
    tape.add_bias(y, bias)
}

pub fn multi_head_attention_t<F: Scalar>(
    tape: &mut Tape<F>,
    q_in: Var,
    kv_in: Var,
    p: &AttentionVars,
    causal: bool,
) -> Result<Var, NnError> {
    let d = tape.value(q_in).cols();
    if tape.value(kv_in).cols() != d {
        return Err(NnError::Shape {
            op: "multi_head_attention",
            lhs: tape.value(q_in).shape().to_vec(),
            rhs: tape.value(kv_in).shape().to_vec(),
        });
    }
    if p.heads == 0 || d % p.heads != 0 {
        return Err(NnError::Heads {
            op: "multi_head_attention",
            heads: p.heads,
            dim: d,
        });
    }
    let d_k = d / p.heads;
    let q = tape.matmul(q_in, p.w_q)?;
    let k = tape.matmul(kv_in, p.w_k)?;
    let v = tape.matmul(kv_in, p.w_v)?;
    let scale = F::from_f64(1.0 / (d_k as f64).sqrt());
    let mut heads = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let qh = tape.slice_cols(q, h * d_k, d_k)?;
        let kh = tape.slice_cols(k, h * d_k, d_k)?;
        let vh = tape.slice_cols(v, h * d_k, d_k)?;
        let scores = tape.matmul_nt(qh, kh)?;
        let scaled = tape.scale(scores, scale);
        let attn = tape.softmax_rows(scaled, causal)?;
        heads.push(tape.matmul(attn, vh)?);
    }
    let cat = tape.concat_cols(&heads)?;
    tape.matmul(cat, p.w_h)
}

// ---------------------------------------------------------------------------
// Pre-norm transformer block
// ---------------------------------------------------------------------------

/// One pre-norm block: `x + attn(ln1(x))` then `x + ffn(ln2(x))` with a
/// GELU feed-forward at 4x width.
#[derive(Debug, Clone)]
pub struct BlockParams<F> {
    pub ln1_gain: Tensor<F>,
    pub ln1_shift: Tensor<F>,
    pub attn: AttentionParams<F>,
    pub ln2_gain: Tensor<F>,
    pub ln2_shift: Tensor<F>,
    pub ffn_in: LinearParams<F>,
    pub ffn_out: LinearParams<F>,
}

impl<F: Scalar> BlockParams<F> {
    pub fn init<R: Rng>(dim: usize, heads: usize, rng: &mut R) -> Self {
        Self {
            ln1_gain: ones(dim),
            ln1_shift: Tensor::zeros(vec![dim]),
            attn: AttentionParams::init(dim, heads, rng),
            ln2_gain: ones(dim),
            ln2_shift: Tensor::zeros(vec![dim]),
            ffn_in: LinearParams::init(dim, dim * 4, rng),
            ffn_out: LinearParams::init(dim * 4, dim, rng),
        }
    }

    /// Plain forward, shared by inference paths.
    pub fn forward(&self, x: &Tensor<F>, causal: bool) -> Result<Tensor<F>, NnError> {
        let normed = x.layer_norm_rows(&self.ln1_gain, &self.ln1_shift)?;
        let (attn, _) = multi_head_attention_with_weights(&normed, &normed, &self.attn, causal)?;
        let x = x.add(&attn)?;
        let normed = x.layer_norm_rows(&self.ln2_gain, &self.ln2_shift)?;
        let h = linear(&normed, &self.ffn_in)?.gelu();
        let ffn = linear(&h, &self.ffn_out)?;
        x.add(&ffn)
    }
}

/// Block parameters bound to tape variables.
#[derive(Clone)]
pub struct BlockVars {
    pub ln1_gain: Var,
    pub ln1_shift: Var,
    pub attn: AttentionVars,
    pub ln2_gain: Var,
    pub ln2_shift: Var,
    pub ffn_in_w: Var,
    pub ffn_in_b: Var,
    pub ffn_out_w: Var,
    pub ffn_out_b: Var,
}

pub fn block_t<F: Scalar>(
    tape: &mut Tape<F>,
    x: Var,
    p: &BlockVars,
    causal: bool,
) -> Result<Var, NnError> {
    let normed = tape.layer_norm(x, p.ln1_gain, p.ln1_shift)?;
    let attn = multi_head_attention_t(tape, normed, normed, &p.attn, causal)?;
    let x = tape.add(x, attn)?;
    let normed = tape.layer_norm(x, p.ln2_gain, p.ln2_shift)?;
    let h = linear_t(tape, normed, p.ffn_in_w, p.ffn_in_b)?;
    let h = tape.gelu(h);
    let ffn = linear_t(tape, h, p.ffn_out_w, p.ffn_out_b)?;
    tape.add(x, ffn)
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

/// Compares the tape's analytic gradients against central finite differences
/// for a scalar-valued computation over `inputs`. Returns the maximum
/// relative error `|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)`.
pub fn grad_check<F, B>(build: B, inputs: &[Tensor<F>], eps: F) -> Result<F, NnError>
where
    F: Scalar,
    B: Fn(&mut Tape<F>, &[Var]) -> Result<Var, NnError>,
{
    let eval = |vals: &[Tensor<F>]| -> Result<F, NnError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.leaf(t.clone())).collect();
        let y = build(&mut tape, &vars)?;
        if tape.value(y).len() != 1 {
            return Err(NnError::Shape {
                op: "grad_check",
                lhs: tape.value(y).shape().to_vec(),
                rhs: vec![1],
            });
        }
        Ok(tape.value(y).item())
    };

    // Analytic pass.
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = build(&mut tape, &vars)?;
    let grads = tape.backward(y)?;
    let analytic: Vec<Tensor<F>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.grad(v, t))
        .collect();
    if analytic.iter().any(|g| !g.all_finite()) {
        return Err(NnError::NonFinite { op: "grad_check" });
    }

    let floor = F::from_f64(1e-8);
    let two = F::from_f64(2.0);
    let mut worst = F::zero();
    let mut work: Vec<Tensor<F>> = inputs.to_vec();
    for i in 0..inputs.len() {
        for j in 0..inputs[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - eps;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let fd = (plus - minus) / (two * eps);
            let ga = analytic[i].data()[j];
            let rel = (ga - fd).abs() / floor.max(ga.abs() + fd.abs());
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type T = Tensor<f64>;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn linear_identity_weights_pass_input_through() {
        let p = LinearParams {
            weight: T::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            bias: T::vector(vec![0.0, 0.0]),
        };
        let x = T::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(linear(&x, &p).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn linear_zero_weights_return_bias() {
        let p = LinearParams {
            weight: T::zeros(vec![2, 2]),
            bias: T::vector(vec![3.0, 4.0]),
        };
        let x = T::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(linear(&x, &p).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn linear_matches_hand_matrix_multiply() {
        // x·W + b with W = [[1,0],[1,1]], b = [0,1]: hand product gives [3,3].
        let p = LinearParams {
            weight: T::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap(),
            bias: T::vector(vec![0.0, 1.0]),
        };
        let x = T::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(linear(&x, &p).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn linear_dimension_mismatch_is_structured() {
        let p = LinearParams {
            weight: T::zeros(vec![3, 2]),
            bias: T::vector(vec![0.0, 0.0]),
        };
        let x = T::from_rows(&[vec![1.0, 2.0]]).unwrap();
        match linear(&x, &p).unwrap_err() {
            NnError::Shape { lhs, rhs, .. } => {
                assert_eq!(lhs, vec![1, 2]);
                assert_eq!(rhs, vec![3, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn softmax_symmetric_input_splits_evenly() {
        let y = softmax(&T::vector(vec![0.0, 0.0]), 0).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_direct_evaluation() {
        // e^x / sum e^x for [1,2,3]
        let y = softmax(&T::vector(vec![1.0, 2.0, 3.0]), 0).unwrap();
        let want = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let x = T::vector(vec![0.3, -1.2, 2.5, 0.0]);
        let shifted = T::vector(x.data().iter().map(|v| v + 123.456).collect());
        let a = softmax(&x, 0).unwrap();
        let b = softmax(&shifted, 0).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_empty_axis_errors() {
        let x = T::zeros(vec![0]);
        assert!(softmax(&x, 0).is_err());
    }

    #[test]
    fn softmax_axis_zero_normalizes_columns() {
        let x = T::from_rows(&[vec![1.0, 5.0], vec![1.0, 5.0]]).unwrap();
        let y = softmax(&x, 0).unwrap();
        for j in 0..2 {
            assert!((y.at(0, j) + y.at(1, j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_key_attention_returns_value_row() {
        // n = m = 1, identity projections, one head: the lone key gets
        // weight 1 and the output is exactly the kv row.
        let eye = T::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = AttentionParams {
            w_q: eye.clone(),
            w_k: eye.clone(),
            w_v: eye.clone(),
            w_h: eye,
            heads: 1,
        };
        let q = T::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let kv = T::from_rows(&[vec![2.0, 5.0]]).unwrap();
        let y = multi_head_attention(&q, &kv, &p).unwrap();
        assert_eq!(y.data(), &[2.0, 5.0]);
    }

    #[test]
    fn identical_kv_rows_make_attention_weights_irrelevant() {
        let mut r = rng(7);
        let p = AttentionParams::init(4, 2, &mut r);
        let q = init_normal::<f64, _>(vec![3, 4], 1.0, &mut r);
        let row: Vec<f64> = (0..4).map(|i| i as f64 * 0.5 - 1.0).collect();
        let kv = T::from_rows(&[row.clone(), row.clone(), row]).unwrap();
        let y = multi_head_attention(&q, &kv, &p).unwrap();
        // Every output row equals V·W_h of the repeated row.
        let expect = kv.take_rows(1).unwrap().matmul(&p.w_v).unwrap().matmul(&p.w_h).unwrap();
        for r_i in 0..3 {
            for c in 0..4 {
                assert!((y.at(r_i, c) - expect.at(0, c)).abs() < 1e-12);
            }
        }
    }

    /// Straight-line reference for two-row, one-head attention, written
    /// independently of the tensor kernels.
    fn attention_oracle_2x2(q_in: [[f64; 2]; 2], kv: [[f64; 2]; 2], p: &AttentionParams<f64>) -> [[f64; 2]; 2] {
        let w = |t: &T, r: usize, c: usize| t.at(r, c);
        let proj = |x: [[f64; 2]; 2], m: &T| {
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        out[i][j] += x[i][k] * w(m, k, j);
                    }
                }
            }
            out
        };
        let q = proj(q_in, &p.w_q);
        let k = proj(kv, &p.w_k);
        let v = proj(kv, &p.w_v);
        let scale = 1.0 / (2.0_f64).sqrt();
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            let s0 = (q[i][0] * k[0][0] + q[i][1] * k[0][1]) * scale;
            let s1 = (q[i][0] * k[1][0] + q[i][1] * k[1][1]) * scale;
            let m = s0.max(s1);
            let (e0, e1) = ((s0 - m).exp(), (s1 - m).exp());
            let z = e0 + e1;
            let (a0, a1) = (e0 / z, e1 / z);
            let ctx = [a0 * v[0][0] + a1 * v[1][0], a0 * v[0][1] + a1 * v[1][1]];
            for j in 0..2 {
                out[i][j] = ctx[0] * w(&p.w_h, 0, j) + ctx[1] * w(&p.w_h, 1, j);
            }
        }
        out
    }

    #[test]
    fn attention_matches_straight_line_oracle() {
        let mut r = rng(11);
        let p = AttentionParams::init(2, 1, &mut r);
        let q = [[0.2, -0.4], [1.0, 0.3]];
        let kv = [[0.5, 0.1], [-0.2, 0.8]];
        let want = attention_oracle_2x2(q, kv, &p);
        let y = multi_head_attention(
            &T::from_rows(&[q[0].to_vec(), q[1].to_vec()]).unwrap(),
            &T::from_rows(&[kv[0].to_vec(), kv[1].to_vec()]).unwrap(),
            &p,
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((y.at(i, j) - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rejects_heads_not_dividing_width() {
        let mut r = rng(3);
        let p = AttentionParams::init(4, 3, &mut r);
        let x = T::zeros(vec![2, 4]);
        match multi_head_attention(&x, &x, &p).unwrap_err() {
            NnError::Heads { heads, dim, .. } => {
                assert_eq!((heads, dim), (3, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn attention_weights_are_row_stochastic() {
        let mut r = rng(5);
        let p = AttentionParams::init(8, 4, &mut r);
        let q = init_normal::<f64, _>(vec![3, 8], 1.0, &mut r);
        let kv = init_normal::<f64, _>(vec![5, 8], 1.0, &mut r);
        let (_, weights) = multi_head_attention_with_weights(&q, &kv, &p, false).unwrap();
        assert_eq!(weights.len(), 4);
        for w in weights {
            for row in 0..w.rows() {
                let sum: f64 = w.row(row).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn layer_norm_constant_row_is_all_zeros() {
        let x = T::from_rows(&[vec![3.0, 3.0, 3.0]]).unwrap();
        let y = layer_norm(&x, &ones(3), &T::zeros(vec![3])).unwrap();
        for &v in y.data() {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn layer_norm_unit_pair() {
        // [1,-1] has mean 0 and variance 1; output stays ~[1,-1].
        let x = T::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let y = layer_norm(&x, &ones(2), &T::zeros(vec![2])).unwrap();
        assert!((y.at(0, 0) - 1.0).abs() < 1e-4);
        assert!((y.at(0, 1) + 1.0).abs() < 1e-4);
    }

    #[test]
    fn layer_norm_zero_gain_returns_shift() {
        let x = T::from_rows(&[vec![5.0, -2.0]]).unwrap();
        let shift = T::vector(vec![0.25, -0.75]);
        let y = layer_norm(&x, &T::zeros(vec![2]), &shift).unwrap();
        assert_eq!(y.data(), &[0.25, -0.75]);
    }

    #[test]
    fn layer_norm_rows_standardized_before_gain() {
        let x = T::from_rows(&[vec![0.3, 1.9, -4.0, 2.2], vec![10.0, 10.5, 9.5, 8.0]]).unwrap();
        let y = layer_norm(&x, &ones(4), &T::zeros(vec![4])).unwrap();
        for r in 0..2 {
            let row = y.row(r);
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-7);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn cross_entropy_perfect_prediction_is_zero() {
        let p = T::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(cross_entropy(&p, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_uniform_is_log_vocab() {
        let v = 7;
        let p = T::from_rows(&[vec![1.0 / v as f64; v]]).unwrap();
        let loss = cross_entropy(&p, &[3]).unwrap();
        assert!((loss - (v as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_hand_case() {
        let p = T::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let loss = cross_entropy(&p, &[0, 1]).unwrap();
        let want = (2.0_f64.ln() + (4.0_f64 / 3.0).ln()) / 2.0;
        assert!((loss - want).abs() < 1e-12);
        assert!((loss - 0.4904).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_rejects_out_of_vocab_target() {
        let p = T::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            cross_entropy(&p, &[2]).unwrap_err(),
            NnError::TargetOutOfRange { target: 2, vocab: 2 }
        ));
    }

    #[test]
    fn attention_flops_split_claim() {
        // L=100, d=8: monolithic 160000; five segments of 20 cost 32000.
        assert_eq!(attention_flops(100, 8), 160_000);
        assert_eq!(5 * attention_flops(20, 8), 32_000);
        assert_eq!(attention_flops(1, 7), 14);
        for l in [5u64, 10, 35, 100, 5000] {
            for d in [1u64, 8, 64] {
                assert_eq!(5 * attention_flops(l, d) * 5, attention_flops(5 * l, d));
            }
        }
    }

    // ----- gradient checks (the derived oracle is the finite difference) ----

    #[test]
    fn grad_check_linear() {
        for seed in 0..20 {
            let mut r = rng(seed);
            let x = init_normal::<f64, _>(vec![3, 3], 1.0, &mut r);
            let w = init_normal::<f64, _>(vec![3, 3], 1.0, &mut r);
            let b = init_normal::<f64, _>(vec![3], 1.0, &mut r);
            let err = grad_check(
                |t, vars| {
                    let y = linear_t(t, vars[0], vars[1], vars[2])?;
                    // Reduce to scalar with a fixed probe vector.
                    let probe = t.leaf(T::from_rows(&[vec![0.7], vec![-0.3], vec![0.5]]).unwrap());
                    let z = t.matmul(y, probe)?;
                    let ones_row = t.leaf(T::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap());
                    t.matmul(ones_row, z)
                },
                &[x, w, b],
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: rel err {err}");
        }
    }

    #[test]
    fn grad_check_softmax_cross_entropy() {
        for seed in 0..20 {
            let mut r = rng(100 + seed);
            let logits = init_normal::<f64, _>(vec![4, 5], 1.0, &mut r);
            let err = grad_check(
                |t, vars| {
                    let p = t.softmax_rows(vars[0], false)?;
                    t.cross_entropy(p, &[1, 4, 0, 2])
                },
                &[logits],
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: rel err {err}");
        }
    }

    #[test]
    fn grad_check_multi_head_attention() {
        for seed in 0..20 {
            let mut r = rng(200 + seed);
            let q = init_normal::<f64, _>(vec![3, 4], 0.5, &mut r);
            let kv = init_normal::<f64, _>(vec![2, 4], 0.5, &mut r);
            let wq = init_normal::<f64, _>(vec![4, 4], 0.5, &mut r);
            let wk = init_normal::<f64, _>(vec![4, 4], 0.5, &mut r);
            let wv = init_normal::<f64, _>(vec![4, 4], 0.5, &mut r);
            let wh = init_normal::<f64, _>(vec![4, 4], 0.5, &mut r);
            let err = grad_check(
                |t, vars| {
                    let p = AttentionVars {
                        w_q: vars[2],
                        w_k: vars[3],
                        w_v: vars[4],
                        w_h: vars[5],
                        heads: 2,
                    };
                    let y = multi_head_attention_t(t, vars[0], vars[1], &p, false)?;
                    let probe = t.leaf(T::from_rows(&[vec![0.3], vec![-0.8], vec![0.6], vec![0.2]]).unwrap());
                    let z = t.matmul(y, probe)?;
                    let ones_row = t.leaf(T::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap());
                    t.matmul(ones_row, z)
                },
                &[q, kv, wq, wk, wv, wh],
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: rel err {err}");
        }
    }

    #[test]
    fn grad_check_layer_norm_and_gelu() {
        for seed in 0..20 {
            let mut r = rng(300 + seed);
            let x = init_normal::<f64, _>(vec![2, 6], 1.0, &mut r);
            let g = init_normal::<f64, _>(vec![6], 0.5, &mut r);
            let s = init_normal::<f64, _>(vec![6], 0.5, &mut r);
            let err = grad_check(
                |t, vars| {
                    let y = t.layer_norm(vars[0], vars[1], vars[2])?;
                    let y = t.gelu(y);
                    let probe = t.leaf(T::from_rows(&[vec![0.1], vec![0.9], vec![-0.4], vec![0.7], vec![0.2], vec![-0.6]]).unwrap());
                    let z = t.matmul(y, probe)?;
                    let ones_row = t.leaf(T::from_rows(&[vec![1.0, 1.0]]).unwrap());
                    t.matmul(ones_row, z)
                },
                &[x, g, s],
                1e-4,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: rel err {err}");
        }
    }

    #[test]
    fn grad_check_full_block() {
        let mut r = rng(999);
        let dim = 4;
        let p = BlockParams::<f64>::init(dim, 2, &mut r);
        let x = init_normal::<f64, _>(vec![3, dim], 0.7, &mut r);
        let inputs = vec![
            x,
            p.ln1_gain.clone(),
            p.ln1_shift.clone(),
            p.attn.w_q.clone(),
            p.attn.w_k.clone(),
            p.attn.w_v.clone(),
            p.attn.w_h.clone(),
            p.ln2_gain.clone(),
            p.ln2_shift.clone(),
            p.ffn_in.weight.clone(),
            p.ffn_in.bias.clone(),
            p.ffn_out.weight.clone(),
            p.ffn_out.bias.clone(),
        ];
        let err = grad_check(
            |t, vars| {
                let bv = BlockVars {
                    ln1_gain: vars[1],
                    ln1_shift: vars[2],
                    attn: AttentionVars {
                        w_q: vars[3],
                        w_k: vars[4],
                        w_v: vars[5],
                        w_h: vars[6],
                        heads: 2,
                    },
                    ln2_gain: vars[7],
                    ln2_shift: vars[8],
                    ffn_in_w: vars[9],
                    ffn_in_b: vars[10],
                    ffn_out_w: vars[11],
                    ffn_out_b: vars[12],
                };
                let y = block_t(t, vars[0], &bv, true)?;
                let probe = t.leaf(T::from_rows(&[vec![0.3], vec![-0.2], vec![0.8], vec![0.5]]).unwrap());
                let z = t.matmul(y, probe)?;
                let ones_row = t.leaf(T::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap());
                t.matmul(ones_row, z)
            },
            &inputs,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-4, "block rel err {err}");
    }

    #[test]
    fn tape_and_plain_block_forward_agree() {
        let mut r = rng(42);
        let p = BlockParams::<f64>::init(6, 3, &mut r);
        let x = init_normal::<f64, _>(vec![4, 6], 0.9, &mut r);
        let plain = p.forward(&x, true).unwrap();
        let mut tape = Tape::new();
        let xv = tape.leaf(x);
        let bv = BlockVars {
            ln1_gain: tape.leaf(p.ln1_gain.clone()),
            ln1_shift: tape.leaf(p.ln1_shift.clone()),
            attn: AttentionVars {
                w_q: tape.leaf(p.attn.w_q.clone()),
                w_k: tape.leaf(p.attn.w_k.clone()),
                w_v: tape.leaf(p.attn.w_v.clone()),
                w_h: tape.leaf(p.attn.w_h.clone()),
                heads: 3,
            },
            ln2_gain: tape.leaf(p.ln2_gain.clone()),
            ln2_shift: tape.leaf(p.ln2_shift.clone()),
            ffn_in_w: tape.leaf(p.ffn_in.weight.clone()),
            ffn_in_b: tape.leaf(p.ffn_in.bias.clone()),
            ffn_out_w: tape.leaf(p.ffn_out.weight.clone()),
            ffn_out_b: tape.leaf(p.ffn_out.bias.clone()),
        };
        let y = block_t(&mut tape, xv, &bv, true).unwrap();
        assert_eq!(tape.value(y).data(), plain.data());
    }
}
