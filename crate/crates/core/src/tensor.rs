//! Dense row-major tensors and the kernels the autograd tape records.
//!
//! Shapes are validated on every operation; a failed check is a
//! [`NnError::Shape`] naming both operand shapes, never a panic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Errors from the numeric core.
#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: {heads} heads must divide width {dim}")]
    Heads {
        op: &'static str,
        heads: usize,
        dim: usize,
    },
    #[error("{op}: axis {axis} is empty or out of range for shape {shape:?}")]
    BadAxis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },
    #[error("cross_entropy: target {target} outside vocabulary of size {vocab}")]
    TargetOutOfRange { target: usize, vocab: usize },
    #[error("cross_entropy: row {row} sums to {sum:.9}, expected 1 within 1e-6")]
    NotNormalized { row: usize, sum: f64 },
}

/// Dense numeric array, row-major, with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
    #[serde(skip)]
    grad: Option<Vec<F>>,
}

impl<F: Scalar> Tensor<F> {
    /// Builds a tensor from shape and row-major values.
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self, NnError> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(NnError::Shape {
                op: "tensor_new",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![F::zero(); n],
            grad: None,
        }
    }

    /// 2-D constructor from nested rows; rows must be equal length.
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self, NnError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(NnError::Shape {
                    op: "from_rows",
                    lhs: vec![r, c],
                    rhs: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            shape: vec![r, c],
            data,
            grad: None,
        })
    }

    pub fn vector(data: Vec<F>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
            grad: None,
        }
    }

    pub fn scalar(v: F) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row count; 1-D tensors count as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    /// Column count; 1-D tensors are one row of `len` columns.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => self.data.len(),
        }
    }

    pub fn at(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols() + c]
    }

    pub fn row(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn item(&self) -> F {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, g: Vec<F>) {
        debug_assert_eq!(g.len(), self.data.len());
        self.grad = Some(g);
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<(), NnError> {
        if self.shape != other.shape {
            return Err(NnError::Shape {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// `self · other` for 2-D operands.
    pub fn matmul(&self, other: &Self) -> Result<Self, NnError> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(NnError::Shape {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &a) in arow.iter().enumerate() {
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
            grad: None,
        })
    }

    /// `self · otherᵀ`; `other` is `[n × k]` with `k` matching `self` columns.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self, NnError> {
        let (m, k) = (self.rows(), self.cols());
        let (n, k2) = (other.rows(), other.cols());
        if k != k2 {
            return Err(NnError::Shape {
                op: "matmul_nt",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &other.data[j * k..(j + 1) * k];
                let mut acc = F::zero();
                for (&a, &b) in arow.iter().zip(brow) {
                    acc += a * b;
                }
                out[i * n + j] = acc;
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
            grad: None,
        })
    }

    /// `selfᵀ · other`; `self` is `[k × m]`, `other` `[k × n]`.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self, NnError> {
        let (k, m) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(NnError::Shape {
                op: "matmul_tn",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![F::zero(); m * n];
        for p in 0..k {
            let arow = &self.data[p * m..(p + 1) * m];
            let brow = &other.data[p * n..(p + 1) * n];
            for (i, &a) in arow.iter().enumerate() {
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
            grad: None,
        })
    }

    /// Adds a `[cols]` bias vector to every row.
    pub fn add_bias(&self, bias: &Self) -> Result<Self, NnError> {
        if bias.shape.len() != 1 || bias.shape[0] != self.cols() {
            return Err(NnError::Shape {
                op: "add_bias",
                lhs: self.shape.clone(),
                rhs: bias.shape.clone(),
            });
        }
        let c = self.cols();
        let mut out = self.data.clone();
        for (i, o) in out.iter_mut().enumerate() {
            *o += bias.data[i % c];
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: out,
            grad: None,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, NnError> {
        self.same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
            grad: None,
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), NnError> {
        self.same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, c: F) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v * c).collect(),
            grad: None,
        }
    }

    /// Column sums, yielding a `[cols]` vector.
    pub fn col_sums(&self) -> Self {
        let c = self.cols();
        let mut out = vec![F::zero(); c];
        for (i, &v) in self.data.iter().enumerate() {
            out[i % c] += v;
        }
        Self {
            shape: vec![c],
            data: out,
            grad: None,
        }
    }

    /// Columns `[start, start+len)` of a 2-D tensor.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Self, NnError> {
        let (m, c) = (self.rows(), self.cols());
        if start + len > c {
            return Err(NnError::Shape {
                op: "slice_cols",
                lhs: self.shape.clone(),
                rhs: vec![start, len],
            });
        }
        let mut data = Vec::with_capacity(m * len);
        for r in 0..m {
            data.extend_from_slice(&self.data[r * c + start..r * c + start + len]);
        }
        Ok(Self {
            shape: vec![m, len],
            data,
            grad: None,
        })
    }

    /// Row-axis concatenation; all parts must share a column count.
    pub fn concat_rows(parts: &[&Self]) -> Result<Self, NnError> {
        let c = parts.first().map_or(0, |t| t.cols());
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols() != c {
                return Err(NnError::Shape {
                    op: "concat_rows",
                    lhs: vec![rows, c],
                    rhs: p.shape.clone(),
                });
            }
            rows += p.rows();
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            shape: vec![rows, c],
            data,
            grad: None,
        })
    }

    /// Column-axis concatenation; all parts must share a row count.
    pub fn concat_cols(parts: &[&Self]) -> Result<Self, NnError> {
        let m = parts.first().map_or(0, |t| t.rows());
        let total: usize = parts.iter().map(|t| t.cols()).sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for p in parts {
                if p.rows() != m {
                    return Err(NnError::Shape {
                        op: "concat_cols",
                        lhs: vec![m, total],
                        rhs: p.shape.clone(),
                    });
                }
                data.extend_from_slice(p.row(r));
            }
        }
        Ok(Self {
            shape: vec![m, total],
            data,
            grad: None,
        })
    }

    /// Selects rows by index (duplicates allowed), as an embedding lookup.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Self, NnError> {
        let (m, c) = (self.rows(), self.cols());
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= m {
                return Err(NnError::Shape {
                    op: "gather_rows",
                    lhs: self.shape.clone(),
                    rhs: vec![i],
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            shape: vec![idx.len(), c],
            data,
            grad: None,
        })
    }

    /// Keeps the first `n` rows.
    pub fn take_rows(&self, n: usize) -> Result<Self, NnError> {
        if n > self.rows() {
            return Err(NnError::Shape {
                op: "take_rows",
                lhs: self.shape.clone(),
                rhs: vec![n],
            });
        }
        let c = self.cols();
        Ok(Self {
            shape: vec![n, c],
            data: self.data[..n * c].to_vec(),
            grad: None,
        })
    }

    /// Row-wise softmax with max subtraction; `causal` masks columns above
    /// the row index (requires at least a square-or-wider layout).
    pub fn softmax_rows(&self, causal: bool) -> Result<Self, NnError> {
        let (m, c) = (self.rows(), self.cols());
        if c == 0 {
            return Err(NnError::BadAxis {
                op: "softmax",
                axis: self.shape.len().saturating_sub(1),
                shape: self.shape.clone(),
            });
        }
        let mut out = vec![F::zero(); m * c];
        for r in 0..m {
            let row = self.row(r);
            let limit = if causal { (r + 1).min(c) } else { c };
            let mut mx = row[0];
            for &v in &row[1..limit] {
                if v > mx {
                    mx = v;
                }
            }
            let mut denom = F::zero();
            for j in 0..limit {
                let e = (row[j] - mx).exp();
                out[r * c + j] = e;
                denom += e;
            }
            for j in 0..limit {
                out[r * c + j] /= denom;
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: out,
            grad: None,
        })
    }

    /// Row-wise layer normalization with learned gain/shift vectors.
    /// Epsilon 1e-5 is added to the variance before the square root.
    pub fn layer_norm_rows(&self, gain: &Self, shift: &Self) -> Result<Self, NnError> {
        let c = self.cols();
        if gain.shape != vec![c] || shift.shape != vec![c] {
            return Err(NnError::Shape {
                op: "layer_norm",
                lhs: self.shape.clone(),
                rhs: gain.shape.clone(),
            });
        }
        let eps = F::from_f64(LAYER_NORM_EPS);
        let m = self.rows();
        let cf = F::from_f64(c as f64);
        let mut out = vec![F::zero(); m * c];
        for r in 0..m {
            let row = self.row(r);
            let mean = row.iter().copied().sum::<F>() / cf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / cf;
            let inv = (var + eps).sqrt().recip();
            for j in 0..c {
                out[r * c + j] = (row[j] - mean) * inv * gain.data[j] + shift.data[j];
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: out,
            grad: None,
        })
    }

    /// Elementwise GELU (tanh approximation).
    pub fn gelu(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| gelu_scalar(v)).collect(),
            grad: None,
        }
    }
}

/// Variance epsilon used by layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) fn gelu_scalar<F: Scalar>(x: F) -> F {
    let half = F::from_f64(0.5);
    let c = F::from_f64(0.7978845608028654); // sqrt(2/pi)
    let k = F::from_f64(0.044715);
    half * x * (F::one() + (c * (x + k * x * x * x)).tanh())
}

pub(crate) fn gelu_grad_scalar<F: Scalar>(x: F) -> F {
    let half = F::from_f64(0.5);
    let c = F::from_f64(0.7978845608028654);
    let k = F::from_f64(0.044715);
    let three = F::from_f64(3.0);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * k * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    type T = Tensor<f64>;

    #[test]
    fn matmul_matches_hand_product() {
        let a = T::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = T::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let y = a.matmul(&b).unwrap();
        assert_eq!(y.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let a = T::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = T::from_rows(&[vec![1.0, 0.5, -1.0], vec![2.0, -0.5, 0.0]]).unwrap();
        // a · bᵀ  ==  a · transpose(b)
        let bt = T::from_rows(&[vec![1.0, 2.0], vec![0.5, -0.5], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(
            a.matmul_nt(&b).unwrap().data(),
            a.matmul(&bt).unwrap().data()
        );
        // aᵀ · a via matmul_tn
        let at = T::from_rows(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(
            a.matmul_tn(&a).unwrap().data(),
            at.matmul(&a).unwrap().data()
        );
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = T::zeros(vec![2, 3]);
        let b = T::zeros(vec![2, 3]);
        let err = a.matmul(&b).unwrap_err();
        match err {
            NnError::Shape { lhs, rhs, .. } => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn causal_softmax_zeroes_future_columns() {
        let x = T::from_rows(&[vec![0.0, 5.0, 9.0], vec![1.0, 1.0, 9.0]]).unwrap();
        let y = x.softmax_rows(true).unwrap();
        assert_eq!(y.at(0, 0), 1.0);
        assert_eq!(y.at(0, 1), 0.0);
        assert_eq!(y.at(0, 2), 0.0);
        assert!((y.at(1, 0) - 0.5).abs() < 1e-12);
        assert!((y.at(1, 1) - 0.5).abs() < 1e-12);
        assert_eq!(y.at(1, 2), 0.0);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let a = T::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = T::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let cat = T::concat_cols(&[&a, &b]).unwrap();
        assert_eq!(cat.shape(), &[2, 3]);
        assert_eq!(cat.slice_cols(0, 2).unwrap(), a);
        assert_eq!(cat.slice_cols(2, 1).unwrap(), b);
    }
}
