//! Decoding stack: temperature, then top-k, then nucleus filtering, then
//! sampling — in that fixed order. Every tie (argmax, the top-k boundary,
//! the cumulative boundary) resolves toward the lowest token id.

use rand::Rng;
use thiserror::Error;

use crate::data::vocab;
use crate::model::{ECodeParams, GenSession, ModelError, SampleTokens};
use crate::scalar::Scalar;
use crate::seeding::{derive_seed, rng_from};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_k: usize,
    pub top_p: f64,
    pub max_len: usize,
    pub greedy: bool,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.25,
            top_k: 50,
            top_p: 0.95,
            max_len: 768,
            greedy: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("temperature must be positive unless greedy")]
    BadTemperature,
    #[error("top_p must be in (0, 1]")]
    BadTopP,
    #[error("top_k must be at least 1")]
    BadTopK,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl DecodeParams {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !self.greedy && self.temperature <= 0.0 {
            return Err(DecodeError::BadTemperature);
        }
        if self.top_p <= 0.0 || self.top_p > 1.0 {
            return Err(DecodeError::BadTopP);
        }
        if self.top_k == 0 {
            return Err(DecodeError::BadTopK);
        }
        Ok(())
    }
}

/// Lowest-id argmax.
pub fn argmax<F: Scalar>(probs: &[F]) -> u32 {
    let mut best = 0usize;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best as u32
}

/// Samples one token id from a distribution through the fixed pipeline:
/// (1) logits divided by temperature, (2) top-k by probability, (3) minimal
/// nucleus with cumulative mass >= top_p, (4) renormalize, (5) draw.
pub fn sample_token<F: Scalar, R: Rng>(
    probs: &[F],
    params: &DecodeParams,
    rng: &mut R,
) -> Result<u32, DecodeError> {
    params.validate()?;
    if params.greedy {
        return Ok(argmax(probs));
    }
    // Temperature on log-probabilities, re-normalized via max subtraction.
    let inv_t = 1.0 / params.temperature;
    let scaled: Vec<f64> = probs
        .iter()
        .map(|&p| p.as_f64().max(f64::MIN_POSITIVE).ln() * inv_t)
        .collect();
    let mx = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scaled.iter().map(|&l| (l - mx).exp()).collect();
    let z: f64 = exp.iter().sum();

    // Sort by probability descending, id ascending; keep top-k.
    let mut order: Vec<usize> = (0..exp.len()).collect();
    order.sort_by(|&a, &b| {
        exp[b]
            .partial_cmp(&exp[a])
            .expect("finite probabilities")
            .then(a.cmp(&b))
    });
    order.truncate(params.top_k);

    // Minimal prefix whose cumulative mass reaches top_p.
    let kept_mass: f64 = order.iter().map(|&i| exp[i]).sum::<f64>() / z;
    let threshold = params.top_p.min(kept_mass);
    let mut cum = 0.0;
    let mut nucleus = Vec::with_capacity(order.len());
    for &i in &order {
        nucleus.push(i);
        cum += exp[i] / z;
        if cum >= threshold {
            break;
        }
    }

    let total: f64 = nucleus.iter().map(|&i| exp[i]).sum();
    let draw: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &i in &nucleus {
        acc += exp[i];
        if draw < acc {
            return Ok(i as u32);
        }
    }
    Ok(*nucleus.last().expect("argmax always survives") as u32)
}

/// Renormalized survivor distribution after temperature/top-k/top-p, for
/// inspection and tests.
pub fn filtered_distribution<F: Scalar>(
    probs: &[F],
    params: &DecodeParams,
) -> Result<Vec<(u32, f64)>, DecodeError> {
    params.validate()?;
    let inv_t = 1.0 / params.temperature;
    let scaled: Vec<f64> = probs
        .iter()
        .map(|&p| p.as_f64().max(f64::MIN_POSITIVE).ln() * inv_t)
        .collect();
    let mx = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scaled.iter().map(|&l| (l - mx).exp()).collect();
    let z: f64 = exp.iter().sum();
    let mut order: Vec<usize> = (0..exp.len()).collect();
    order.sort_by(|&a, &b| {
        exp[b]
            .partial_cmp(&exp[a])
            .expect("finite probabilities")
            .then(a.cmp(&b))
    });
    order.truncate(params.top_k);
    let kept_mass: f64 = order.iter().map(|&i| exp[i]).sum::<f64>() / z;
    let threshold = params.top_p.min(kept_mass);
    let mut cum = 0.0;
    let mut nucleus = Vec::new();
    for &i in &order {
        nucleus.push(i);
        cum += exp[i] / z;
        if cum >= threshold {
            break;
        }
    }
    let total: f64 = nucleus.iter().map(|&i| exp[i]).sum();
    Ok(nucleus.into_iter().map(|i| (i as u32, exp[i] / total)).collect())
}

/// One generated candidate: token ids (EOS included when reached) and a
/// truncation flag for cap-limited sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub ids: Vec<u32>,
    pub truncated: bool,
}

/// Autoregressive generation from the encoder output; deterministic for a
/// fixed seed (ignored under the greedy flag).
pub fn generate<F: Scalar>(
    params: &ECodeParams<F>,
    enc: &Tensor<F>,
    decode: &DecodeParams,
    seed: u64,
) -> Result<Generated, DecodeError> {
    decode.validate()?;
    let mut rng = rng_from(seed);
    let budget = decode.max_len.min(params.config.decoder_cap - 1);
    let mut session = GenSession::new(params, enc)?;
    let mut probs = session.step(vocab::BOS)?;
    let mut ids = Vec::new();
    loop {
        let tok = sample_token(&probs, decode, &mut rng)?;
        ids.push(tok);
        if tok == vocab::EOS {
            return Ok(Generated { ids, truncated: false });
        }
        if ids.len() >= budget {
            return Ok(Generated { ids, truncated: true });
        }
        probs = session.step(tok)?;
    }
}

/// `k` independent generations with per-candidate seeds derived as
/// `hash(seed, j)`; candidate order is stable and each candidate is
/// reproducible in isolation.
pub fn sample_k_candidates<F: Scalar>(
    params: &ECodeParams<F>,
    tokens: &SampleTokens,
    k: usize,
    decode: &DecodeParams,
    seed: u64,
) -> Result<Vec<Generated>, DecodeError> {
    let enc = crate::model::encode_sample(params, tokens)?;
    (0..k)
        .map(|j| generate(params, &enc, decode, derive_seed(seed, j as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_is_argmax_with_low_id_ties() {
        let p = DecodeParams { greedy: true, ..DecodeParams::default() };
        let mut rng = rng_from(0);
        assert_eq!(sample_token(&[0.2, 0.5, 0.3], &p, &mut rng).unwrap(), 1);
        assert_eq!(sample_token(&[0.4, 0.4, 0.2], &p, &mut rng).unwrap(), 0);
    }

    #[test]
    fn top_k_is_noop_when_vocab_is_smaller() {
        let p = DecodeParams {
            top_k: 50,
            top_p: 1.0,
            temperature: 1.0,
            ..DecodeParams::default()
        };
        let dist = filtered_distribution(&[0.25, 0.25, 0.25, 0.25], &p).unwrap();
        assert_eq!(dist.len(), 4);
        for (_, q) in dist {
            assert!((q - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn nucleus_rule_keeps_minimal_prefix_and_renormalizes() {
        // [0.9, 0.06, 0.04] with top_p = 0.95 keeps {0, 1} and renormalizes
        // to [0.9375, 0.0625].
        let p = DecodeParams {
            temperature: 1.0,
            top_k: 50,
            top_p: 0.95,
            ..DecodeParams::default()
        };
        let dist = filtered_distribution(&[0.9, 0.06, 0.04], &p).unwrap();
        assert_eq!(dist.len(), 2);
        assert_eq!(dist[0].0, 0);
        assert_eq!(dist[1].0, 1);
        assert!((dist[0].1 - 0.9375).abs() < 1e-9);
        assert!((dist[1].1 - 0.0625).abs() < 1e-9);
    }

    #[test]
    fn quarter_temperature_sharpens_as_computed_by_hand() {
        // probs from logits [1,2]; at temperature 0.25 the distribution is
        // softmax([4,8]) which is about [0.0180, 0.9820].
        let logits = [1.0_f64, 2.0];
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let probs: Vec<f64> = logits.iter().map(|l| l.exp() / z).collect();
        let p = DecodeParams {
            temperature: 0.25,
            top_k: 50,
            top_p: 1.0,
            ..DecodeParams::default()
        };
        let dist = filtered_distribution(&probs, &p).unwrap();
        // Sorted descending: id 1 first.
        assert_eq!(dist[0].0, 1);
        assert!((dist[0].1 - 0.9820137900379085).abs() < 1e-9);
        assert!((dist[1].1 - 0.01798620996209156).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = DecodeParams::default();
        let probs = vec![0.3, 0.25, 0.2, 0.15, 0.1];
        let a: Vec<u32> = (0..20)
            .map(|i| sample_token(&probs, &p, &mut rng_from(i)).unwrap())
            .collect();
        let b: Vec<u32> = (0..20)
            .map(|i| sample_token(&probs, &p, &mut rng_from(i)).unwrap())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = DecodeParams { temperature: 0.0, ..DecodeParams::default() };
        assert!(matches!(p.validate(), Err(DecodeError::BadTemperature)));
        p.temperature = 1.0;
        p.top_p = 0.0;
        assert!(matches!(p.validate(), Err(DecodeError::BadTopP)));
        p.top_p = 0.5;
        p.top_k = 0;
        assert!(matches!(p.validate(), Err(DecodeError::BadTopK)));
    }
}
