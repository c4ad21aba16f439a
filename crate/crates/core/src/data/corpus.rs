//! Synthetic corpus generator. Four template families with provable
//! efficiency gaps under the interpreter's cost model:
//!
//! - loop accumulation vs closed form (easy)
//! - linear scan vs map lookup (intermediate)
//! - recursive vs iterative accumulation (hard)
//! - nested vs single-pass counting (hard)
//!
//! Generation is a pure function of `(n, seed, mix)`: each sample draws
//! from its own derived seed, so samples are independent of generation
//! order. Every sample is execution-checked before it ships.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::sample::{validate_sample, Difficulty, EpcSample, IoExample, Split};
use crate::minilang::{self, cost};
use crate::seeding::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyMix {
    pub easy: f64,
    pub intermediate: f64,
    pub hard: f64,
}

impl Default for DifficultyMix {
    fn default() -> Self {
        Self {
            easy: 0.34,
            intermediate: 0.33,
            hard: 0.33,
        }
    }
}

impl DifficultyMix {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Difficulty {
        let total = self.easy + self.intermediate + self.hard;
        let u: f64 = rng.random::<f64>() * total;
        if u < self.easy {
            Difficulty::Easy
        } else if u < self.easy + self.intermediate {
            Difficulty::Intermediate
        } else {
            Difficulty::Hard
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus size must be at least 1")]
    Empty,
    #[error("template produced an invalid sample at index {index}: {msg}")]
    BadTemplate { index: u64, msg: String },
}

/// Generates `n` samples; the highest-index `test_fraction` become the
/// held-out split.
pub fn generate_corpus(
    n: u64,
    seed: u64,
    mix: DifficultyMix,
    test_fraction: f64,
) -> Result<Vec<EpcSample>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::Empty);
    }
    let n_test = (n as f64 * test_fraction.clamp(0.0, 1.0)).round() as u64;
    let mut out = Vec::with_capacity(n as usize);
    for index in 0..n {
        let mut rng = rng_from(derive_seed(seed, index));
        let difficulty = mix.draw(&mut rng);
        let mut sample = instantiate(difficulty, &mut rng);
        sample.submission_index = index;
        sample.split = if index >= n - n_test {
            Split::Test
        } else {
            Split::Train
        };
        validate_sample(&sample).map_err(|e| CorpusError::BadTemplate {
            index,
            msg: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}

fn instantiate(difficulty: Difficulty, rng: &mut ChaCha8Rng) -> EpcSample {
    match difficulty {
        Difficulty::Easy => loop_sum_template(rng),
        Difficulty::Intermediate => search_template(rng),
        Difficulty::Hard => {
            if rng.random::<bool>() {
                recursion_template(rng)
            } else {
                nested_loop_template(rng)
            }
        }
    }
}

fn expected_output(source: &str, input: &str) -> String {
    let out = minilang::run_source(source, input, cost::DEFAULT_FUEL);
    debug_assert!(out.ok(), "template must execute: {:?}", out.detail);
    out.output.trim_end().to_string()
}

fn io_count(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(3..=5)
}

/// Loop accumulation vs closed form.
fn loop_sum_template(rng: &mut ChaCha8Rng) -> EpcSample {
    let c: i64 = rng.random_range(2..=9);
    let inefficient = format!(
        "n = read_int()\ntotal = 0\nfor i in range(0, n):\n    total = total + i * {c}\nprint(total)\n"
    );
    let efficient = format!("n = read_int()\nprint({c} * (n * (n - 1) / 2))\n");
    let io_examples = (0..io_count(rng))
        .map(|_| {
            let n: i64 = rng.random_range(5..=60);
            let input = n.to_string();
            let output = expected_output(&efficient, &input);
            IoExample { input, output }
        })
        .collect();
    let description = match rng.random_range(0..2) {
        0 => format!(
            "read one integer n and output the sum of i times {c} over every i from 0 to n - 1"
        ),
        _ => format!("given an integer n , compute {c} times the sum of all integers below n"),
    };
    EpcSample {
        algorithm_tags: "math loops arithmetic".into(),
        problem_description: description,
        input_format: "a single integer n on one line".into(),
        output_format: "print one integer , the computed sum".into(),
        io_examples,
        inefficient_code: inefficient,
        efficient_codes: vec![efficient],
        difficulty: Difficulty::Easy,
        split: Split::Train,
        submission_index: 0,
    }
}

/// Linear scan per query vs building a map once.
fn search_template(rng: &mut ChaCha8Rng) -> EpcSample {
    let inefficient = "\
m = read_int()
keys = []
vals = []
for i in range(0, m):
    append(keys, read_int())
    append(vals, read_int())
q = read_int()
for j in range(0, q):
    t = read_int()
    for i in range(0, m):
        if keys[i] == t:
            print(vals[i])
"
    .to_string();
    let efficient = "\
m = read_int()
d = {}
for i in range(0, m):
    k = read_int()
    d[k] = read_int()
q = read_int()
for j in range(0, q):
    print(d[read_int()])
"
    .to_string();
    let io_examples = (0..io_count(rng))
        .map(|_| {
            let m: usize = rng.random_range(5..=14);
            let q: usize = rng.random_range(3..=8);
            // Distinct keys so scan and map agree on duplicates.
            let mut keys: Vec<i64> = Vec::new();
            while keys.len() < m {
                let k = rng.random_range(0..=99);
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            let vals: Vec<i64> = (0..m).map(|_| rng.random_range(0..=99)).collect();
            let queries: Vec<i64> = (0..q)
                .map(|_| keys[rng.random_range(0..m)])
                .collect();
            let mut input = format!("{m}\n");
            for (k, v) in keys.iter().zip(&vals) {
                input.push_str(&format!("{k} {v}\n"));
            }
            input.push_str(&format!("{q}\n"));
            input.push_str(
                &queries
                    .iter()
                    .map(i64::to_string)
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            let output = expected_output(&efficient, &input);
            IoExample { input, output }
        })
        .collect();
    let description = match rng.random_range(0..2) {
        0 => "store m key value pairs , then answer q lookup queries by printing the value \
              for each queried key"
            .to_string(),
        _ => "read a table of m pairs and q queries ; for every query print the matching value"
            .to_string(),
    };
    EpcSample {
        algorithm_tags: "data structures search lookup".into(),
        problem_description: description,
        input_format: "integer m , then m lines of key value pairs , then integer q , then q \
                       query keys"
            .into(),
        output_format: "for each query , print the value bound to the key".into(),
        io_examples,
        inefficient_code: inefficient,
        efficient_codes: vec![efficient],
        difficulty: Difficulty::Intermediate,
        split: Split::Train,
        submission_index: 0,
    }
}

/// Recursive accumulation vs an iterative loop.
fn recursion_template(rng: &mut ChaCha8Rng) -> EpcSample {
    let b: i64 = rng.random_range(0..=9);
    let inefficient = format!(
        "def f(x):\n    if x == 0:\n        return {b}\n    return x + f(x - 1)\nn = read_int()\nprint(f(n))\n"
    );
    let efficient = format!(
        "n = read_int()\nt = {b}\nfor i in range(0, n):\n    t = t + i + 1\nprint(t)\n"
    );
    let io_examples = (0..io_count(rng))
        .map(|_| {
            let n: i64 = rng.random_range(5..=40);
            let input = n.to_string();
            let output = expected_output(&efficient, &input);
            IoExample { input, output }
        })
        .collect();
    let description = match rng.random_range(0..2) {
        0 => format!(
            "compute {b} plus the sum of the integers from 1 to n , where n is read from input"
        ),
        _ => format!("starting from {b} , accumulate every integer up to and including n"),
    };
    EpcSample {
        algorithm_tags: "recursion accumulation".into(),
        problem_description: description,
        input_format: "a single integer n on one line".into(),
        output_format: "print one integer , the accumulated total".into(),
        io_examples,
        inefficient_code: inefficient,
        efficient_codes: vec![efficient],
        difficulty: Difficulty::Hard,
        split: Split::Train,
        submission_index: 0,
    }
}

/// Nested pair counting vs the closed form.
fn nested_loop_template(rng: &mut ChaCha8Rng) -> EpcSample {
    let c: i64 = rng.random_range(2..=9);
    let inefficient = format!(
        "n = read_int()\ncnt = 0\nfor i in range(0, n):\n    for j in range(0, i):\n        cnt = cnt + {c}\nprint(cnt)\n"
    );
    let efficient = format!("n = read_int()\nprint({c} * (n * (n - 1) / 2))\n");
    let io_examples = (0..io_count(rng))
        .map(|_| {
            let n: i64 = rng.random_range(5..=40);
            let input = n.to_string();
            let output = expected_output(&efficient, &input);
            IoExample { input, output }
        })
        .collect();
    let description = match rng.random_range(0..2) {
        0 => format!(
            "count {c} for every ordered pair i greater than j drawn from 0 to n - 1 and print \
             the total"
        ),
        _ => format!("multiply the number of index pairs below n by {c}"),
    };
    EpcSample {
        algorithm_tags: "math nested loops counting".into(),
        problem_description: description,
        input_format: "a single integer n on one line".into(),
        output_format: "print one integer , the weighted pair count".into(),
        io_examples,
        inefficient_code: inefficient,
        efficient_codes: vec![efficient],
        difficulty: Difficulty::Hard,
        split: Split::Train,
        submission_index: 0,
    }
}
