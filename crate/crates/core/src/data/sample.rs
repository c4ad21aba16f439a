//! EPC task samples and their invariants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{self, cost, ExecStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Intermediate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [
        Difficulty::Easy,
        Difficulty::Intermediate,
        Difficulty::Hard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Intermediate => "intermediate",
            Difficulty::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoExample {
    pub input: String,
    pub output: String,
}

/// One task: five natural-language parts, I/O tests, a correct-but-slow
/// program, and at least one faster reference solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpcSample {
    pub algorithm_tags: String,
    pub problem_description: String,
    pub input_format: String,
    pub output_format: String,
    pub io_examples: Vec<IoExample>,
    pub inefficient_code: String,
    pub efficient_codes: Vec<String>,
    pub difficulty: Difficulty,
    pub split: Split,
    /// Monotone counter driving the time-based dataset split.
    pub submission_index: u64,
}

/// The five NL parts in fixed order: tags, description, input format,
/// output format, I/O samples (rendered as text). A pure field projection.
pub fn split_nl(sample: &EpcSample) -> [String; 5] {
    [
        sample.algorithm_tags.clone(),
        sample.problem_description.clone(),
        sample.input_format.clone(),
        sample.output_format.clone(),
        render_io_examples(&sample.io_examples),
    ]
}

/// Separator between parts when the description is materialized as one text.
pub const NL_PART_SEP: &str = " <sep> ";

/// Full NL description: the five parts joined by [`NL_PART_SEP`].
/// `split_nl` inverts this by construction.
pub fn full_nl(sample: &EpcSample) -> String {
    split_nl(sample).join(NL_PART_SEP)
}

pub fn render_io_examples(examples: &[IoExample]) -> String {
    examples
        .iter()
        .map(|ex| {
            format!(
                "input : {} output : {}",
                ex.input.split_whitespace().collect::<Vec<_>>().join(" "),
                ex.output.split_whitespace().collect::<Vec<_>>().join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join(" ; ")
}

/// Output comparison for I/O tests: trailing whitespace per line and
/// trailing blank lines are insignificant.
pub fn outputs_match(actual: &str, expected: &str) -> bool {
    normalized_lines(actual) == normalized_lines(expected)
}

fn normalized_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = text.lines().map(|l| l.trim_end().to_string()).collect();
    while lines.last().is_some_and(String::is_empty) {
        lines.pop();
    }
    lines
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("sample has no I/O examples")]
    NoIoExamples,
    #[error("sample has no efficient codes")]
    NoEfficientCodes,
    #[error("{which} does not parse: {msg}")]
    Unparseable { which: String, msg: String },
    #[error("{which} fails I/O example {index}: {msg}")]
    IoFailure {
        which: String,
        index: usize,
        msg: String,
    },
    #[error("no efficient code beats the inefficient one on I/O example {index} ({fast} >= {slow})")]
    NoEfficiencyGap { index: usize, fast: u64, slow: u64 },
}

/// Checks every sample invariant by running the programs: all codes pass
/// all I/O examples, and the best efficient cost is strictly below the
/// inefficient cost on every input.
pub fn validate_sample(sample: &EpcSample) -> Result<(), SampleError> {
    if sample.io_examples.is_empty() {
        return Err(SampleError::NoIoExamples);
    }
    if sample.efficient_codes.is_empty() {
        return Err(SampleError::NoEfficientCodes);
    }
    let slow = parse_named(&sample.inefficient_code, "inefficient code")?;
    let fasts: Vec<_> = sample
        .efficient_codes
        .iter()
        .enumerate()
        .map(|(i, src)| parse_named(src, &format!("efficient code {i}")))
        .collect::<Result<_, _>>()?;

    for (index, ex) in sample.io_examples.iter().enumerate() {
        let slow_out = check_run(&slow, ex, index, "inefficient code")?;
        let mut best_fast = u64::MAX;
        for (i, fast) in fasts.iter().enumerate() {
            let out = check_run(fast, ex, index, &format!("efficient code {i}"))?;
            best_fast = best_fast.min(out.cost);
        }
        if best_fast >= slow_out.cost {
            return Err(SampleError::NoEfficiencyGap {
                index,
                fast: best_fast,
                slow: slow_out.cost,
            });
        }
    }
    Ok(())
}

fn parse_named(source: &str, which: &str) -> Result<minilang::Program, SampleError> {
    minilang::parse_source(source).map_err(|e| SampleError::Unparseable {
        which: which.to_string(),
        msg: e.to_string(),
    })
}

fn check_run(
    program: &minilang::Program,
    ex: &IoExample,
    index: usize,
    which: &str,
) -> Result<minilang::ExecOutcome, SampleError> {
    let out = minilang::execute(program, &ex.input, cost::DEFAULT_FUEL);
    if out.status != ExecStatus::Ok {
        return Err(SampleError::IoFailure {
            which: which.to_string(),
            index,
            msg: out
                .detail
                .unwrap_or_else(|| format!("{:?}", out.status)),
        });
    }
    if !outputs_match(&out.output, &ex.output) {
        return Err(SampleError::IoFailure {
            which: which.to_string(),
            index,
            msg: format!("expected {:?}, got {:?}", ex.output, out.output),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_arity_five_and_lossless() {
        let sample = EpcSample {
            algorithm_tags: "math".into(),
            problem_description: "sum things".into(),
            input_format: "one integer".into(),
            output_format: "one integer".into(),
            io_examples: vec![IoExample { input: "3".into(), output: "3".into() }],
            inefficient_code: "print(read_int())".into(),
            efficient_codes: vec!["print(read_int())".into()],
            difficulty: Difficulty::Easy,
            split: Split::Train,
            submission_index: 0,
        };
        let parts = split_nl(&sample);
        assert_eq!(parts.len(), 5);
        assert_eq!(full_nl(&sample), parts.join(NL_PART_SEP));
        // Empty field still occupies its slot.
        let mut empty_tags = sample.clone();
        empty_tags.algorithm_tags.clear();
        assert_eq!(split_nl(&empty_tags)[0], "");
    }

    #[test]
    fn output_comparison_ignores_trailing_whitespace() {
        assert!(outputs_match("42 \n7\n\n", "42\n7"));
        assert!(!outputs_match("42\n7", "42\n8"));
    }
}
