//! A deterministic integer mini-language: lexer, parser, canonical printer,
//! tree-walking interpreter with an exact cost model, and the program
//! transformations the runtime-prediction datasets are built from.
//!
//! The language is newline-separated statements with four-space indented
//! blocks. Grammar (EBNF; `docs/grammar.md` carries the same text):
//!
//! ```text
//! program       = { funcdef | statement } ;
//! funcdef       = "def" IDENT "(" [ IDENT { "," IDENT } ] ")" suite ;
//! suite         = ":" simple-stmt NEWLINE
//!               | ":" NEWLINE INDENT { statement } DEDENT ;
//! statement     = simple-stmt NEWLINE | for-stmt | while-stmt | if-stmt ;
//! simple-stmt   = assignment | "return" [ expr ] | "print" "(" expr ")" | expr ;
//! assignment    = ( IDENT | IDENT "[" expr "]" ) "=" expr ;
//! for-stmt      = "for" IDENT "in" "range" "(" expr "," expr ")" suite ;
//! while-stmt    = "while" expr suite ;
//! if-stmt       = "if" expr suite [ "else" suite ] ;
//! expr          = sum [ ( "==" | "!=" | "<" | ">" | "<=" | ">=" ) sum ] ;
//! sum           = term { ( "+" | "-" ) term } ;
//! term          = unary { ( "*" | "/" | "%" ) unary } ;
//! unary         = "-" unary | postfix ;
//! postfix       = atom { "[" expr "]" } ;
//! atom          = INT | IDENT | IDENT "(" [ expr { "," expr } ] ")"
//!               | "(" expr ")" | "[" "]" | "{" "}"
//!               | "len" "(" expr ")" | "append" "(" expr "," expr ")"
//!               | "read_int" "(" ")" ;
//! ```
//!
//! Values are 64-bit integers, integer lists, and integer-keyed integer
//! maps. `/` and `%` floor like Python. `read_int()` consumes the next
//! whitespace-separated integer from the run input. Execution cost is a
//! deterministic charge count (see [`cost`]), standing in for wall-clock
//! running time; a wall-clock mode exists for comparison but nothing in the
//! pipeline depends on it.

pub mod ast;
pub mod cost;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod token;
pub mod transform;

use thiserror::Error;

pub use ast::{validate, BinOp, Expr, FuncDef, Program, Stmt, Target};
pub use interp::{execute, ExecOutcome, ExecStatus};
pub use lexer::{lex, LexError};
pub use parser::{parse, ParseError};
pub use printer::print_program;
pub use token::{render_tokens, Token, TokenKind};
pub use transform::{extract_loops_recursion, random_token_delete, rename_uniform};

/// Lexing or parsing failure; parse success defines "compilable".
#[derive(Debug, Error, PartialEq)]
pub enum LangError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Lex and parse in one step.
pub fn parse_source(source: &str) -> Result<Program, LangError> {
    Ok(parse(&lex(source)?)?)
}

/// Canonical form of a source text: tokens re-joined with canonical
/// spacing. Errors if the text does not lex.
pub fn canonical(source: &str) -> Result<String, LexError> {
    Ok(render_tokens(&lex(source)?))
}

/// Parses and executes source, folding front-end failures into the outcome.
pub fn run_source(source: &str, input: &str, fuel: u64) -> ExecOutcome {
    match parse_source(source) {
        Ok(program) => execute(&program, input, fuel),
        Err(e) => ExecOutcome {
            status: ExecStatus::ParseError,
            output: String::new(),
            cost: 0,
            detail: Some(e.to_string()),
        },
    }
}

/// Median-of-11 wall-clock measurement of a run, in microseconds. Noisy and
/// machine-dependent by nature; reported for curiosity only.
pub fn measure_wall_micros(program: &Program, input: &str, fuel: u64) -> f64 {
    let mut times: Vec<f64> = (0..11)
        .map(|_| {
            let t0 = std::time::Instant::now();
            let _ = execute(program, input, fuel);
            t0.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    times[5]
}
