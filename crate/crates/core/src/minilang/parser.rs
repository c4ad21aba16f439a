//! Recursive-descent parser. Parse success is the definition of
//! "compilable" for the compilation-rate metric.

use thiserror::Error;

use super::ast::{BinOp, Expr, FuncDef, Program, Stmt, Target};
use super::token::Token;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at offset {offset}: found {found:?}, expected {}", expected.join(" | "))]
pub struct ParseError {
    pub offset: usize,
    pub found: String,
    pub expected: Vec<&'static str>,
}

pub fn parse(tokens: &[Token]) -> Result<Program, ParseError> {
    let mut p = Parser { tokens, pos: 0 };
    let mut program = Program::empty();
    while !p.at_end() {
        if p.peek_text() == "def" {
            program.funcs.push(p.func_def()?);
        } else {
            program.main.push(p.statement()?);
        }
    }
    Ok(program)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_text(&self) -> &str {
        self.peek().map_or("", |t| t.text.as_str())
    }

    fn peek2_text(&self) -> &str {
        self.tokens.get(self.pos + 1).map_or("", |t| t.text.as_str())
    }

    fn err(&self, expected: Vec<&'static str>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError {
                offset: t.offset,
                found: printable(&t.text),
                expected,
            },
            None => ParseError {
                offset: self.tokens.last().map_or(0, |t| t.offset + t.text.len()),
                found: "end of input".into(),
                expected,
            },
        }
    }

    fn expect(&mut self, text: &'static str) -> Result<(), ParseError> {
        if self.peek_text() == text {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(vec![text]))
        }
    }

    /// Newline, or end of input (the last line may be unterminated).
    fn end_of_line(&mut self) -> Result<(), ParseError> {
        if self.at_end() {
            return Ok(());
        }
        if self.peek().is_some_and(Token::is_newline) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(vec!["newline"]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(t) if t.kind == super::token::TokenKind::Ident => {
                let name = t.text.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => Err(self.err(vec!["identifier"])),
        }
    }

    fn func_def(&mut self) -> Result<FuncDef, ParseError> {
        self.expect("def")?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut params = Vec::new();
        if self.peek_text() != ")" {
            loop {
                params.push(self.ident()?);
                if self.peek_text() == "," {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body = self.suite()?;
        Ok(FuncDef { name, params, body })
    }

    /// `: <simple stmt>` on one line, or `:` newline indent block dedent.
    fn suite(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(":")?;
        if self.peek().is_some_and(Token::is_newline) {
            self.pos += 1;
            if !self.peek().is_some_and(Token::is_indent) {
                return Err(self.err(vec!["indented block"]));
            }
            self.pos += 1;
            let mut body = Vec::new();
            loop {
                if self.at_end() {
                    break; // end of input closes all open blocks
                }
                if self.peek().is_some_and(Token::is_dedent) {
                    self.pos += 1;
                    break;
                }
                body.push(self.statement()?);
            }
            Ok(body)
        } else {
            // Inline suite: a single simple statement.
            let stmt = self.simple_statement()?;
            self.end_of_line()?;
            Ok(vec![stmt])
        }
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        match self.peek_text() {
            "for" => self.for_statement(),
            "while" => {
                self.pos += 1;
                let cond = self.expr()?;
                let body = self.suite()?;
                Ok(Stmt::While { cond, body })
            }
            "if" => {
                self.pos += 1;
                let cond = self.expr()?;
                let then_body = self.suite()?;
                let else_body = if self.peek_text() == "else" {
                    self.pos += 1;
                    self.suite()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then_body, else_body })
            }
            "def" => Err(self.err(vec!["statement"])),
            _ => {
                let stmt = self.simple_statement()?;
                self.end_of_line()?;
                Ok(stmt)
            }
        }
    }

    fn for_statement(&mut self) -> Result<Stmt, ParseError> {
        self.expect("for")?;
        let var = self.ident()?;
        self.expect("in")?;
        self.expect("range")?;
        self.expect("(")?;
        let start = self.expr()?;
        self.expect(",")?;
        let end = self.expr()?;
        self.expect(")")?;
        let body = self.suite()?;
        Ok(Stmt::For { var, start, end, body })
    }

    fn simple_statement(&mut self) -> Result<Stmt, ParseError> {
        match self.peek_text() {
            "return" => {
                self.pos += 1;
                if self.at_end() || self.peek().is_some_and(Token::is_newline) {
                    Ok(Stmt::Return(None))
                } else {
                    Ok(Stmt::Return(Some(self.expr()?)))
                }
            }
            "print" => {
                self.pos += 1;
                self.expect("(")?;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(Stmt::Print(e))
            }
            _ => {
                // Assignment targets are an identifier or identifier[index];
                // everything else is an expression statement.
                if self.peek().map(|t| t.kind) == Some(super::token::TokenKind::Ident) {
                    if self.peek2_text() == "=" {
                        let name = self.ident()?;
                        self.pos += 1; // '='
                        let value = self.expr()?;
                        return Ok(Stmt::Assign { target: Target::Var(name), value });
                    }
                    if self.peek2_text() == "[" {
                        let save = self.pos;
                        let name = self.ident()?;
                        self.pos += 1; // '['
                        let index = self.expr()?;
                        self.expect("]")?;
                        if self.peek_text() == "=" {
                            self.pos += 1;
                            let value = self.expr()?;
                            return Ok(Stmt::Assign {
                                target: Target::Index { base: name, index },
                                value,
                            });
                        }
                        self.pos = save; // plain expression after all
                    }
                }
                Ok(Stmt::Expr(self.expr()?))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.sum()?;
        let op = match self.peek_text() {
            "==" => Some(BinOp::Eq),
            "!=" => Some(BinOp::Ne),
            "<" => Some(BinOp::Lt),
            ">" => Some(BinOp::Gt),
            "<=" => Some(BinOp::Le),
            ">=" => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let rhs = self.sum()?;
            Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
        } else {
            Ok(lhs)
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_text() {
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_text() {
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                "%" => BinOp::Mod,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_text() == "-" {
            self.pos += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.postfix()
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        while self.peek_text() == "[" {
            self.pos += 1;
            let index = self.expr()?;
            self.expect("]")?;
            e = Expr::Index { base: Box::new(e), index: Box::new(index) };
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.err(vec!["expression"]));
        };
        match (tok.kind, tok.text.as_str()) {
            (super::token::TokenKind::Int, text) => {
                let value: i64 = text.parse().map_err(|_| ParseError {
                    offset: tok.offset,
                    found: printable(text),
                    expected: vec!["integer literal"],
                })?;
                self.pos += 1;
                Ok(Expr::Int(value))
            }
            (super::token::TokenKind::Ident, _) => {
                let name = self.ident()?;
                if self.peek_text() == "(" {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek_text() != ")" {
                        loop {
                            args.push(self.expr()?);
                            if self.peek_text() == "," {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    Ok(Expr::Call { name, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            (_, "(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            (_, "[") => {
                self.pos += 1;
                self.expect("]")?;
                Ok(Expr::ListLit)
            }
            (_, "{") => {
                self.pos += 1;
                self.expect("}")?;
                Ok(Expr::MapLit)
            }
            (_, "len") => {
                self.pos += 1;
                self.expect("(")?;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(Expr::Len(Box::new(e)))
            }
            (_, "append") => {
                self.pos += 1;
                self.expect("(")?;
                let list = self.expr()?;
                self.expect(",")?;
                let value = self.expr()?;
                self.expect(")")?;
                Ok(Expr::Append { list: Box::new(list), value: Box::new(value) })
            }
            (_, "read_int") => {
                self.pos += 1;
                self.expect("(")?;
                self.expect(")")?;
                Ok(Expr::ReadInt)
            }
            _ => Err(self.err(vec!["expression"])),
        }
    }
}

fn printable(text: &str) -> String {
    match text {
        "\n" => "newline".into(),
        super::token::INDENT_TEXT => "indent".into(),
        super::token::DEDENT_TEXT => "dedent".into(),
        other => other.into(),
    }
}
