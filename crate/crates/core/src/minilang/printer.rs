//! Canonical source printer. Function definitions come first, statements
//! are one per line with four-space indentation, and tokens within a line
//! are separated by single spaces. `parse(lex(print(ast)))` is structurally
//! equal to `ast`.

use std::fmt::Write;

use super::ast::{BinOp, Expr, FuncDef, Program, Stmt, Target};

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for f in &program.funcs {
        print_func(&mut out, f);
    }
    print_block(&mut out, &program.main, 0);
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_func(out: &mut String, f: &FuncDef) {
    let _ = write!(out, "def {} (", f.name);
    for (i, p) in f.params.iter().enumerate() {
        if i > 0 {
            out.push_str(" ,");
        }
        let _ = write!(out, " {p}");
    }
    out.push_str(" ) :\n");
    print_block(out, &f.body, 1);
}

fn print_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for stmt in stmts {
        print_stmt(out, stmt, depth);
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match stmt {
        Stmt::Assign { target, value } => {
            match target {
                Target::Var(name) => {
                    let _ = write!(out, "{name} = {}", expr_str(value));
                }
                Target::Index { base, index } => {
                    let _ = write!(out, "{base} [ {} ] = {}", expr_str(index), expr_str(value));
                }
            }
            out.push('\n');
        }
        Stmt::For { var, start, end, body } => {
            let _ = write!(
                out,
                "for {var} in range ( {} , {} ) :\n",
                expr_str(start),
                expr_str(end)
            );
            print_block(out, body, depth + 1);
        }
        Stmt::While { cond, body } => {
            let _ = write!(out, "while {} :\n", expr_str(cond));
            print_block(out, body, depth + 1);
        }
        Stmt::If { cond, then_body, else_body } => {
            let _ = write!(out, "if {} :\n", expr_str(cond));
            print_block(out, then_body, depth + 1);
            if !else_body.is_empty() {
                indent(out, depth);
                out.push_str("else :\n");
                print_block(out, else_body, depth + 1);
            }
        }
        Stmt::Return(value) => {
            match value {
                Some(v) => {
                    let _ = write!(out, "return {}", expr_str(v));
                }
                None => out.push_str("return"),
            }
            out.push('\n');
        }
        Stmt::Print(e) => {
            let _ = write!(out, "print ( {} )", expr_str(e));
            out.push('\n');
        }
        Stmt::Expr(e) => {
            let _ = write!(out, "{}", expr_str(e));
            out.push('\n');
        }
    }
}

/// Precedence levels: comparison 1, additive 2, multiplicative 3, unary 4,
/// postfix/atoms 5.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 3,
        },
        Expr::Neg(_) => 4,
        _ => 5,
    }
}

fn expr_str(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Var(name) => name.clone(),
        Expr::Neg(inner) => format!("- {}", child(inner, 4)),
        Expr::Binary { op, lhs, rhs } => {
            let prec = precedence(e);
            // Left-associative chain: the right child needs parens at equal
            // precedence, the left child only below it. Comparisons do not
            // chain at all, so both sides get parens at equal precedence.
            let left = if prec == 1 {
                child_strict(lhs, prec)
            } else {
                child(lhs, prec)
            };
            format!("{} {} {}", left, op.symbol(), child_strict(rhs, prec))
        }
        Expr::Call { name, args } => {
            let inner = args.iter().map(expr_str).collect::<Vec<_>>().join(" , ");
            if args.is_empty() {
                format!("{name} ( )")
            } else {
                format!("{name} ( {inner} )")
            }
        }
        Expr::Index { base, index } => format!("{} [ {} ]", child(base, 5), expr_str(index)),
        Expr::Len(inner) => format!("len ( {} )", expr_str(inner)),
        Expr::Append { list, value } => {
            format!("append ( {} , {} )", expr_str(list), expr_str(value))
        }
        Expr::ReadInt => "read_int ( )".to_string(),
        Expr::ListLit => "[ ]".to_string(),
        Expr::MapLit => "{ }".to_string(),
    }
}

fn child(e: &Expr, parent_prec: u8) -> String {
    if precedence(e) < parent_prec {
        format!("( {} )", expr_str(e))
    } else {
        expr_str(e)
    }
}

fn child_strict(e: &Expr, parent_prec: u8) -> String {
    if precedence(e) <= parent_prec {
        format!("( {} )", expr_str(e))
    } else {
        expr_str(e)
    }
}
