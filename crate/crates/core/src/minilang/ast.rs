//! Abstract syntax tree and static validation.

use std::collections::{HashMap, HashSet};

/// Whole program: function definitions (hoisted, in definition order) plus
/// the main statement block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub funcs: Vec<FuncDef>,
    pub main: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { target: Target, value: Expr },
    For { var: String, start: Expr, end: Expr, body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    Return(Option<Expr>),
    Print(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Var(String),
    /// `base[index] = value`: list element write or map insert.
    Index { base: String, index: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { name: String, args: Vec<Expr> },
    /// `base[index]`: list read or map lookup, decided at runtime.
    Index { base: Box<Expr>, index: Box<Expr> },
    Len(Box<Expr>),
    Append { list: Box<Expr>, value: Box<Expr> },
    ReadInt,
    ListLit,
    MapLit,
}

impl Program {
    pub fn empty() -> Self {
        Self {
            funcs: Vec::new(),
            main: Vec::new(),
        }
    }

    pub fn func(&self, name: &str) -> Option<&FuncDef> {
        self.funcs.iter().find(|f| f.name == name)
    }
}

/// Static checks behind the corpus invariant: every referenced variable is
/// previously assigned (or a parameter, or a loop variable) and every called
/// function is defined with matching arity. Branch assignments count from
/// either arm; runtime catches what a lexical walk cannot.
pub fn validate(program: &Program) -> Result<(), String> {
    let mut arity: HashMap<&str, usize> = HashMap::new();
    for f in &program.funcs {
        if arity.insert(&f.name, f.params.len()).is_some() {
            return Err(format!("function {} defined twice", f.name));
        }
    }
    for f in &program.funcs {
        let mut defined: HashSet<String> = f.params.iter().cloned().collect();
        let mut param_check: HashSet<&str> = HashSet::new();
        for p in &f.params {
            if !param_check.insert(p) {
                return Err(format!("function {} repeats parameter {}", f.name, p));
            }
        }
        validate_block(&f.body, &mut defined, &arity)
            .map_err(|e| format!("in function {}: {e}", f.name))?;
    }
    let mut defined = HashSet::new();
    validate_block(&program.main, &mut defined, &arity)
}

fn validate_block(
    stmts: &[Stmt],
    defined: &mut HashSet<String>,
    arity: &HashMap<&str, usize>,
) -> Result<(), String> {
    for stmt in stmts {
        match stmt {
            Stmt::Assign { target, value } => {
                validate_expr(value, defined, arity)?;
                match target {
                    Target::Var(name) => {
                        defined.insert(name.clone());
                    }
                    Target::Index { base, index } => {
                        if !defined.contains(base) {
                            return Err(format!("variable {base} used before assignment"));
                        }
                        validate_expr(index, defined, arity)?;
                    }
                }
            }
            Stmt::For { var, start, end, body } => {
                validate_expr(start, defined, arity)?;
                validate_expr(end, defined, arity)?;
                defined.insert(var.clone());
                validate_block(body, defined, arity)?;
            }
            Stmt::While { cond, body } => {
                validate_expr(cond, defined, arity)?;
                validate_block(body, defined, arity)?;
            }
            Stmt::If { cond, then_body, else_body } => {
                validate_expr(cond, defined, arity)?;
                validate_block(then_body, defined, arity)?;
                validate_block(else_body, defined, arity)?;
            }
            Stmt::Return(value) => {
                if let Some(v) = value {
                    validate_expr(v, defined, arity)?;
                }
            }
            Stmt::Print(e) | Stmt::Expr(e) => validate_expr(e, defined, arity)?,
        }
    }
    Ok(())
}

fn validate_expr(
    expr: &Expr,
    defined: &HashSet<String>,
    arity: &HashMap<&str, usize>,
) -> Result<(), String> {
    match expr {
        Expr::Int(_) | Expr::ReadInt | Expr::ListLit | Expr::MapLit => Ok(()),
        Expr::Var(name) => {
            if defined.contains(name) {
                Ok(())
            } else {
                Err(format!("variable {name} used before assignment"))
            }
        }
        Expr::Neg(e) | Expr::Len(e) => validate_expr(e, defined, arity),
        Expr::Binary { lhs, rhs, .. } => {
            validate_expr(lhs, defined, arity)?;
            validate_expr(rhs, defined, arity)
        }
        Expr::Index { base, index } => {
            validate_expr(base, defined, arity)?;
            validate_expr(index, defined, arity)
        }
        Expr::Append { list, value } => {
            validate_expr(list, defined, arity)?;
            validate_expr(value, defined, arity)
        }
        Expr::Call { name, args } => {
            match arity.get(name.as_str()) {
                None => return Err(format!("call to undefined function {name}")),
                Some(&n) if n != args.len() => {
                    return Err(format!(
                        "function {name} takes {n} arguments, got {}",
                        args.len()
                    ))
                }
                Some(_) => {}
            }
            for a in args {
                validate_expr(a, defined, arity)?;
            }
            Ok(())
        }
    }
}
