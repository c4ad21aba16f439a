//! Program transformations backing the dataset variants: uniform renaming,
//! loop/recursion extraction, and random token deletion.

use std::collections::{HashMap, HashSet};

use rand::seq::index;

use super::ast::{Expr, FuncDef, Program, Stmt, Target};
use super::token::Token;
use crate::seeding::rng_from;

// ---------------------------------------------------------------------------
// Uniform renaming
// ---------------------------------------------------------------------------

/// Renames variables to `var1, var2, ...` and functions to `func1, func2,
/// ...` in first-occurrence order over the canonical walk (definitions
/// first, then main). The rename map is injective, so semantics, output and
/// cost are preserved exactly.
pub fn rename_uniform(program: &Program) -> Program {
    let mut names = NameCollector::default();
    for f in &program.funcs {
        names.func(&f.name);
        for p in &f.params {
            names.var(p);
        }
        names.block(&f.body);
    }
    names.block(&program.main);

    let funcs = program
        .funcs
        .iter()
        .map(|f| FuncDef {
            name: names.funcs[&f.name].clone(),
            params: f.params.iter().map(|p| names.vars[p].clone()).collect(),
            body: f.body.iter().map(|s| names.apply_stmt(s)).collect(),
        })
        .collect();
    let main = program.main.iter().map(|s| names.apply_stmt(s)).collect();
    Program { funcs, main }
}

#[derive(Default)]
struct NameCollector {
    vars: HashMap<String, String>,
    funcs: HashMap<String, String>,
}

impl NameCollector {
    fn var(&mut self, name: &str) {
        if !self.vars.contains_key(name) {
            let fresh = format!("var{}", self.vars.len() + 1);
            self.vars.insert(name.to_string(), fresh);
        }
    }

    fn func(&mut self, name: &str) {
        if !self.funcs.contains_key(name) {
            let fresh = format!("func{}", self.funcs.len() + 1);
            self.funcs.insert(name.to_string(), fresh);
        }
    }

    fn block(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Assign { target, value } => {
                match target {
                    Target::Var(name) => self.var(name),
                    Target::Index { base, index } => {
                        self.var(base);
                        self.expr(index);
                    }
                }
                self.expr(value);
            }
            Stmt::For { var, start, end, body } => {
                self.var(var);
                self.expr(start);
                self.expr(end);
                self.block(body);
            }
            Stmt::While { cond, body } => {
                self.expr(cond);
                self.block(body);
            }
            Stmt::If { cond, then_body, else_body } => {
                self.expr(cond);
                self.block(then_body);
                self.block(else_body);
            }
            Stmt::Return(Some(e)) | Stmt::Print(e) | Stmt::Expr(e) => self.expr(e),
            Stmt::Return(None) => {}
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Int(_) | Expr::ReadInt | Expr::ListLit | Expr::MapLit => {}
            Expr::Var(name) => self.var(name),
            Expr::Neg(inner) | Expr::Len(inner) => self.expr(inner),
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            Expr::Call { name, args } => {
                self.func(name);
                for a in args {
                    self.expr(a);
                }
            }
            Expr::Index { base, index } => {
                self.expr(base);
                self.expr(index);
            }
            Expr::Append { list, value } => {
                self.expr(list);
                self.expr(value);
            }
        }
    }

    fn apply_stmt(&self, stmt: &Stmt) -> Stmt {
        match stmt {
            Stmt::Assign { target, value } => Stmt::Assign {
                target: match target {
                    Target::Var(name) => Target::Var(self.vars[name].clone()),
                    Target::Index { base, index } => Target::Index {
                        base: self.vars[base].clone(),
                        index: self.apply_expr(index),
                    },
                },
                value: self.apply_expr(value),
            },
            Stmt::For { var, start, end, body } => Stmt::For {
                var: self.vars[var].clone(),
                start: self.apply_expr(start),
                end: self.apply_expr(end),
                body: body.iter().map(|s| self.apply_stmt(s)).collect(),
            },
            Stmt::While { cond, body } => Stmt::While {
                cond: self.apply_expr(cond),
                body: body.iter().map(|s| self.apply_stmt(s)).collect(),
            },
            Stmt::If { cond, then_body, else_body } => Stmt::If {
                cond: self.apply_expr(cond),
                then_body: then_body.iter().map(|s| self.apply_stmt(s)).collect(),
                else_body: else_body.iter().map(|s| self.apply_stmt(s)).collect(),
            },
            Stmt::Return(v) => Stmt::Return(v.as_ref().map(|e| self.apply_expr(e))),
            Stmt::Print(e) => Stmt::Print(self.apply_expr(e)),
            Stmt::Expr(e) => Stmt::Expr(self.apply_expr(e)),
        }
    }

    fn apply_expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Int(v) => Expr::Int(*v),
            Expr::Var(name) => Expr::Var(self.vars[name].clone()),
            Expr::Neg(inner) => Expr::Neg(Box::new(self.apply_expr(inner))),
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op: *op,
                lhs: Box::new(self.apply_expr(lhs)),
                rhs: Box::new(self.apply_expr(rhs)),
            },
            Expr::Call { name, args } => Expr::Call {
                name: self.funcs[name].clone(),
                args: args.iter().map(|a| self.apply_expr(a)).collect(),
            },
            Expr::Index { base, index } => Expr::Index {
                base: Box::new(self.apply_expr(base)),
                index: Box::new(self.apply_expr(index)),
            },
            Expr::Len(inner) => Expr::Len(Box::new(self.apply_expr(inner))),
            Expr::Append { list, value } => Expr::Append {
                list: Box::new(self.apply_expr(list)),
                value: Box::new(self.apply_expr(value)),
            },
            Expr::ReadInt => Expr::ReadInt,
            Expr::ListLit => Expr::ListLit,
            Expr::MapLit => Expr::MapLit,
        }
    }
}

// ---------------------------------------------------------------------------
// Loop & recursion extraction
// ---------------------------------------------------------------------------

/// Keeps the time-relevant skeleton of a program:
///
/// - function definitions that are recursive (reach themselves in the call
///   graph), transitively contain a loop, or are called by anything kept —
///   closed over their callees so kept bodies stay resolvable;
/// - top-level `for`/`while` statements, bodies intact;
/// - top-level assignments and expression statements that invoke a kept
///   function;
/// - the assignments feeding variables those kept statements reference
///   (a backward dependency closure, so loop bounds and conditions still
///   evaluate).
///
/// Everything else — prints, ifs, unrelated straight-line code — is
/// dropped. The result always re-parses; it is a degradation variant, not
/// a semantics-preserving transform.
pub fn extract_loops_recursion(program: &Program) -> Program {
    let graph = CallGraph::build(program);
    let mut seed: HashSet<&str> = HashSet::new();
    for f in &program.funcs {
        if graph.recursive(&f.name) || graph.loopy(&f.name) {
            seed.insert(&f.name);
        }
    }

    let callable = graph.successor_closure(&seed);
    let mut keep = vec![false; program.main.len()];
    for (i, stmt) in program.main.iter().enumerate() {
        match stmt {
            Stmt::For { .. } | Stmt::While { .. } => keep[i] = true,
            Stmt::Assign { .. } | Stmt::Expr(_) => {
                let mut calls = HashSet::new();
                collect_calls_stmt(stmt, &mut calls);
                if calls.iter().any(|c| callable.contains(c.as_str())) {
                    keep[i] = true;
                }
            }
            _ => {}
        }
    }

    // Backward pass: pull in assignments that kept statements depend on.
    let mut needed: HashSet<String> = HashSet::new();
    for i in (0..program.main.len()).rev() {
        let stmt = &program.main[i];
        if keep[i] {
            free_vars_stmt(stmt, &mut needed);
            continue;
        }
        if let Stmt::Assign { target, .. } = stmt {
            let base = match target {
                Target::Var(name) => name,
                Target::Index { base, .. } => base,
            };
            if needed.contains(base) {
                keep[i] = true;
                free_vars_stmt(stmt, &mut needed);
            }
        }
    }

    // Functions: the seed, everything called from kept statements, and the
    // callee closure of both.
    let mut wanted: HashSet<&str> = seed.clone();
    let mut called = HashSet::new();
    for (i, stmt) in program.main.iter().enumerate() {
        if keep[i] {
            collect_calls_stmt(stmt, &mut called);
        }
    }
    for name in &called {
        if let Some(f) = program.func(name) {
            wanted.insert(&f.name);
        }
    }
    let wanted = graph.successor_closure(&wanted);

    Program {
        funcs: program
            .funcs
            .iter()
            .filter(|f| wanted.contains(f.name.as_str()))
            .cloned()
            .collect(),
        main: program
            .main
            .iter()
            .zip(&keep)
            .filter_map(|(s, &k)| k.then(|| s.clone()))
            .collect(),
    }
}

struct CallGraph<'p> {
    edges: HashMap<&'p str, HashSet<String>>,
    has_loop: HashMap<&'p str, bool>,
}

impl<'p> CallGraph<'p> {
    fn build(program: &'p Program) -> Self {
        let mut edges = HashMap::new();
        let mut has_loop = HashMap::new();
        for f in &program.funcs {
            let mut calls = HashSet::new();
            for s in &f.body {
                collect_calls_stmt(s, &mut calls);
            }
            edges.insert(f.name.as_str(), calls);
            has_loop.insert(f.name.as_str(), block_has_loop(&f.body));
        }
        Self { edges, has_loop }
    }

    fn reachable_from(&self, start: &str) -> HashSet<String> {
        let mut seen = HashSet::new();
        let mut stack: Vec<String> = self
            .edges
            .get(start)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        while let Some(name) = stack.pop() {
            if seen.insert(name.clone()) {
                if let Some(next) = self.edges.get(name.as_str()) {
                    stack.extend(next.iter().cloned());
                }
            }
        }
        seen
    }

    /// True when `name` participates in a call cycle (self or mutual).
    fn recursive(&self, name: &str) -> bool {
        self.reachable_from(name).contains(name)
    }

    /// True when the body, or any transitively-called body, contains a loop.
    fn loopy(&self, name: &str) -> bool {
        if self.has_loop.get(name).copied().unwrap_or(false) {
            return true;
        }
        self.reachable_from(name)
            .iter()
            .any(|g| self.has_loop.get(g.as_str()).copied().unwrap_or(false))
    }

    fn successor_closure(&self, seed: &HashSet<&str>) -> HashSet<String> {
        let mut out: HashSet<String> = seed.iter().map(|s| s.to_string()).collect();
        for s in seed {
            out.extend(self.reachable_from(s));
        }
        out
    }
}

fn block_has_loop(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::For { .. } | Stmt::While { .. } => true,
        Stmt::If { then_body, else_body, .. } => {
            block_has_loop(then_body) || block_has_loop(else_body)
        }
        _ => false,
    })
}

fn collect_calls_stmt(stmt: &Stmt, out: &mut HashSet<String>) {
    visit_exprs(stmt, &mut |e| {
        if let Expr::Call { name, .. } = e {
            out.insert(name.clone());
        }
    });
}

fn free_vars_stmt(stmt: &Stmt, out: &mut HashSet<String>) {
    visit_exprs(stmt, &mut |e| {
        if let Expr::Var(name) = e {
            out.insert(name.clone());
        }
    });
    // Index-assignment targets reference their base as well.
    if let Stmt::Assign { target: Target::Index { base, .. }, .. } = stmt {
        out.insert(base.clone());
    }
    if let Stmt::For { var, .. } = stmt {
        out.remove(var); // defined by the loop itself
    }
}

fn visit_exprs(stmt: &Stmt, f: &mut impl FnMut(&Expr)) {
    match stmt {
        Stmt::Assign { target, value } => {
            if let Target::Index { index, .. } = target {
                visit_expr(index, f);
            }
            visit_expr(value, f);
        }
        Stmt::For { start, end, body, .. } => {
            visit_expr(start, f);
            visit_expr(end, f);
            for s in body {
                visit_exprs(s, f);
            }
        }
        Stmt::While { cond, body } => {
            visit_expr(cond, f);
            for s in body {
                visit_exprs(s, f);
            }
        }
        Stmt::If { cond, then_body, else_body } => {
            visit_expr(cond, f);
            for s in then_body.iter().chain(else_body) {
                visit_exprs(s, f);
            }
        }
        Stmt::Return(Some(e)) | Stmt::Print(e) | Stmt::Expr(e) => visit_expr(e, f),
        Stmt::Return(None) => {}
    }
}

fn visit_expr(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    match e {
        Expr::Int(_) | Expr::Var(_) | Expr::ReadInt | Expr::ListLit | Expr::MapLit => {}
        Expr::Neg(inner) | Expr::Len(inner) => visit_expr(inner, f),
        Expr::Binary { lhs, rhs, .. } => {
            visit_expr(lhs, f);
            visit_expr(rhs, f);
        }
        Expr::Call { args, .. } => {
            for a in args {
                visit_expr(a, f);
            }
        }
        Expr::Index { base, index } => {
            visit_expr(base, f);
            visit_expr(index, f);
        }
        Expr::Append { list, value } => {
            visit_expr(list, f);
            visit_expr(value, f);
        }
    }
}

// ---------------------------------------------------------------------------
// Random token deletion
// ---------------------------------------------------------------------------

/// Deletes exactly `round(ratio · N)` tokens at positions drawn without
/// replacement from a seeded generator. Same seed, same output.
pub fn random_token_delete(tokens: &[Token], ratio: f64, seed: u64) -> Vec<Token> {
    let n = tokens.len();
    let k = ((ratio.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    if k == 0 {
        return tokens.to_vec();
    }
    let mut rng = rng_from(seed);
    let mut drop: Vec<usize> = index::sample(&mut rng, n, k).into_vec();
    drop.sort_unstable();
    let mut out = Vec::with_capacity(n - k);
    let mut next = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if next < drop.len() && drop[next] == i {
            next += 1;
        } else {
            out.push(tok.clone());
        }
    }
    out
}
