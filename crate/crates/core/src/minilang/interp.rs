//! Tree-walking interpreter with deterministic cost accounting.
//!
//! `execute` is a pure function of (program, input, fuel): identical calls
//! yield byte-identical outcomes, and the accumulated cost never exceeds
//! the fuel bound.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, FuncDef, Program, Stmt, Target};
use super::cost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecStatus {
    Ok,
    ParseError,
    RuntimeError,
    FuelExhausted,
    /// Only produced by checked runs that compare output against an
    /// expectation.
    OutputMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    pub output: String,
    /// Deterministic cost units; stands in for wall-clock running time.
    pub cost: u64,
    /// Human-readable detail for error statuses.
    pub detail: Option<String>,
}

impl ExecOutcome {
    pub fn ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }
}

#[derive(Debug, Clone)]
enum Value {
    Int(i64),
    List(Rc<RefCell<Vec<i64>>>),
    Map(Rc<RefCell<BTreeMap<i64, i64>>>),
}

enum Halt {
    Runtime(String),
    Fuel,
}

enum Flow {
    Normal,
    Return(Value),
}

/// Runs `program` against whitespace-separated integer input. Total cost is
/// capped by `fuel`; exceeding it yields `FuelExhausted` with `cost == fuel`.
pub fn execute(program: &Program, input: &str, fuel: u64) -> ExecOutcome {
    let mut funcs: HashMap<&str, &FuncDef> = HashMap::new();
    for f in &program.funcs {
        funcs.insert(&f.name, f);
    }
    let mut interp = Interp {
        funcs,
        input: input.split_whitespace().collect(),
        next_input: 0,
        output: String::new(),
        cost: 0,
        fuel,
        depth: 0,
    };
    let mut env: HashMap<String, Value> = HashMap::new();
    let result = interp.run_block(&program.main, &mut env, false);
    let (status, detail) = match result {
        Ok(Flow::Normal) => (ExecStatus::Ok, None),
        Ok(Flow::Return(_)) => (
            ExecStatus::RuntimeError,
            Some("return outside function".to_string()),
        ),
        Err(Halt::Runtime(msg)) => (ExecStatus::RuntimeError, Some(msg)),
        Err(Halt::Fuel) => (ExecStatus::FuelExhausted, None),
    };
    ExecOutcome {
        status,
        output: interp.output,
        cost: interp.cost,
        detail,
    }
}

struct Interp<'p> {
    funcs: HashMap<&'p str, &'p FuncDef>,
    input: Vec<&'p str>,
    next_input: usize,
    output: String,
    cost: u64,
    fuel: u64,
    depth: usize,
}

impl<'p> Interp<'p> {
    fn charge(&mut self, units: u64) -> Result<(), Halt> {
        if self.cost + units > self.fuel {
            self.cost = self.fuel;
            return Err(Halt::Fuel);
        }
        self.cost += units;
        Ok(())
    }

    fn run_block(
        &mut self,
        stmts: &'p [Stmt],
        env: &mut HashMap<String, Value>,
        in_func: bool,
    ) -> Result<Flow, Halt> {
        for stmt in stmts {
            match self.run_stmt(stmt, env, in_func)? {
                Flow::Normal => {}
                ret => return Ok(ret),
            }
        }
        Ok(Flow::Normal)
    }

    fn run_stmt(
        &mut self,
        stmt: &'p Stmt,
        env: &mut HashMap<String, Value>,
        in_func: bool,
    ) -> Result<Flow, Halt> {
        match stmt {
            Stmt::Assign { target, value } => {
                self.charge(cost::STMT)?;
                let v = self.eval(value, env)?;
                match target {
                    Target::Var(name) => {
                        env.insert(name.clone(), v);
                    }
                    Target::Index { base, index } => {
                        let idx = self.eval_int(index, env)?;
                        let val = as_int(&v, "assigned value")?;
                        match env.get(base) {
                            Some(Value::List(list)) => {
                                self.charge(cost::INDEX)?;
                                let mut list = list.borrow_mut();
                                let slot = usize::try_from(idx)
                                    .ok()
                                    .filter(|&i| i < list.len())
                                    .ok_or_else(|| {
                                        Halt::Runtime(format!(
                                            "list index {idx} out of range (len {})",
                                            list.len()
                                        ))
                                    })?;
                                list[slot] = val;
                            }
                            Some(Value::Map(map)) => {
                                self.charge(cost::MAP_INSERT)?;
                                map.borrow_mut().insert(idx, val);
                            }
                            Some(Value::Int(_)) => {
                                return Err(Halt::Runtime(format!(
                                    "{base} is an integer, cannot index-assign"
                                )))
                            }
                            None => {
                                return Err(Halt::Runtime(format!(
                                    "variable {base} used before assignment"
                                )))
                            }
                        }
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::For { var, start, end, body } => {
                self.charge(cost::STMT)?;
                let lo = self.eval_int(start, env)?;
                let hi = self.eval_int(end, env)?;
                let mut i = lo;
                while i < hi {
                    self.charge(cost::LOOP_ITER)?;
                    env.insert(var.clone(), Value::Int(i));
                    match self.run_block(body, env, in_func)? {
                        Flow::Normal => {}
                        ret => return Ok(ret),
                    }
                    i += 1;
                }
                Ok(Flow::Normal)
            }
            Stmt::While { cond, body } => {
                loop {
                    self.charge(cost::STMT)?;
                    if self.eval_int(cond, env)? == 0 {
                        break;
                    }
                    match self.run_block(body, env, in_func)? {
                        Flow::Normal => {}
                        ret => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::If { cond, then_body, else_body } => {
                self.charge(cost::STMT)?;
                if self.eval_int(cond, env)? != 0 {
                    self.run_block(then_body, env, in_func)
                } else {
                    self.run_block(else_body, env, in_func)
                }
            }
            Stmt::Return(value) => {
                self.charge(cost::STMT)?;
                if !in_func {
                    // surfaced as a runtime error by the caller
                    return Ok(Flow::Return(Value::Int(0)));
                }
                let v = match value {
                    Some(e) => self.eval(e, env)?,
                    None => Value::Int(0),
                };
                Ok(Flow::Return(v))
            }
            Stmt::Print(e) => {
                self.charge(cost::STMT)?;
                let v = self.eval(e, env)?;
                let n = as_int(&v, "print argument")?;
                self.output.push_str(&n.to_string());
                self.output.push('\n');
                Ok(Flow::Normal)
            }
            Stmt::Expr(e) => {
                self.charge(cost::STMT)?;
                self.eval(e, env)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn eval_int(&mut self, e: &'p Expr, env: &mut HashMap<String, Value>) -> Result<i64, Halt> {
        let v = self.eval(e, env)?;
        as_int(&v, "condition or index")
    }

    fn eval(&mut self, e: &'p Expr, env: &mut HashMap<String, Value>) -> Result<Value, Halt> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Var(name) => env.get(name).cloned().ok_or_else(|| {
                Halt::Runtime(format!("variable {name} used before assignment"))
            }),
            Expr::Neg(inner) => {
                self.charge(cost::BINOP)?;
                let v = self.eval_int(inner, env)?;
                v.checked_neg()
                    .map(Value::Int)
                    .ok_or_else(|| Halt::Runtime("integer overflow".into()))
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval_int(lhs, env)?;
                let b = self.eval_int(rhs, env)?;
                self.charge(cost::BINOP)?;
                binop(*op, a, b).map(Value::Int)
            }
            Expr::Call { name, args } => {
                let func = *self
                    .funcs
                    .get(name.as_str())
                    .ok_or_else(|| Halt::Runtime(format!("call to undefined function {name}")))?;
                if func.params.len() != args.len() {
                    return Err(Halt::Runtime(format!(
                        "function {name} takes {} arguments, got {}",
                        func.params.len(),
                        args.len()
                    )));
                }
                let mut callee_env = HashMap::new();
                for (param, arg) in func.params.iter().zip(args) {
                    let v = self.eval(arg, env)?;
                    callee_env.insert(param.clone(), v);
                }
                self.charge(cost::CALL)?;
                if self.depth >= cost::MAX_CALL_DEPTH {
                    return Err(Halt::Runtime(format!(
                        "recursion depth exceeded calling {name}"
                    )));
                }
                self.depth += 1;
                let flow = self.run_block(&func.body, &mut callee_env, true)?;
                self.depth -= 1;
                match flow {
                    Flow::Return(v) => Ok(v),
                    Flow::Normal => Ok(Value::Int(0)),
                }
            }
            Expr::Index { base, index } => {
                let b = self.eval(base, env)?;
                let i = self.eval_int(index, env)?;
                match b {
                    Value::List(list) => {
                        self.charge(cost::INDEX)?;
                        let list = list.borrow();
                        usize::try_from(i)
                            .ok()
                            .and_then(|idx| list.get(idx).copied())
                            .map(Value::Int)
                            .ok_or_else(|| {
                                Halt::Runtime(format!(
                                    "list index {i} out of range (len {})",
                                    list.len()
                                ))
                            })
                    }
                    Value::Map(map) => {
                        self.charge(cost::MAP_LOOKUP)?;
                        map.borrow()
                            .get(&i)
                            .copied()
                            .map(Value::Int)
                            .ok_or_else(|| Halt::Runtime(format!("key {i} not found")))
                    }
                    Value::Int(_) => Err(Halt::Runtime("cannot index an integer".into())),
                }
            }
            Expr::Len(inner) => {
                let v = self.eval(inner, env)?;
                self.charge(cost::LEN)?;
                match v {
                    Value::List(list) => Ok(Value::Int(list.borrow().len() as i64)),
                    Value::Map(map) => Ok(Value::Int(map.borrow().len() as i64)),
                    Value::Int(_) => Err(Halt::Runtime("len of an integer".into())),
                }
            }
            Expr::Append { list, value } => {
                let l = self.eval(list, env)?;
                let v = self.eval(value, env)?;
                self.charge(cost::APPEND)?;
                match l {
                    Value::List(list) => {
                        list.borrow_mut().push(as_int(&v, "appended value")?);
                        Ok(Value::Int(0))
                    }
                    _ => Err(Halt::Runtime("append target is not a list".into())),
                }
            }
            Expr::ReadInt => {
                self.charge(cost::READ_INT)?;
                let tok = self
                    .input
                    .get(self.next_input)
                    .ok_or_else(|| Halt::Runtime("input exhausted".into()))?;
                self.next_input += 1;
                tok.parse::<i64>()
                    .map(Value::Int)
                    .map_err(|_| Halt::Runtime(format!("invalid integer input {tok:?}")))
            }
            Expr::ListLit => Ok(Value::List(Rc::new(RefCell::new(Vec::new())))),
            Expr::MapLit => Ok(Value::Map(Rc::new(RefCell::new(BTreeMap::new())))),
        }
    }
}

fn as_int(v: &Value, what: &str) -> Result<i64, Halt> {
    match v {
        Value::Int(n) => Ok(*n),
        Value::List(_) => Err(Halt::Runtime(format!("{what} must be an integer, got list"))),
        Value::Map(_) => Err(Halt::Runtime(format!("{what} must be an integer, got map"))),
    }
}

/// Integer arithmetic with Python-style floor division and modulo;
/// overflow and division by zero are runtime errors.
fn binop(op: BinOp, a: i64, b: i64) -> Result<i64, Halt> {
    let overflow = || Halt::Runtime("integer overflow".into());
    match op {
        BinOp::Add => a.checked_add(b).ok_or_else(overflow),
        BinOp::Sub => a.checked_sub(b).ok_or_else(overflow),
        BinOp::Mul => a.checked_mul(b).ok_or_else(overflow),
        BinOp::Div => {
            if b == 0 {
                return Err(Halt::Runtime("division by zero".into()));
            }
            let q = a.checked_div(b).ok_or_else(overflow)?;
            let r = a % b;
            Ok(if r != 0 && (r < 0) != (b < 0) { q - 1 } else { q })
        }
        BinOp::Mod => {
            if b == 0 {
                return Err(Halt::Runtime("modulo by zero".into()));
            }
            let r = a.checked_rem(b).ok_or_else(overflow)?;
            Ok(if r != 0 && (r < 0) != (b < 0) { r + b } else { r })
        }
        BinOp::Eq => Ok((a == b) as i64),
        BinOp::Ne => Ok((a != b) as i64),
        BinOp::Lt => Ok((a < b) as i64),
        BinOp::Gt => Ok((a > b) as i64),
        BinOp::Le => Ok((a <= b) as i64),
        BinOp::Ge => Ok((a >= b) as i64),
    }
}
