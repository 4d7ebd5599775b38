//! Tree-walking interpreter.
//!
//! Instrumented programs carry site ids on assignments, parameters and
//! `Record` statements. When a [`SiteTable`] is supplied, every executed site
//! is reported to the [`RecordHook`] together with a snapshot of its causal
//! parents. Parent values come from a per-frame map of the last value each
//! site took in that frame, so a snapshot holds exactly the values the
//! assignment consumed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::value::Value;
use crate::gsa::SiteTable;

pub const DEFAULT_STEP_LIMIT: u64 = 10_000_000;
pub const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeErrorKind {
    DivByZero,
    BadCast,
    StepLimit,
    TypeMismatch,
    Unbound,
    CallDepth,
    MissingReturn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "kind")]
pub enum ExecStatus {
    Completed,
    AssertionFailed,
    RuntimeError(RuntimeErrorKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub stdout: String,
    pub status: ExecStatus,
    pub step_count: u64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("program has no `main` function")]
    NoMain,
    #[error("`main` takes {expected} argument(s) but {got} were supplied")]
    ArityMismatch { expected: usize, got: usize },
    #[error("argument `{param}` expects {expected}, got {got}")]
    ArgType {
        param: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("step limit must be positive")]
    ZeroStepLimit,
}

/// Receives recording events from an instrumented execution.
pub trait RecordHook {
    /// `site` was assigned `value`; `covariates` pairs each causal parent
    /// with its value at that moment (`Value::Na` when the parent has not
    /// run in the current frame).
    fn record(&mut self, site: SiteId, value: &Value, covariates: &[(SiteId, Value)]);

    /// A guarded assignment at `site` was skipped by short-circuiting.
    fn skip(&mut self, _site: SiteId) {}
}

/// Hook that ignores everything.
pub struct NoHook;

impl RecordHook for NoHook {
    fn record(&mut self, _: SiteId, _: &Value, _: &[(SiteId, Value)]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct ExecOptions<'a> {
    pub step_limit: u64,
    /// Parent lists for covariate snapshots; without it no hook fires.
    pub sites: Option<&'a SiteTable>,
    /// Negate every value assigned at this (boolean) site.
    pub forced_flip: Option<SiteId>,
}

impl Default for ExecOptions<'_> {
    fn default() -> Self {
        ExecOptions {
            step_limit: DEFAULT_STEP_LIMIT,
            sites: None,
            forced_flip: None,
        }
    }
}

enum Flow {
    Normal,
    Return(Option<Value>),
}

enum Halt {
    Assert,
    Error(RuntimeErrorKind),
}

type Exec<T> = Result<T, Halt>;

#[derive(Default)]
struct Frame {
    vars: HashMap<String, Value>,
    site_values: HashMap<SiteId, Value>,
}

struct Machine<'p, 'h> {
    functions: HashMap<&'p str, &'p Function>,
    hook: &'h mut dyn RecordHook,
    opts: ExecOptions<'p>,
    stdout: String,
    steps: u64,
    depth: usize,
}

/// Runs `main` with `args`.
pub fn execute(
    program: &Program,
    args: &[Value],
    hook: &mut dyn RecordHook,
    opts: ExecOptions<'_>,
) -> Result<ExecutionResult, ExecError> {
    if opts.step_limit == 0 {
        return Err(ExecError::ZeroStepLimit);
    }
    let main = program.function("main").ok_or(ExecError::NoMain)?;
    if main.params.len() != args.len() {
        return Err(ExecError::ArityMismatch {
            expected: main.params.len(),
            got: args.len(),
        });
    }
    let mut bound = Vec::with_capacity(args.len());
    for (p, a) in main.params.iter().zip(args) {
        bound.push(coerce_arg(p, a)?);
    }

    let mut m = Machine {
        functions: program.functions.iter().map(|f| (f.name.as_str(), f)).collect(),
        hook,
        opts,
        stdout: String::new(),
        steps: 0,
        depth: 0,
    };
    let status = match m.call(main, bound) {
        Ok(_) => ExecStatus::Completed,
        Err(Halt::Assert) => ExecStatus::AssertionFailed,
        Err(Halt::Error(kind)) => ExecStatus::RuntimeError(kind),
    };
    Ok(ExecutionResult {
        stdout: m.stdout,
        status,
        step_count: m.steps,
    })
}

fn coerce_arg(p: &Param, a: &Value) -> Result<Value, ExecError> {
    match (p.ty, a) {
        (Type::Int, Value::Int(_))
        | (Type::Float, Value::Float(_))
        | (Type::Bool, Value::Bool(_))
        | (Type::Str, Value::Str(_)) => Ok(a.clone()),
        (Type::Float, Value::Int(i)) => Ok(Value::Float(*i as f64)),
        _ => Err(ExecError::ArgType {
            param: p.name.clone(),
            expected: p.ty.keyword(),
            got: a.type_name(),
        }),
    }
}

impl<'p> Machine<'p, '_> {
    fn tick(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.opts.step_limit {
            Err(Halt::Error(RuntimeErrorKind::StepLimit))
        } else {
            Ok(())
        }
    }

    fn call(&mut self, f: &'p Function, args: Vec<Value>) -> Exec<Option<Value>> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Error(RuntimeErrorKind::CallDepth));
        }
        self.depth += 1;
        let mut frame = Frame::default();
        for ((p, v), site) in f.params.iter().zip(args).zip(&f.param_sites) {
            if let Some(site) = site {
                self.emit(&mut frame, *site, v.clone());
            }
            frame.vars.insert(p.name.clone(), v);
        }
        let flow = self.block(&f.body, &mut frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(None),
        }
    }

    // Snapshot parents, remember the site's value in the frame, notify.
    fn emit(&mut self, frame: &mut Frame, site: SiteId, value: Value) {
        let Some(table) = self.opts.sites else { return };
        let covs: Vec<(SiteId, Value)> = table
            .parents(site)
            .iter()
            .map(|p| (*p, frame.site_values.get(p).cloned().unwrap_or(Value::Na)))
            .collect();
        self.hook.record(site, &value, &covs);
        frame.site_values.insert(site, value);
    }

    fn block(&mut self, b: &'p Block, frame: &mut Frame) -> Exec<Flow> {
        for s in &b.stmts {
            if let Flow::Return(v) = self.stmt(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &'p Stmt, frame: &mut Frame) -> Exec<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::Assign {
                target,
                value,
                guard,
                site,
                ..
            } => {
                if let Some(g) = guard {
                    let open = matches!(frame.vars.get(&g.var), Some(Value::Bool(b)) if *b == g.when);
                    if !open {
                        frame.vars.remove(target);
                        if let Some(site) = site {
                            frame.site_values.remove(site);
                            if self.opts.sites.is_some() {
                                self.hook.skip(*site);
                            }
                        }
                        return Ok(Flow::Normal);
                    }
                }
                let mut v = self.eval(value, frame)?;
                if let Some(site) = site {
                    if self.opts.forced_flip == Some(*site) {
                        if let Value::Bool(b) = v {
                            v = Value::Bool(!b);
                        }
                    }
                    self.emit(frame, *site, v.clone());
                }
                frame.vars.insert(target.clone(), v);
            }
            StmtKind::Record { var, site } => {
                if let Some(v) = frame.vars.get(var).cloned() {
                    self.emit(frame, *site, v);
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.eval_bool(cond, frame)? {
                    return self.block(then_block, frame);
                } else if let Some(e) = else_block {
                    return self.block(e, frame);
                }
            }
            StmtKind::While {
                prelude,
                cond,
                body,
            } => loop {
                self.tick()?;
                if let Flow::Return(v) = self.block(prelude, frame)? {
                    return Ok(Flow::Return(v));
                }
                if !self.eval_bool(cond, frame)? {
                    break;
                }
                if let Flow::Return(v) = self.block(body, frame)? {
                    return Ok(Flow::Return(v));
                }
            },
            StmtKind::Print(e) => {
                let v = self.eval(e, frame)?;
                self.stdout.push_str(&v.to_string());
                self.stdout.push('\n');
            }
            StmtKind::Assert(e) => {
                if !self.eval_bool(e, frame)? {
                    return Err(Halt::Assert);
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e, frame)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Expr(e) => {
                if let ExprKind::Call(name, args) = &e.kind {
                    self.call_named(name, args, frame)?;
                } else {
                    self.eval(e, frame)?;
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn eval_bool(&mut self, e: &'p Expr, frame: &mut Frame) -> Exec<bool> {
        match self.eval(e, frame)? {
            Value::Bool(b) => Ok(b),
            _ => Err(Halt::Error(RuntimeErrorKind::TypeMismatch)),
        }
    }

    fn call_named(&mut self, name: &str, args: &'p [Expr], frame: &mut Frame) -> Exec<Option<Value>> {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, frame)?);
        }
        if builtin_arity(name).is_some() {
            return builtin(name, vals).map(Some);
        }
        let f = *self
            .functions
            .get(name)
            .ok_or(Halt::Error(RuntimeErrorKind::Unbound))?;
        if f.params.len() != vals.len() {
            return Err(Halt::Error(RuntimeErrorKind::TypeMismatch));
        }
        self.call(f, vals)
    }

    fn eval(&mut self, e: &'p Expr, frame: &mut Frame) -> Exec<Value> {
        Ok(match &e.kind {
            ExprKind::Int(v) => Value::Int(*v),
            ExprKind::Float(v) => Value::Float(*v),
            ExprKind::Bool(v) => Value::Bool(*v),
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Var(name) => frame
                .vars
                .get(name)
                .cloned()
                .ok_or(Halt::Error(RuntimeErrorKind::Unbound))?,
            ExprKind::Unary(op, inner) => {
                let v = self.eval(inner, frame)?;
                match (op, v) {
                    (UnOp::Neg, Value::Int(i)) => Value::Int(i.wrapping_neg()),
                    (UnOp::Neg, Value::Float(f)) => Value::Float(-f),
                    (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    _ => return Err(Halt::Error(RuntimeErrorKind::TypeMismatch)),
                }
            }
            ExprKind::Binary(BinOp::And, l, r) => {
                Value::Bool(self.eval_bool(l, frame)? && self.eval_bool(r, frame)?)
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                Value::Bool(self.eval_bool(l, frame)? || self.eval_bool(r, frame)?)
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval(l, frame)?;
                let b = self.eval(r, frame)?;
                binary(*op, a, b)?
            }
            ExprKind::Call(name, args) => self
                .call_named(name, args, frame)?
                .ok_or(Halt::Error(RuntimeErrorKind::MissingReturn))?,
        })
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Exec<Value> {
    use BinOp::*;
    use Value::*;
    let mismatch = Err(Halt::Error(RuntimeErrorKind::TypeMismatch));
    Ok(match (a, b) {
        (Int(x), Int(y)) => match op {
            Add => Int(x.wrapping_add(y)),
            Sub => Int(x.wrapping_sub(y)),
            Mul => Int(x.wrapping_mul(y)),
            Div | Rem if y == 0 => return Err(Halt::Error(RuntimeErrorKind::DivByZero)),
            Div => Int(x.wrapping_div(y)),
            Rem => Int(x.wrapping_rem(y)),
            Lt => Bool(x < y),
            Le => Bool(x <= y),
            Gt => Bool(x > y),
            Ge => Bool(x >= y),
            Eq => Bool(x == y),
            Ne => Bool(x != y),
            And | Or => return mismatch,
        },
        (x @ (Int(_) | Float(_)), y @ (Int(_) | Float(_))) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            match op {
                Add => Float(x + y),
                Sub => Float(x - y),
                Mul => Float(x * y),
                Div | Rem if y == 0.0 => return Err(Halt::Error(RuntimeErrorKind::DivByZero)),
                Div => Float(x / y),
                Rem => Float(x % y),
                Lt => Bool(x < y),
                Le => Bool(x <= y),
                Gt => Bool(x > y),
                Ge => Bool(x >= y),
                Eq => Bool(x == y),
                Ne => Bool(x != y),
                And | Or => return mismatch,
            }
        }
        (Str(x), Str(y)) => match op {
            Add => Str(x + &y),
            Lt => Bool(x < y),
            Le => Bool(x <= y),
            Gt => Bool(x > y),
            Ge => Bool(x >= y),
            Eq => Bool(x == y),
            Ne => Bool(x != y),
            _ => return mismatch,
        },
        (Bool(x), Bool(y)) => match op {
            Eq => Bool(x == y),
            Ne => Bool(x != y),
            _ => return mismatch,
        },
        _ => return mismatch,
    })
}

fn builtin(name: &str, args: Vec<Value>) -> Exec<Value> {
    let bad_cast = Err(Halt::Error(RuntimeErrorKind::BadCast));
    let mismatch = Err(Halt::Error(RuntimeErrorKind::TypeMismatch));
    let mut rest = args.into_iter();
    let first = rest.next().ok_or(Halt::Error(RuntimeErrorKind::TypeMismatch))?;
    Ok(match name {
        "int" => match first {
            Value::Int(i) => Value::Int(i),
            Value::Float(f) if f.is_finite() && f.abs() < 9.2e18 => Value::Int(f.trunc() as i64),
            Value::Bool(b) => Value::Int(b as i64),
            Value::Str(s) => match s.trim().parse::<i64>() {
                Ok(i) => Value::Int(i),
                Err(_) => return bad_cast,
            },
            _ => return bad_cast,
        },
        "float" => match first {
            Value::Int(i) => Value::Float(i as f64),
            Value::Float(f) => Value::Float(f),
            Value::Bool(b) => Value::Float(b as i64 as f64),
            Value::Str(s) => match s.trim().parse::<f64>() {
                Ok(f) => Value::Float(f),
                Err(_) => return bad_cast,
            },
            Value::Na => return bad_cast,
        },
        "str" => Value::Str(first.to_string()),
        "len" => match first {
            Value::Str(s) => Value::Int(s.chars().count() as i64),
            _ => return mismatch,
        },
        "abs" => match first {
            Value::Int(i) => Value::Int(i.wrapping_abs()),
            Value::Float(f) => Value::Float(f.abs()),
            _ => return mismatch,
        },
        "substr" => {
            let (s, start, end) = match (first, rest.next(), rest.next()) {
                (Value::Str(s), Some(Value::Int(start)), Some(Value::Int(end))) => (s, start, end),
                _ => return mismatch,
            };
            let chars: Vec<char> = s.chars().collect();
            let n = chars.len() as i64;
            let start = start.clamp(0, n);
            let end = end.clamp(start, n);
            Value::Str(chars[start as usize..end as usize].iter().collect())
        }
        _ => return Err(Halt::Error(RuntimeErrorKind::Unbound)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn run(src: &str, args: &[Value]) -> ExecutionResult {
        let p = parse(src).unwrap();
        execute(&p, args, &mut NoHook, ExecOptions::default()).unwrap()
    }

    #[test]
    fn prints_sum() {
        let r = run("fn main(x: int, y: int) { print(x + y); }", &[Value::Int(3), Value::Int(4)]);
        assert_eq!(r.stdout, "7\n");
        assert_eq!(r.status, ExecStatus::Completed);
    }

    #[test]
    fn failed_assertion() {
        let r = run("fn main() { print(1); assert(false); print(2); }", &[]);
        assert_eq!(r.status, ExecStatus::AssertionFailed);
        assert_eq!(r.stdout, "1\n");
    }

    #[test]
    fn infinite_loop_hits_step_limit() {
        let p = parse("fn main() { while (true) { } }").unwrap();
        let opts = ExecOptions {
            step_limit: 1_000_000,
            ..Default::default()
        };
        let r = execute(&p, &[], &mut NoHook, opts).unwrap();
        assert_eq!(r.status, ExecStatus::RuntimeError(RuntimeErrorKind::StepLimit));
        assert_eq!(r.step_count, 1_000_001);
    }

    #[test]
    fn runtime_errors() {
        let r = run("fn main(a: int) { print(10 / a); }", &[Value::Int(0)]);
        assert_eq!(r.status, ExecStatus::RuntimeError(RuntimeErrorKind::DivByZero));
        let r = run("fn main(s: str) { print(int(s)); }", &[Value::Str("x1".into())]);
        assert_eq!(r.status, ExecStatus::RuntimeError(RuntimeErrorKind::BadCast));
        let r = run("fn main(s: str) { print(s + 1); }", &[Value::Str("x".into())]);
        assert_eq!(r.status, ExecStatus::RuntimeError(RuntimeErrorKind::TypeMismatch));
    }

    #[test]
    fn arity_and_argument_types() {
        let p = parse("fn main(a: int) { print(a); }").unwrap();
        let e = execute(&p, &[], &mut NoHook, ExecOptions::default()).unwrap_err();
        assert_eq!(e, ExecError::ArityMismatch { expected: 1, got: 0 });
        let e = execute(&p, &[Value::Bool(true)], &mut NoHook, ExecOptions::default()).unwrap_err();
        assert!(matches!(e, ExecError::ArgType { .. }));
    }

    #[test]
    fn short_circuit_skips_right_operand() {
        // Division by zero on the right is never evaluated.
        let r = run(
            "fn main(a: int) { if (a != 0 && 10 / a > 1) { print(1); } else { print(0); } }",
            &[Value::Int(0)],
        );
        assert_eq!(r.status, ExecStatus::Completed);
        assert_eq!(r.stdout, "0\n");
    }

    #[test]
    fn builtins_and_casts() {
        let r = run(
            "fn main(s: str) { print(len(s)); print(substr(s, 1, 3)); print(int(\"42\") + 1); \
             print(float(3)); print(str(2.5) + \"!\"); print(int(-2.7)); print(abs(-4)); }",
            &[Value::Str("hello".into())],
        );
        assert_eq!(r.stdout, "5\nel\n43\n3.0\n2.5!\n-2\n4\n");
    }

    #[test]
    fn functions_and_recursion() {
        let r = run(
            "fn fact(n: int) { if (n <= 1) { return 1; } return n * fact(n - 1); } \
             fn main(n: int) { print(fact(n)); }",
            &[Value::Int(10)],
        );
        assert_eq!(r.stdout, "3628800\n");
        let r = run("fn f(n: int) { return f(n + 1); } fn main() { print(f(0)); }", &[]);
        assert_eq!(r.status, ExecStatus::RuntimeError(RuntimeErrorKind::CallDepth));
    }

    #[test]
    fn guarded_assignment_unbinds() {
        let r = run(
            "fn main(a: bool) { g = a; x = 1 when g; y = 2 unless g; if (g) { print(x); } else { print(y); } }",
            &[Value::Bool(false)],
        );
        assert_eq!(r.stdout, "2\n");
    }
}
