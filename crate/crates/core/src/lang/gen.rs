//! Random well-formed MIL programs, for property tests.
//!
//! Generated programs always pass the static check and always terminate:
//! every loop is driven by a counter that is incremented first in the body
//! and never reassigned elsewhere, and helpers only call helpers defined
//! before them. Runtime errors (division by zero, out-of-range `substr`) and
//! failed assertions are possible on purpose.

use rand::seq::SliceRandom;
use rand::Rng;

use super::Value;

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_helpers: usize,
    pub max_depth: usize,
    pub max_stmts: usize,
    pub max_iterations: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_helpers: 2,
            max_depth: 3,
            max_stmts: 5,
            max_iterations: 4,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Str,
}

struct Var {
    name: String,
    ty: Ty,
    assignable: bool,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    scopes: Vec<Vec<Var>>,
    helpers: usize,
    fresh: usize,
    out: String,
    indent: usize,
}

const WORDS: &[&str] = &["", "a", "ab", "xyz", "hello", "MIL", " ", "a\\tb", "q\\\"r"];

/// Source of a random program whose `main` takes `(a: int, b: int, s: str)`.
pub fn random_program<R: Rng>(rng: &mut R, cfg: GenConfig) -> String {
    let helpers = rng.gen_range(0..=cfg.max_helpers);
    let mut g = Gen {
        rng,
        cfg,
        scopes: Vec::new(),
        helpers: 0,
        fresh: 0,
        out: String::new(),
        indent: 0,
    };
    for h in 0..helpers {
        g.helper(h);
        g.helpers = h + 1;
    }
    g.function("main", &[("a", Ty::Int), ("b", Ty::Int), ("s", Ty::Str)], false);
    g.out
}

/// Arguments matching the `main` signature of [`random_program`].
pub fn random_args<R: Rng>(rng: &mut R) -> Vec<Value> {
    vec![
        Value::Int(rng.gen_range(-10..=30)),
        Value::Int(rng.gen_range(-3..=8)),
        Value::Str(["", "x", "abc", "hello world", "MIL!"].choose(rng).unwrap().to_string()),
    ]
}

impl<R: Rng> Gen<'_, R> {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn helper(&mut self, h: usize) {
        self.function(&format!("h{h}"), &[("x", Ty::Int), ("t", Ty::Str)], true);
    }

    fn function(&mut self, name: &str, params: &[(&str, Ty)], returns: bool) {
        let sig: Vec<String> = params
            .iter()
            .map(|(n, t)| format!("{n}: {}", if *t == Ty::Int { "int" } else { "str" }))
            .collect();
        self.line(&format!("fn {name}({}) {{", sig.join(", ")));
        self.indent += 1;
        self.scopes.push(
            params
                .iter()
                .map(|(n, t)| Var {
                    name: n.to_string(),
                    ty: *t,
                    assignable: true,
                })
                .collect(),
        );
        self.block_body(0);
        if returns {
            let e = self.int_expr(1);
            self.line(&format!("return {e};"));
        }
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
    }

    fn block_body(&mut self, depth: usize) {
        let n = self.rng.gen_range(1..=self.cfg.max_stmts);
        for _ in 0..n {
            self.stmt(depth);
        }
    }

    fn nested(&mut self, depth: usize, pre: Vec<Var>, first: Option<String>) {
        self.indent += 1;
        self.scopes.push(pre);
        if let Some(f) = first {
            self.line(&f);
        }
        self.block_body(depth + 1);
        self.scopes.pop();
        self.indent -= 1;
    }

    fn visible(&self, ty: Ty, assignable: bool) -> Vec<String> {
        self.scopes
            .iter()
            .flatten()
            .filter(|v| v.ty == ty && (v.assignable || !assignable))
            .map(|v| v.name.clone())
            .collect()
    }

    fn stmt(&mut self, depth: usize) {
        let compound = depth < self.cfg.max_depth;
        match self.rng.gen_range(0..if compound { 10 } else { 6 }) {
            0 | 1 => {
                let ty = if self.rng.gen_bool(0.7) { Ty::Int } else { Ty::Str };
                let name = self.name("v");
                let e = self.expr(ty, 2);
                self.line(&format!("let {name} = {e};"));
                self.scopes.last_mut().unwrap().push(Var {
                    name,
                    ty,
                    assignable: true,
                });
            }
            2 => {
                let ty = if self.rng.gen_bool(0.7) { Ty::Int } else { Ty::Str };
                let targets = self.visible(ty, true);
                if let Some(t) = targets.choose(self.rng).cloned() {
                    let e = self.expr(ty, 2);
                    self.line(&format!("{t} = {e};"));
                }
            }
            3 | 4 => {
                let ty = if self.rng.gen_bool(0.6) { Ty::Int } else { Ty::Str };
                let e = if self.rng.gen_bool(0.2) { self.bool_expr(1) } else { self.expr(ty, 2) };
                self.line(&format!("print({e});"));
            }
            5 => {
                if self.rng.gen_bool(0.3) {
                    let c = self.bool_expr(1);
                    self.line(&format!("assert({c});"));
                } else {
                    let e = self.int_expr(1);
                    self.line(&format!("print({e});"));
                }
            }
            6..=8 => {
                let c = self.bool_expr(2);
                self.line(&format!("if ({c}) {{"));
                self.nested(depth, Vec::new(), None);
                let mut chain = self.rng.gen_range(0..3);
                while chain > 0 {
                    if chain == 1 || self.rng.gen_bool(0.5) {
                        self.line("} else {");
                        self.nested(depth, Vec::new(), None);
                        break;
                    }
                    let c = self.bool_expr(2);
                    self.line(&format!("}} else if ({c}) {{"));
                    self.nested(depth, Vec::new(), None);
                    chain -= 1;
                }
                self.line("}");
            }
            _ => {
                let k = self.name("k");
                let bound = self.rng.gen_range(0..=self.cfg.max_iterations);
                self.line(&format!("let {k} = 0;"));
                let cond = if self.rng.gen_bool(0.4) {
                    let c = self.bool_expr(1);
                    let op = if self.rng.gen_bool(0.5) { "&&" } else { "||" };
                    // `||` could keep the loop alive past the bound; guard it.
                    if op == "||" {
                        format!("{k} < {bound} && ({k} < 1 || ({c}))")
                    } else {
                        format!("{k} < {bound} && ({c})")
                    }
                } else {
                    format!("{k} < {bound}")
                };
                // The counter stays readable in and after the loop but is
                // never reassigned outside its increment.
                self.scopes.last_mut().unwrap().push(Var {
                    name: k.clone(),
                    ty: Ty::Int,
                    assignable: false,
                });
                self.line(&format!("while ({cond}) {{"));
                self.nested(depth, Vec::new(), Some(format!("{k} = {k} + 1;")));
                self.line("}");
            }
        }
    }

    fn expr(&mut self, ty: Ty, depth: usize) -> String {
        match ty {
            Ty::Int => self.int_expr(depth),
            Ty::Str => self.str_expr(depth),
        }
    }

    fn int_leaf(&mut self) -> String {
        let vars = self.visible(Ty::Int, false);
        if !vars.is_empty() && self.rng.gen_bool(0.7) {
            vars.choose(self.rng).unwrap().clone()
        } else {
            self.rng.gen_range(-5..=20).to_string()
        }
    }

    fn int_expr(&mut self, depth: usize) -> String {
        if depth == 0 {
            return self.int_leaf();
        }
        match self.rng.gen_range(0..10) {
            0..=2 => self.int_leaf(),
            3..=5 => {
                let op = ["+", "-", "*"].choose(self.rng).unwrap();
                let (l, r) = (self.int_expr(depth - 1), self.int_expr(depth - 1));
                format!("({l} {op} {r})")
            }
            6 => {
                let op = ["/", "%"].choose(self.rng).unwrap();
                let l = self.int_expr(depth - 1);
                let r = if self.rng.gen_bool(0.8) {
                    self.rng.gen_range(1..=7).to_string()
                } else {
                    self.int_leaf()
                };
                format!("({l} {op} {r})")
            }
            7 => format!("abs({})", self.int_expr(depth - 1)),
            8 => format!("len({})", self.str_expr(depth - 1)),
            _ => {
                if self.helpers == 0 {
                    return format!("(0 - {})", self.int_leaf());
                }
                let h = self.rng.gen_range(0..self.helpers);
                let (x, t) = (self.int_expr(depth - 1), self.str_expr(depth - 1));
                format!("h{h}({x}, {t})")
            }
        }
    }

    fn str_leaf(&mut self) -> String {
        let vars = self.visible(Ty::Str, false);
        if !vars.is_empty() && self.rng.gen_bool(0.6) {
            vars.choose(self.rng).unwrap().clone()
        } else {
            format!("\"{}\"", WORDS.choose(self.rng).unwrap())
        }
    }

    fn str_expr(&mut self, depth: usize) -> String {
        if depth == 0 {
            return self.str_leaf();
        }
        match self.rng.gen_range(0..6) {
            0 | 1 => self.str_leaf(),
            2 | 3 => {
                let (l, r) = (self.str_expr(depth - 1), self.str_expr(depth - 1));
                format!("({l} + {r})")
            }
            4 => format!("str({})", self.int_expr(depth - 1)),
            _ => {
                let s = self.str_expr(depth - 1);
                let i = self.rng.gen_range(0..3);
                let j = self.rng.gen_range(0..3);
                format!("substr({s}, {i}, {})", i + j)
            }
        }
    }

    fn bool_expr(&mut self, depth: usize) -> String {
        match self.rng.gen_range(0..if depth == 0 { 3 } else { 7 }) {
            0 | 1 => {
                let op = ["<", "<=", ">", ">=", "==", "!="].choose(self.rng).unwrap();
                let (l, r) = (self.int_expr(1), self.int_expr(1));
                format!("{l} {op} {r}")
            }
            2 => {
                let op = if self.rng.gen_bool(0.5) { "==" } else { "!=" };
                let (l, r) = (self.str_expr(1), self.str_leaf());
                format!("{l} {op} {r}")
            }
            3 | 4 => {
                let op = if self.rng.gen_bool(0.5) { "&&" } else { "||" };
                let (l, r) = (self.bool_expr(depth - 1), self.bool_expr(depth - 1));
                format!("({l}) {op} ({r})")
            }
            5 => format!("!({})", self.bool_expr(depth - 1)),
            _ => if self.rng.gen_bool(0.5) { "true" } else { "false" }.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{execute, parse, ExecOptions, NoHook};
    use crate::seed::rng;

    #[test]
    fn generated_programs_parse_and_terminate() {
        for i in 0..200 {
            let src = random_program(&mut rng(7, &[i]), GenConfig::default());
            let p = parse(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
            let args = random_args(&mut rng(8, &[i]));
            let r = execute(&p, &args, &mut NoHook, ExecOptions::default()).unwrap();
            assert!(r.step_count < 1_000_000, "{} steps\n{src}", r.step_count);
        }
    }
}
