//! Static pre-pass: every name must resolve before the program may run.
//!
//! Scoping is per block. The first assignment to a name declares it in the
//! current block (`let` is optional), and the name stays visible for the rest
//! of that block and in nested blocks. A `while` prelude shares its scope with
//! the loop condition and body.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::ParseError;

pub fn check_program(program: &Program) -> Result<(), ParseError> {
    let mut arities: HashMap<&str, usize> = HashMap::new();
    for f in &program.functions {
        if builtin_arity(&f.name).is_some() {
            return Err(ParseError::Syntax {
                line: f.span.line,
                col: f.span.col,
                message: format!("`{}` is a builtin and cannot be redefined", f.name),
            });
        }
        if arities.insert(&f.name, f.params.len()).is_some() {
            return Err(ParseError::Syntax {
                line: f.span.line,
                col: f.span.col,
                message: format!("duplicate function `{}`", f.name),
            });
        }
    }
    for f in &program.functions {
        let mut seen = HashSet::new();
        for p in &f.params {
            if !seen.insert(p.name.as_str()) {
                return Err(ParseError::Syntax {
                    line: p.span.line,
                    col: p.span.col,
                    message: format!("duplicate parameter `{}`", p.name),
                });
            }
        }
        let mut scopes = Scopes {
            stack: vec![f.params.iter().map(|p| p.name.clone()).collect()],
            arities: &arities,
        };
        scopes.block(&f.body, true)?;
    }
    Ok(())
}

struct Scopes<'a> {
    stack: Vec<HashSet<String>>,
    arities: &'a HashMap<&'a str, usize>,
}

impl Scopes<'_> {
    fn visible(&self, name: &str) -> bool {
        self.stack.iter().any(|s| s.contains(name))
    }

    fn block(&mut self, block: &Block, fresh_scope: bool) -> Result<(), ParseError> {
        if fresh_scope {
            self.stack.push(HashSet::new());
        }
        for s in &block.stmts {
            self.stmt(s)?;
        }
        if fresh_scope {
            self.stack.pop();
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ParseError> {
        match &s.kind {
            StmtKind::Assign {
                target,
                value,
                guard,
                ..
            } => {
                self.expr(value)?;
                if let Some(g) = guard {
                    self.name(&g.var, s.span)?;
                }
                if !self.visible(target) {
                    self.stack.last_mut().unwrap().insert(target.clone());
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond)?;
                self.block(then_block, true)?;
                if let Some(e) = else_block {
                    self.block(e, true)?;
                }
            }
            StmtKind::While {
                prelude,
                cond,
                body,
            } => {
                self.stack.push(HashSet::new());
                self.block(prelude, false)?;
                self.expr(cond)?;
                self.block(body, true)?;
                self.stack.pop();
            }
            StmtKind::Print(e) | StmtKind::Assert(e) | StmtKind::Expr(e) => self.expr(e)?,
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e)?;
                }
            }
            StmtKind::Record { var, .. } => self.name(var, s.span)?,
        }
        Ok(())
    }

    fn name(&self, name: &str, span: Span) -> Result<(), ParseError> {
        if self.visible(name) {
            Ok(())
        } else {
            Err(ParseError::UnresolvedVariable {
                name: name.to_string(),
                line: span.line,
            })
        }
    }

    fn expr(&self, e: &Expr) -> Result<(), ParseError> {
        match &e.kind {
            ExprKind::Var(v) => self.name(v, e.span),
            ExprKind::Unary(_, inner) => self.expr(inner),
            ExprKind::Binary(_, l, r) => {
                self.expr(l)?;
                self.expr(r)
            }
            ExprKind::Call(name, args) => {
                let expected = builtin_arity(name).or_else(|| self.arities.get(name.as_str()).copied());
                match expected {
                    None => {
                        return Err(ParseError::UnknownFunction {
                            name: name.clone(),
                            line: e.span.line,
                        })
                    }
                    Some(n) if n != args.len() => {
                        return Err(ParseError::Syntax {
                            line: e.span.line,
                            col: e.span.col,
                            message: format!(
                                "`{name}` takes {n} argument(s) but {} were supplied",
                                args.len()
                            ),
                        })
                    }
                    Some(_) => {}
                }
                args.iter().try_for_each(|a| self.expr(a))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::lang::{parse, ParseError};

    #[test]
    fn use_before_assignment_is_rejected() {
        let err = parse("fn main() {\n print(y);\n}").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnresolvedVariable {
                name: "y".into(),
                line: 2
            }
        );
    }

    #[test]
    fn block_locals_do_not_escape() {
        let src = "fn main(a: bool) { if (a) { t = 1; } print(t); }";
        assert!(matches!(
            parse(src),
            Err(ParseError::UnresolvedVariable { .. })
        ));
    }

    #[test]
    fn outer_names_are_visible_in_nested_blocks() {
        let src = "fn main(a: bool) { x = 0; if (a) { x = x + 1; } print(x); }";
        assert!(parse(src).is_ok());
    }

    #[test]
    fn unknown_function_and_arity() {
        assert!(matches!(
            parse("fn main() { foo(); }"),
            Err(ParseError::UnknownFunction { .. })
        ));
        assert!(parse("fn main() { print(len(\"a\", 2)); }").is_err());
        assert!(parse("fn f(a: int) { return a; } fn main() { print(f(1, 2)); }").is_err());
    }
}
