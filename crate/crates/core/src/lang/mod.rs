//! MIL, the subject language: a small dynamically typed imperative language
//! with functions, `if`/`while`, `print` and `assert`.
//!
//! The grammar is documented in `docs/mil-grammar.md`.

pub mod ast;
mod check;
pub mod gen;
pub mod interp;
mod lexer;
mod parser;
pub mod render;
pub mod value;

pub use ast::{Program, SiteId, Span};
pub use interp::{
    execute, ExecError, ExecOptions, ExecStatus, ExecutionResult, NoHook, RecordHook,
    RuntimeErrorKind, DEFAULT_STEP_LIMIT,
};
pub use render::render;
pub use value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("unresolved variable `{name}` at line {line}")]
    UnresolvedVariable { name: String, line: u32 },
    #[error("unknown function `{name}` at line {line}")]
    UnknownFunction { name: String, line: u32 },
}

impl ParseError {
    pub fn line(&self) -> u32 {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnresolvedVariable { line, .. }
            | ParseError::UnknownFunction { line, .. } => *line,
        }
    }
}

/// Parses and statically checks a MIL program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let program = parser::parse_unchecked(source)?;
    check::check_program(&program)?;
    Ok(program)
}

/// Re-runs the static name check on an already built program.
pub fn check(program: &Program) -> Result<(), ParseError> {
    check::check_program(program)
}

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("fn main(x:int){ print(x+1); }").unwrap();
        assert_eq!(p.functions.len(), 1);
        let f = &p.functions[0];
        assert_eq!(f.params[0].ty, Type::Int);
        assert_eq!(f.body.stmts.len(), 1);
        assert!(matches!(f.body.stmts[0].kind, StmtKind::Print(_)));
    }

    #[test]
    fn compound_condition_has_two_conjuncts() {
        let p = parse("fn main(c: int, n: int){ if (0 <= c && c < n) { } }").unwrap();
        let StmtKind::If { cond, .. } = &p.functions[0].body.stmts[0].kind else {
            panic!("expected if");
        };
        let ExprKind::Binary(BinOp::And, l, r) = &cond.kind else {
            panic!("expected conjunction");
        };
        assert!(matches!(l.kind, ExprKind::Binary(BinOp::Le, ..)));
        assert!(matches!(r.kind, ExprKind::Binary(BinOp::Lt, ..)));
    }

    #[test]
    fn malformed_assignment_reports_line() {
        let err = parse("fn main(){ x = ; }").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }), "{err}");
        let err = parse("fn main() {\n  y = 1;\n  x = (y + ;\n}").unwrap_err();
        assert_eq!(err.line(), 3);
    }

    #[test]
    fn spans_are_within_source() {
        let src = "fn main(a: int) {\n  let b = a * 2;\n  if (b > 3) {\n    print(b);\n  }\n}\n";
        let p = parse(src).unwrap();
        let lines: Vec<&str> = src.lines().collect();
        visit_block(&p.functions[0].body, &mut |s| {
            let l = s.span.line as usize;
            assert!(l >= 1 && l <= lines.len());
            assert!((s.span.col as usize) <= lines[l - 1].len());
        });
    }
}
