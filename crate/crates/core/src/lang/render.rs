//! Canonical pretty-printer. `parse(render(p))` reproduces `p` up to spans.

use std::fmt::Write;

use super::ast::*;
use super::value::format_float;

/// Annotation hook used when rendering instrumented programs.
pub trait SiteNamer {
    fn site_label(&self, site: SiteId) -> String;
}

pub fn render(program: &Program) -> String {
    Renderer { out: String::new(), namer: None }.program(program)
}

/// Renders with a trailing `// site` comment on every recording statement.
pub fn render_annotated(program: &Program, namer: &dyn SiteNamer) -> String {
    Renderer {
        out: String::new(),
        namer: Some(namer),
    }
    .program(program)
}

struct Renderer<'a> {
    out: String,
    namer: Option<&'a dyn SiteNamer>,
}

impl Renderer<'_> {
    fn program(mut self, p: &Program) -> String {
        for (i, f) in p.functions.iter().enumerate() {
            if i > 0 {
                self.out.push('\n');
            }
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| format!("{}: {}", p.name, p.ty.keyword()))
                .collect();
            write!(self.out, "fn {}({}) ", f.name, params.join(", ")).unwrap();
            let open = self.out.len() + 1;
            self.block(&f.body, 0);
            if let Some(namer) = self.namer {
                let labels: Vec<String> = f.param_sites.iter().flatten().map(|s| namer.site_label(*s)).collect();
                if !labels.is_empty() {
                    // After the opening brace, so the header stays readable code.
                    self.out.insert_str(open, &format!(" // params: {}", labels.join(", ")));
                }
            }
            self.out.push('\n');
        }
        self.out
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
    }

    fn block(&mut self, b: &Block, depth: usize) {
        self.out.push_str("{\n");
        for s in &b.stmts {
            self.stmt(s, depth + 1);
        }
        self.indent(depth);
        self.out.push('}');
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        self.indent(depth);
        match &s.kind {
            StmtKind::Assign {
                target,
                value,
                declare,
                guard,
                site,
            } => {
                if *declare {
                    self.out.push_str("let ");
                }
                write!(self.out, "{target} = {}", expr_to_string(value)).unwrap();
                if let Some(g) = guard {
                    let kw = if g.when { "when" } else { "unless" };
                    write!(self.out, " {kw} {}", g.var).unwrap();
                }
                self.out.push(';');
                if let (Some(namer), Some(site)) = (self.namer, site) {
                    write!(self.out, " // {}", namer.site_label(*site)).unwrap();
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.if_chain(cond, then_block, else_block.as_ref(), depth);
            }
            StmtKind::While {
                prelude,
                cond,
                body,
            } => {
                self.out.push_str("while ");
                if !prelude.stmts.is_empty() {
                    self.block(prelude, depth);
                    self.out.push(' ');
                }
                write!(self.out, "({}) ", expr_to_string(cond)).unwrap();
                self.block(body, depth);
            }
            StmtKind::Print(e) => write!(self.out, "print({});", expr_to_string(e)).unwrap(),
            StmtKind::Assert(e) => write!(self.out, "assert({});", expr_to_string(e)).unwrap(),
            StmtKind::Return(None) => self.out.push_str("return;"),
            StmtKind::Return(Some(e)) => write!(self.out, "return {};", expr_to_string(e)).unwrap(),
            StmtKind::Expr(e) => write!(self.out, "{};", expr_to_string(e)).unwrap(),
            StmtKind::Record { var, site } => {
                let label = self
                    .namer
                    .map(|n| n.site_label(*site))
                    .unwrap_or_else(|| format!("#{site}"));
                write!(self.out, "// record {var} as {label}").unwrap();
            }
        }
        self.out.push('\n');
    }

    fn if_chain(&mut self, cond: &Expr, then_block: &Block, else_block: Option<&Block>, depth: usize) {
        write!(self.out, "if ({}) ", expr_to_string(cond)).unwrap();
        self.block(then_block, depth);
        if let Some(e) = else_block {
            self.out.push_str(" else ");
            // Fold a lone nested if back into `else if`.
            if let [Stmt {
                kind:
                    StmtKind::If {
                        cond,
                        then_block,
                        else_block,
                    },
                ..
            }] = e.stmts.as_slice()
            {
                self.if_chain(cond, then_block, else_block.as_ref(), depth);
            } else {
                self.block(e, depth);
            }
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

// `ctx` is the minimum precedence the surrounding position accepts without
// parentheses.
fn write_expr(out: &mut String, e: &Expr, ctx: u8) {
    match &e.kind {
        ExprKind::Int(v) => {
            if *v < 0 && ctx > 0 {
                write!(out, "({v})").unwrap()
            } else {
                write!(out, "{v}").unwrap()
            }
        }
        ExprKind::Float(v) => {
            let text = format_float(*v);
            if text.starts_with('-') && ctx > 0 {
                write!(out, "({text})").unwrap()
            } else {
                out.push_str(&text)
            }
        }
        ExprKind::Bool(b) => write!(out, "{b}").unwrap(),
        ExprKind::Str(s) => out.push_str(&escape(s)),
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            // Operand of a unary operator: anything binary needs parentheses,
            // and a negative literal after `-` must not fuse into `--1`.
            write_expr(out, inner, 7);
        }
        ExprKind::Binary(op, l, r) => {
            let prec = op.precedence();
            let needs = prec < ctx;
            if needs {
                out.push('(');
            }
            write_expr(out, l, prec);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, r, prec + 1);
            if needs {
                out.push(')');
            }
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
}
