use serde::{Deserialize, Serialize};

/// Identifier of an instrumentation site (an assignment target version).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl SiteId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for SiteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 1-based source position of the first character of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Float,
    Bool,
    Str,
}

impl Type {
    pub fn keyword(self) -> &'static str {
        match self {
            Type::Int => "int",
            Type::Float => "float",
            Type::Bool => "bool",
            Type::Str => "str",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Type> {
        Some(match s {
            "int" => Type::Int,
            "float" => Type::Float,
            "bool" => Type::Bool,
            "str" => Type::Str,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<Function>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Structural copy with every span zeroed, for shape comparisons.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        for f in &mut p.functions {
            f.span = Span::default();
            for param in &mut f.params {
                param.span = Span::default();
            }
            strip_block(&mut f.body);
        }
        p
    }

    pub fn line_count_hint(&self) -> u32 {
        let mut max = 0;
        for f in &self.functions {
            max = max.max(f.span.line);
            visit_block(&f.body, &mut |s| max = max.max(s.span.line));
        }
        max
    }
}

fn strip_block(b: &mut Block) {
    for s in &mut b.stmts {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::Assign { value, .. } => strip_expr(value),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                strip_expr(cond);
                strip_block(then_block);
                if let Some(e) = else_block {
                    strip_block(e);
                }
            }
            StmtKind::While {
                prelude,
                cond,
                body,
            } => {
                strip_block(prelude);
                strip_expr(cond);
                strip_block(body);
            }
            StmtKind::Print(e) | StmtKind::Assert(e) | StmtKind::Expr(e) => strip_expr(e),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    strip_expr(e)
                }
            }
            StmtKind::Record { .. } => {}
        }
    }
}

fn strip_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Unary(_, inner) => strip_expr(inner),
        ExprKind::Binary(_, l, r) => {
            strip_expr(l);
            strip_expr(r);
        }
        ExprKind::Call(_, args) => args.iter_mut().for_each(strip_expr),
        _ => {}
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: Span,
    /// Recording site for each parameter, filled in by instrumentation.
    pub param_sites: Vec<Option<SiteId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

/// `x = e when g;` assigns only while `g` is bound to true (`unless`: bound
/// to false). Otherwise `x` becomes unbound. The predicate transformation
/// uses this to lower short-circuit chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub var: String,
    pub when: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign {
        target: String,
        value: Expr,
        declare: bool,
        guard: Option<Guard>,
        site: Option<SiteId>,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    /// `while { prelude } (cond) { body }`; the prelude runs before every
    /// evaluation of `cond`. Source programs normally leave it empty.
    While {
        prelude: Block,
        cond: Expr,
        body: Block,
    },
    Print(Expr),
    Assert(Expr),
    Return(Option<Expr>),
    Expr(Expr),
    /// Records the current value of `var` at a merge point (instrumentation only).
    Record { var: String, site: SiteId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn var(name: impl Into<String>, span: Span) -> Self {
        Expr::new(ExprKind::Var(name.into()), span)
    }

    /// Variable names read by this expression, in evaluation order, without
    /// duplicates.
    pub fn used_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match &self.kind {
            ExprKind::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            ExprKind::Unary(_, e) => e.collect_vars(out),
            ExprKind::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }
}

/// Builtins callable like functions; user functions may not reuse these names.
pub const BUILTINS: &[(&str, usize)] = &[
    ("int", 1),
    ("float", 1),
    ("str", 1),
    ("len", 1),
    ("substr", 3),
    ("abs", 1),
];

pub fn builtin_arity(name: &str) -> Option<usize> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

/// Pre-order walk over every statement, including nested blocks.
pub fn visit_block<'a>(block: &'a Block, f: &mut dyn FnMut(&'a Stmt)) {
    for s in &block.stmts {
        f(s);
        match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                visit_block(then_block, f);
                if let Some(e) = else_block {
                    visit_block(e, f);
                }
            }
            StmtKind::While { prelude, body, .. } => {
                visit_block(prelude, f);
                visit_block(body, f);
            }
            _ => {}
        }
    }
}
