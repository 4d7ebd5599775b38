//! Versioning of assignment targets and placement of recording sites.
//!
//! Every assignment becomes a site with a fresh version of its target. At
//! control-flow merges (after an `if`, at loop entry, after a loop) a phi
//! site records whichever version reached it, with the versions it merges
//! and the gating predicate as parents. The parents of an ordinary site are
//! the reaching versions of the variables its expression reads; when one of
//! those is a phi, the phi's gating predicate is a parent too.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lang::ast::*;
use crate::lang::render::{render_annotated, SiteNamer};
use crate::transform::PredicateTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Assignment,
    Predicate,
    Param,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    IfMerge,
    LoopEntry,
    LoopExit,
}

/// Static value type of a site, when it can be inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeHint {
    Int,
    Float,
    Bool,
    Str,
    Unknown,
}

impl From<Type> for TypeHint {
    fn from(t: Type) -> Self {
        match t {
            Type::Int => TypeHint::Int,
            Type::Float => TypeHint::Float,
            Type::Bool => TypeHint::Bool,
            Type::Str => TypeHint::Str,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: SiteId,
    pub function: String,
    pub base: String,
    pub version: u32,
    /// `<base>_<version>`.
    pub name: String,
    pub line: u32,
    pub block: u32,
    pub kind: SiteKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi_kind: Option<PhiKind>,
    pub parents: Vec<SiteId>,
    /// Gating predicate of a phi site.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gate: Option<SiteId>,
    /// Nearest enclosing branch or loop predicate.
    pub controller: Option<SiteId>,
    pub type_hint: TypeHint,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteTable {
    pub sites: Vec<Site>,
}

impl SiteTable {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, id: SiteId) -> &Site {
        &self.sites[id.index()]
    }

    pub fn parents(&self, id: SiteId) -> &[SiteId] {
        &self.sites[id.index()].parents
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    pub fn by_name(&self, function: &str, name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.function == function && s.name == name)
    }

    /// Sites whose parents or controller include `id`.
    pub fn dependents(&self, id: SiteId) -> Vec<SiteId> {
        self.sites
            .iter()
            .filter(|s| s.parents.contains(&id) || s.controller == Some(id))
            .map(|s| s.id)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("site table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let table: SiteTable = serde_json::from_str(text)?;
        Ok(table)
    }
}

impl SiteNamer for SiteTable {
    fn site_label(&self, site: SiteId) -> String {
        self.get(site).name.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentedProgram {
    pub program: Program,
    pub sites: SiteTable,
    pub predicates: PredicateTable,
}

impl InstrumentedProgram {
    /// The program with every recording site named in a trailing comment.
    pub fn annotated_source(&self) -> String {
        render_annotated(&self.program, &self.sites)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstrumentError {
    #[error("internal error: `{name}` read at line {line} has no reaching definition")]
    NoReachingDefinition { name: String, line: u32 },
}

/// Assigns sites to a predicate-transformed program.
pub fn instrument(program: &Program, predicates: PredicateTable) -> Result<InstrumentedProgram, InstrumentError> {
    let mut program = program.clone();
    let mut sites = Vec::new();
    for f in &mut program.functions {
        let mut w = Walker {
            sites: &mut sites,
            predicates: &predicates,
            function: f.name.clone(),
            versions: BTreeMap::new(),
            next_block: 1,
            block: 0,
            controllers: Vec::new(),
        };
        let mut env = Env::new();
        f.param_sites = f
            .params
            .iter()
            .map(|p| {
                let id = w.new_site(&p.name, p.span.line, SiteKind::Param, None, Vec::new(), None, p.ty.into());
                env.insert(p.name.clone(), id);
                Some(id)
            })
            .collect();
        w.block(&mut f.body, &mut env)?;
    }
    Ok(InstrumentedProgram {
        program,
        sites: SiteTable { sites },
        predicates,
    })
}

/// Reaching definition of every visible variable.
type Env = BTreeMap<String, SiteId>;

struct Walker<'a> {
    sites: &'a mut Vec<Site>,
    predicates: &'a PredicateTable,
    function: String,
    versions: BTreeMap<String, u32>,
    next_block: u32,
    block: u32,
    controllers: Vec<SiteId>,
}

impl Walker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn new_site(
        &mut self,
        base: &str,
        line: u32,
        kind: SiteKind,
        phi_kind: Option<PhiKind>,
        parents: Vec<SiteId>,
        gate: Option<SiteId>,
        type_hint: TypeHint,
    ) -> SiteId {
        let v = self.versions.entry(base.to_string()).or_insert(0);
        *v += 1;
        let id = SiteId(self.sites.len() as u32);
        self.sites.push(Site {
            id,
            function: self.function.clone(),
            base: base.to_string(),
            version: *v,
            name: format!("{base}_{v}"),
            line,
            block: self.block,
            kind,
            phi_kind,
            parents,
            gate,
            controller: self.controllers.last().copied(),
            type_hint,
        });
        id
    }

    fn fresh_block(&mut self) -> u32 {
        let b = self.next_block;
        self.next_block += 1;
        b
    }

    fn reaching(&self, env: &Env, name: &str, line: u32) -> Result<SiteId, InstrumentError> {
        env.get(name).copied().ok_or_else(|| InstrumentError::NoReachingDefinition {
            name: name.to_string(),
            line,
        })
    }

    fn parents_of(&self, e: &Expr, env: &Env, line: u32) -> Result<Vec<SiteId>, InstrumentError> {
        let mut out = Vec::new();
        for v in e.used_vars() {
            let d = self.reaching(env, &v, line)?;
            push_unique(&mut out, d);
            if let Some(g) = self.sites[d.index()].gate {
                push_unique(&mut out, g);
            }
        }
        Ok(out)
    }

    fn gate_of(&self, cond: &Expr, env: &Env) -> Option<SiteId> {
        match &cond.kind {
            ExprKind::Var(v) => env.get(v).copied(),
            _ => None,
        }
    }

    fn block(&mut self, block: &mut Block, env: &mut Env) -> Result<(), InstrumentError> {
        let old = std::mem::take(&mut block.stmts);
        for mut s in old {
            let line = s.span.line;
            let mut after = Vec::new();
            match &mut s.kind {
                StmtKind::Assign {
                    target, value, site, ..
                } => {
                    let parents = self.parents_of(value, env, line)?;
                    let kind = if self.predicates.is_predicate_var(target) {
                        SiteKind::Predicate
                    } else {
                        SiteKind::Assignment
                    };
                    let hint = self.infer(value, env);
                    let id = self.new_site(target, line, kind, None, parents, None, hint);
                    *site = Some(id);
                    env.insert(target.clone(), id);
                }
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    self.check_reads(cond, env, line)?;
                    let gate = self.gate_of(cond, env);
                    let mut then_env = env.clone();
                    let mut else_env = env.clone();
                    self.enter(gate);
                    self.block = self.fresh_block();
                    self.block(then_block, &mut then_env)?;
                    if let Some(e) = else_block {
                        self.block = self.fresh_block();
                        self.block(e, &mut else_env)?;
                    }
                    self.leave(gate);
                    self.block = self.fresh_block();
                    let visible: Vec<(String, SiteId)> = env.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    for (var, before) in visible {
                        let d1 = then_env[&var];
                        let d2 = else_env[&var];
                        if d1 == before && d2 == before {
                            continue;
                        }
                        let mut parents = vec![d1];
                        push_unique(&mut parents, d2);
                        if let Some(g) = gate {
                            push_unique(&mut parents, g);
                        }
                        let hint = self.merge_hint(&[d1, d2]);
                        let id = self.new_site(&var, line, SiteKind::Phi, Some(PhiKind::IfMerge), parents, gate, hint);
                        after.push(record(&var, id, s.span));
                        env.insert(var, id);
                    }
                }
                StmtKind::While {
                    prelude,
                    cond,
                    body,
                } => {
                    let mut assigned = BTreeSet::new();
                    assigned_vars(prelude, &mut assigned);
                    assigned_vars(body, &mut assigned);
                    let carried: Vec<(String, SiteId)> = env
                        .iter()
                        .filter(|(k, _)| assigned.contains(*k))
                        .map(|(k, v)| (k.clone(), *v))
                        .collect();
                    self.block = self.fresh_block();
                    let mut entry = Vec::new();
                    for (var, before) in &carried {
                        let hint = self.sites[before.index()].type_hint;
                        let id = self.new_site(var, line, SiteKind::Phi, Some(PhiKind::LoopEntry), Vec::new(), None, hint);
                        entry.push(record(var, id, s.span));
                        env.insert(var.clone(), id);
                    }
                    let mut inner = env.clone();
                    self.block(prelude, &mut inner)?;
                    let mut prelude_stmts = entry.clone();
                    prelude_stmts.append(&mut prelude.stmts);
                    prelude.stmts = prelude_stmts;
                    self.check_reads(cond, &inner, line)?;
                    let gate = self.gate_of(cond, &inner);
                    let after_prelude = inner.clone();
                    self.enter(gate);
                    self.block = self.fresh_block();
                    self.block(body, &mut inner)?;
                    self.leave(gate);
                    for ((var, before), rec) in carried.iter().zip(&entry) {
                        let StmtKind::Record { site: phi, .. } = rec.kind else { unreachable!() };
                        let mut parents = vec![*before];
                        push_unique(&mut parents, inner[var]);
                        if let Some(g) = gate {
                            push_unique(&mut parents, g);
                        }
                        parents.retain(|p| *p != phi);
                        let site = &mut self.sites[phi.index()];
                        site.parents = parents;
                        site.gate = gate;
                    }
                    self.block = self.fresh_block();
                    for (var, _) in &carried {
                        let d = after_prelude[var];
                        let mut parents = vec![d];
                        if let Some(g) = gate {
                            push_unique(&mut parents, g);
                        }
                        let hint = self.sites[d.index()].type_hint;
                        let id = self.new_site(var, line, SiteKind::Phi, Some(PhiKind::LoopExit), parents, gate, hint);
                        after.push(record(var, id, s.span));
                        env.insert(var.clone(), id);
                    }
                }
                StmtKind::Print(e) | StmtKind::Assert(e) | StmtKind::Expr(e) | StmtKind::Return(Some(e)) => {
                    self.check_reads(e, env, line)?;
                }
                StmtKind::Return(None) | StmtKind::Record { .. } => {}
            }
            block.stmts.push(s);
            block.stmts.extend(after);
        }
        Ok(())
    }

    fn check_reads(&self, e: &Expr, env: &Env, line: u32) -> Result<(), InstrumentError> {
        for v in e.used_vars() {
            self.reaching(env, &v, line)?;
        }
        Ok(())
    }

    fn enter(&mut self, gate: Option<SiteId>) {
        if let Some(g) = gate {
            self.controllers.push(g);
        }
    }

    fn leave(&mut self, gate: Option<SiteId>) {
        if gate.is_some() {
            self.controllers.pop();
        }
    }

    fn merge_hint(&self, defs: &[SiteId]) -> TypeHint {
        let first = self.sites[defs[0].index()].type_hint;
        if defs.iter().all(|d| self.sites[d.index()].type_hint == first) {
            first
        } else {
            TypeHint::Unknown
        }
    }

    fn infer(&self, e: &Expr, env: &Env) -> TypeHint {
        use TypeHint::*;
        match &e.kind {
            ExprKind::Int(_) => Int,
            ExprKind::Float(_) => Float,
            ExprKind::Bool(_) => Bool,
            ExprKind::Str(_) => Str,
            ExprKind::Var(v) => env.get(v).map_or(Unknown, |d| self.sites[d.index()].type_hint),
            ExprKind::Unary(UnOp::Not, _) => Bool,
            ExprKind::Unary(UnOp::Neg, inner) => self.infer(inner, env),
            ExprKind::Binary(op, l, r) => match op {
                BinOp::And | BinOp::Or | BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => Bool,
                _ => match (self.infer(l, env), self.infer(r, env)) {
                    (Int, Int) => Int,
                    (Float, Int | Float) | (Int, Float) => Float,
                    (Str, Str) if *op == BinOp::Add => Str,
                    _ => Unknown,
                },
            },
            ExprKind::Call(name, args) => match name.as_str() {
                "int" | "len" => Int,
                "float" => Float,
                "str" | "substr" => Str,
                "abs" => args.first().map_or(Unknown, |a| self.infer(a, env)),
                _ => Unknown,
            },
        }
    }
}

fn record(var: &str, site: SiteId, span: Span) -> Stmt {
    Stmt {
        kind: StmtKind::Record {
            var: var.to_string(),
            site,
        },
        span,
    }
}

fn push_unique(v: &mut Vec<SiteId>, s: SiteId) {
    if !v.contains(&s) {
        v.push(s);
    }
}

fn assigned_vars(block: &Block, out: &mut BTreeSet<String>) {
    visit_block(block, &mut |s| {
        if let StmtKind::Assign { target, .. } = &s.kind {
            out.insert(target.clone());
        }
    });
}
