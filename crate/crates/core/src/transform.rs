//! Predicate transformation: every `if`/`while` condition becomes an
//! assignment to a fresh boolean, and every atom of a top-level `&&`/`||`
//! chain gets its own boolean.
//!
//! `if (A && B && C)` on the k-th condition lowers to
//!
//! ```text
//! Pk_1 = A;
//! Pk_2 = B when Pk_1;
//! Pk_3 = C when Pk_2;
//! Pk_0 = Pk_1 && Pk_2 && Pk_3;
//! if (Pk_0) { ... }
//! ```
//!
//! A skipped guarded assignment leaves its variable unbound, so atoms that
//! short-circuiting never evaluates stay missing (`unless` plays the same
//! role for `||`). Single-atom conditions only get `Pk_0`. Loop conditions
//! move into the loop prelude so they are re-assigned on every iteration.

use serde::{Deserialize, Serialize};

use crate::lang::ast::*;
use crate::lang::render::expr_to_string;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    If,
    IfElse,
    While,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateEntry {
    pub pred_id: String,
    pub ordinal: u32,
    /// 0 for the whole condition, 1.. for atoms in evaluation order.
    pub conjunct_index: u32,
    pub control_kind: ControlKind,
    pub expression: String,
    pub line: u32,
    pub function: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredicateTable {
    pub entries: Vec<PredicateEntry>,
}

impl PredicateTable {
    pub fn get(&self, pred_id: &str) -> Option<&PredicateEntry> {
        self.entries.iter().find(|e| e.pred_id == pred_id)
    }

    pub fn is_predicate_var(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("predicate table serializes")
    }
}

pub fn pred_var(ordinal: u32, index: u32) -> String {
    format!("P{ordinal}_{index}")
}

/// Rewrites every branch and loop condition. Observable behaviour (stdout
/// and final status) is unchanged.
pub fn transform_predicates(program: &Program) -> (Program, PredicateTable) {
    let mut t = Transformer {
        next: 1,
        table: PredicateTable::default(),
        function: String::new(),
    };
    let mut out = program.clone();
    for f in &mut out.functions {
        t.function = f.name.clone();
        t.block(&mut f.body);
    }
    (out, t.table)
}

struct Transformer {
    next: u32,
    table: PredicateTable,
    function: String,
}

impl Transformer {
    fn block(&mut self, block: &mut Block) {
        let old = std::mem::take(&mut block.stmts);
        for mut s in old {
            match &mut s.kind {
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    let kind = if else_block.is_some() {
                        ControlKind::IfElse
                    } else {
                        ControlKind::If
                    };
                    let (lowered, var) = self.lower(cond, kind, s.span);
                    *cond = var;
                    self.block(then_block);
                    if let Some(e) = else_block {
                        self.block(e);
                    }
                    block.stmts.extend(lowered);
                }
                StmtKind::While {
                    prelude,
                    cond,
                    body,
                } => {
                    let (lowered, var) = self.lower(cond, ControlKind::While, s.span);
                    *cond = var;
                    self.block(prelude);
                    prelude.stmts.extend(lowered);
                    self.block(body);
                }
                _ => {}
            }
            block.stmts.push(s);
        }
    }

    fn lower(&mut self, cond: &Expr, kind: ControlKind, span: Span) -> (Vec<Stmt>, Expr) {
        let k = self.next;
        self.next += 1;
        let (op, atoms) = split_chain(cond);
        let mut stmts = Vec::new();
        let assign = |target: String, value: Expr, guard: Option<Guard>| Stmt {
            kind: StmtKind::Assign {
                target,
                value,
                declare: false,
                guard,
                site: None,
            },
            span,
        };
        self.entry(k, 0, kind, cond, span);
        if atoms.len() == 1 {
            stmts.push(assign(pred_var(k, 0), cond.clone(), None));
        } else {
            let op = op.expect("multi-atom chain has an operator");
            for (j, atom) in atoms.iter().enumerate() {
                let j = j as u32 + 1;
                self.entry(k, j, kind, atom, span);
                let guard = (j > 1).then(|| Guard {
                    var: pred_var(k, j - 1),
                    when: op == BinOp::And,
                });
                stmts.push(assign(pred_var(k, j), (*atom).clone(), guard));
            }
            let mut combined = Expr::var(pred_var(k, 1), span);
            for j in 2..=atoms.len() as u32 {
                combined = Expr::new(
                    ExprKind::Binary(op, Box::new(combined), Box::new(Expr::var(pred_var(k, j), span))),
                    span,
                );
            }
            stmts.push(assign(pred_var(k, 0), combined, None));
        }
        (stmts, Expr::var(pred_var(k, 0), span))
    }

    fn entry(&mut self, k: u32, j: u32, kind: ControlKind, e: &Expr, span: Span) {
        self.table.entries.push(PredicateEntry {
            pred_id: pred_var(k, j),
            ordinal: k,
            conjunct_index: j,
            control_kind: kind,
            expression: expr_to_string(e),
            line: span.line,
            function: self.function.clone(),
        });
    }
}

/// Splits the left spine of a top-level `&&` or `||` chain into atoms.
/// Anything else is a single atom.
fn split_chain(cond: &Expr) -> (Option<BinOp>, Vec<&Expr>) {
    let op = match &cond.kind {
        ExprKind::Binary(op @ (BinOp::And | BinOp::Or), _, _) => *op,
        _ => return (None, vec![cond]),
    };
    let mut atoms = Vec::new();
    let mut cur = cond;
    while let ExprKind::Binary(o, l, r) = &cur.kind {
        if *o != op {
            break;
        }
        atoms.push(r.as_ref());
        cur = l;
    }
    atoms.push(cur);
    atoms.reverse();
    (Some(op), atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{execute, parse, render, ExecOptions, NoHook, Value};

    #[test]
    fn single_atom_gets_only_whole_condition() {
        let p = parse("fn main() { if (true) { print(1); } }").unwrap();
        let (q, table) = transform_predicates(&p);
        assert_eq!(table.entries.len(), 1);
        assert_eq!(table.entries[0].pred_id, "P1_0");
        let text = render(&q);
        assert!(text.contains("P1_0 = true;"), "{text}");
        assert!(text.contains("if (P1_0)"), "{text}");
    }

    #[test]
    fn compound_numbers_atoms_left_to_right() {
        let src = "fn main(kind: str, charno: int, n: int) {\n  if (kind == \"LINE\" && 0 <= charno && charno < n) { print(1); }\n}";
        let p = parse(src).unwrap();
        let (q, table) = transform_predicates(&p);
        let ids: Vec<_> = table.entries.iter().map(|e| (e.pred_id.as_str(), e.expression.as_str())).collect();
        assert_eq!(
            ids,
            vec![
                ("P1_0", "kind == \"LINE\" && 0 <= charno && charno < n"),
                ("P1_1", "kind == \"LINE\""),
                ("P1_2", "0 <= charno"),
                ("P1_3", "charno < n"),
            ]
        );
        assert!(table.entries.iter().all(|e| e.line == 2));
        let text = render(&q);
        assert!(text.contains("P1_2 = 0 <= charno when P1_1;"), "{text}");
        assert!(text.contains("P1_0 = P1_1 && P1_2 && P1_3;"), "{text}");
        // The transformed program is itself valid MIL.
        parse(&text).unwrap();
    }

    #[test]
    fn parenthesized_and_negated_parts_stay_whole() {
        let p = parse("fn main(a: bool, b: bool, c: bool) { if (a && (b || c)) { } if (!(a && b)) { } }").unwrap();
        let (_, table) = transform_predicates(&p);
        let ids: Vec<_> = table.entries.iter().map(|e| e.pred_id.as_str()).collect();
        assert_eq!(ids, vec!["P1_0", "P1_1", "P1_2", "P2_0"]);
        assert_eq!(table.get("P1_2").unwrap().expression, "b || c");
    }

    #[test]
    fn while_condition_moves_into_prelude() {
        let p = parse("fn main(n: int) { i = 0; while (i < n) { i = i + 1; } print(i); }").unwrap();
        let (q, table) = transform_predicates(&p);
        assert_eq!(table.entries[0].control_kind, ControlKind::While);
        let text = render(&q);
        assert!(text.contains("while {"), "{text}");
        let r = execute(&q, &[Value::Int(4)], &mut NoHook, ExecOptions::default()).unwrap();
        assert_eq!(r.stdout, "4\n");
    }

    #[test]
    fn nested_conditions_are_numbered_in_preorder() {
        let p = parse(
            "fn main(a: int) { if (a > 0) { if (a > 5) { print(1); } } else { while (a < 0) { a = a + 1; } } if (a == 3) { } }",
        )
        .unwrap();
        let (_, table) = transform_predicates(&p);
        let kinds: Vec<_> = table.entries.iter().map(|e| (e.pred_id.as_str(), e.control_kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("P1_0", ControlKind::IfElse),
                ("P2_0", ControlKind::If),
                ("P3_0", ControlKind::While),
                ("P4_0", ControlKind::If),
            ]
        );
    }

    #[test]
    fn short_circuit_failure_modes_preserved() {
        let src = "fn main(a: int) { if (a != 0 && 10 / a > 2 || a == -1) { print(\"y\"); } else { print(\"n\"); } }";
        let p = parse(src).unwrap();
        let (q, _) = transform_predicates(&p);
        for a in [-1, 0, 1, 4, 9] {
            let args = [Value::Int(a)];
            let r1 = execute(&p, &args, &mut NoHook, ExecOptions::default()).unwrap();
            let r2 = execute(&q, &args, &mut NoHook, ExecOptions::default()).unwrap();
            assert_eq!((r1.stdout, r1.status), (r2.stdout, r2.status), "a = {a}");
        }
    }
}
