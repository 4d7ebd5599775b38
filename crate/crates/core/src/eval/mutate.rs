//! Mutation-based fault seeding. Mutants are produced by editing the source
//! text at an expression's position, so everything except the mutated token
//! keeps its original layout and line numbers.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FaultSpec, Mutation};
use crate::lang::ast::{visit_block, BinOp, Expr, ExprKind, StmtKind};
use crate::lang::render::expr_to_string;
use crate::lang::{execute, parse, ExecOptions, ExecStatus, NoHook, Program, RuntimeErrorKind, Span, DEFAULT_STEP_LIMIT};
use crate::profile::TestSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// `<`↔`<=`, `>`↔`>=`, `==`↔`!=`
    RelationalSwap,
    /// `+`↔`-`, `*`↔`/`, `%`→`/`
    ArithmeticSwap,
    /// integer constant ±1
    OffByOne,
    /// `&&`↔`||`
    ConnectiveSwap,
}

impl Operator {
    pub const ALL: [Operator; 4] = [
        Operator::RelationalSwap,
        Operator::ArithmeticSwap,
        Operator::OffByOne,
        Operator::ConnectiveSwap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::RelationalSwap => "relational-swap",
            Operator::ArithmeticSwap => "arithmetic-swap",
            Operator::OffByOne => "off-by-one",
            Operator::ConnectiveSwap => "connective-swap",
        }
    }

    fn swap(self, op: BinOp) -> Option<BinOp> {
        use BinOp::*;
        Some(match (self, op) {
            (Operator::RelationalSwap, Lt) => Le,
            (Operator::RelationalSwap, Le) => Lt,
            (Operator::RelationalSwap, Gt) => Ge,
            (Operator::RelationalSwap, Ge) => Gt,
            (Operator::RelationalSwap, Eq) => Ne,
            (Operator::RelationalSwap, Ne) => Eq,
            (Operator::ArithmeticSwap, Add) => Sub,
            (Operator::ArithmeticSwap, Sub) => Add,
            (Operator::ArithmeticSwap, Mul) => Div,
            (Operator::ArithmeticSwap, Div) => Mul,
            (Operator::ArithmeticSwap, Rem) => Div,
            (Operator::ConnectiveSwap, And) => Or,
            (Operator::ConnectiveSwap, Or) => And,
            _ => return None,
        })
    }
}

impl std::str::FromStr for Operator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operator::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown mutation operator `{s}`"))
    }
}

/// A killed mutant.
#[derive(Debug, Clone)]
pub struct Mutant {
    /// `m000`, `m001`, ... in source order over all candidate edits.
    pub id: String,
    pub source: String,
    pub fault: FaultSpec,
    pub n_failing: usize,
}

/// A textual edit: replace chars `[start, end)` of the source.
#[derive(Debug, Clone)]
struct Edit {
    operator: Operator,
    line: u32,
    start: usize,
    end: usize,
    replacement: String,
    /// Statement-level expression before and after, for the fault record.
    original: String,
    mutated: String,
}

struct Source {
    chars: Vec<char>,
    line_starts: Vec<usize>,
}

impl Source {
    fn new(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let mut line_starts = vec![0];
        for (i, c) in chars.iter().enumerate() {
            if *c == '\n' {
                line_starts.push(i + 1);
            }
        }
        Source { chars, line_starts }
    }

    fn index(&self, span: Span) -> usize {
        self.line_starts[span.line as usize - 1] + span.col as usize - 1
    }

    fn apply(&self, e: &Edit) -> String {
        let mut s: String = self.chars[..e.start].iter().collect();
        s.push_str(&e.replacement);
        s.extend(&self.chars[e.end..]);
        s
    }
}

/// Walks the mutable expressions (assignment right-hand sides and branch or
/// loop conditions) and proposes every applicable edit in source order.
fn candidate_edits(program: &Program, src: &Source, operators: &[Operator]) -> Vec<Edit> {
    let mut roots: Vec<(&Expr, u32)> = Vec::new();
    for f in &program.functions {
        visit_block(&f.body, &mut |s| match &s.kind {
            StmtKind::Assign { value, .. } => roots.push((value, s.span.line)),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => roots.push((cond, s.span.line)),
            _ => {}
        });
    }
    let mut edits = Vec::new();
    for (root, line) in roots {
        let mut nodes = Vec::new();
        preorder(root, &mut nodes);
        for node in nodes {
            for &op in operators {
                if let Some(edit) = edit_for(node, root, op, src, line) {
                    edits.push(edit);
                }
            }
        }
    }
    edits
}

fn preorder<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    out.push(e);
    match &e.kind {
        ExprKind::Unary(_, inner) => preorder(inner, out),
        ExprKind::Binary(_, l, r) => {
            preorder(l, out);
            preorder(r, out);
        }
        ExprKind::Call(_, args) => args.iter().for_each(|a| preorder(a, out)),
        _ => {}
    }
}

/// Replaces `target` (compared by address) inside `root` with `with`.
fn replaced(root: &Expr, target: &Expr, with: &Expr) -> Expr {
    if std::ptr::eq(root, target) {
        return with.clone();
    }
    let kind = match &root.kind {
        ExprKind::Unary(op, inner) => ExprKind::Unary(*op, Box::new(replaced(inner, target, with))),
        ExprKind::Binary(op, l, r) => ExprKind::Binary(
            *op,
            Box::new(replaced(l, target, with)),
            Box::new(replaced(r, target, with)),
        ),
        ExprKind::Call(name, args) => ExprKind::Call(name.clone(), args.iter().map(|a| replaced(a, target, with)).collect()),
        other => other.clone(),
    };
    Expr::new(kind, root.span)
}

fn edit_for(node: &Expr, root: &Expr, op: Operator, src: &Source, line: u32) -> Option<Edit> {
    let (start, end, replacement, new_node) = match (&node.kind, op) {
        (ExprKind::Binary(bop, l, r), _) => {
            let new_op = op.swap(*bop)?;
            // The operator token ends right before the right operand, after
            // optional whitespace.
            let mut end = src.index(r.span);
            while end > 0 && src.chars[end - 1].is_whitespace() {
                end -= 1;
            }
            let sym = bop.symbol();
            let start = end.checked_sub(sym.chars().count())?;
            let found: String = src.chars[start..end].iter().collect();
            if found != sym {
                return None;
            }
            let new_node = Expr::new(ExprKind::Binary(new_op, l.clone(), r.clone()), node.span);
            (start, end, new_op.symbol().to_string(), new_node)
        }
        (ExprKind::Int(v), Operator::OffByOne) => {
            let start = src.index(node.span);
            let mut end = start;
            if src.chars.get(end) == Some(&'-') {
                end += 1;
            }
            while src.chars.get(end).is_some_and(|c| c.is_whitespace()) {
                end += 1;
            }
            let digits_start = end;
            while src.chars.get(end).is_some_and(char::is_ascii_digit) {
                end += 1;
            }
            if end == digits_start {
                return None;
            }
            // Move away from zero so the edit never changes the sign token
            // layout in surprising ways (`x - 0` stays a subtraction).
            let nv = if *v < 0 { v.checked_sub(1)? } else { v.checked_add(1)? };
            let new_node = Expr::new(ExprKind::Int(nv), node.span);
            (start, end, nv.to_string(), new_node)
        }
        _ => return None,
    };
    Some(Edit {
        operator: op,
        line,
        start,
        end,
        replacement,
        original: expr_to_string(root),
        mutated: expr_to_string(&replaced(root, node, &new_node)),
    })
}

/// How a program fares on a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuiteOutcome {
    pub failing: usize,
    /// Runs stopped by the step limit (counted as failing too).
    pub timeouts: usize,
    pub max_steps: u64,
}

/// Runs `program` uninstrumented over `suite`.
pub fn run_plain(program: &Program, suite: &TestSuite, step_limit: u64) -> SuiteOutcome {
    suite
        .tests
        .par_iter()
        .map(|t| {
            let opts = ExecOptions {
                step_limit,
                ..ExecOptions::default()
            };
            match execute(program, &t.args, &mut NoHook, opts) {
                Ok(r) => SuiteOutcome {
                    failing: usize::from(t.fails(&r)),
                    timeouts: usize::from(r.status == ExecStatus::RuntimeError(RuntimeErrorKind::StepLimit)),
                    max_steps: r.step_count,
                },
                Err(_) => SuiteOutcome {
                    failing: 1,
                    ..SuiteOutcome::default()
                },
            }
        })
        .reduce(SuiteOutcome::default, |a, b| SuiteOutcome {
            failing: a.failing + b.failing,
            timeouts: a.timeouts + b.timeouts,
            max_steps: a.max_steps.max(b.max_steps),
        })
}

/// Step budget for mutants: generous relative to the slowest passing run of
/// the original, but far below the interpreter default so that
/// non-terminating mutants are cheap to detect.
pub fn mutant_step_budget(original_max_steps: u64) -> u64 {
    (original_max_steps.saturating_mul(20)).max(100_000).min(DEFAULT_STEP_LIMIT)
}

/// Generates every first-order mutant of `source` for the chosen operators
/// and keeps those killed by `suite` (at least one test fails). Mutants that
/// no longer parse, that survive the suite, or that exceed the step budget
/// on some test are discarded with a log entry.
pub fn seed_faults(program_name: &str, source: &str, suite: &TestSuite, operators: &[Operator]) -> Vec<Mutant> {
    let Ok(original) = parse(source) else {
        return Vec::new();
    };
    let budget = mutant_step_budget(run_plain(&original, suite, DEFAULT_STEP_LIMIT).max_steps);
    let src = Source::new(source);
    let edits = candidate_edits(&original, &src, operators);
    let results: Vec<Option<Mutant>> = edits
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let id = format!("m{i:03}");
            let text = src.apply(e);
            let Ok(mutant) = parse(&text) else {
                info!("{program_name}/{id}: discarded, mutant does not parse");
                return None;
            };
            if mutant.without_spans() == original.without_spans() {
                info!("{program_name}/{id}: discarded, edit did not change the program");
                return None;
            }
            let outcome = run_plain(&mutant, suite, budget);
            if outcome.timeouts > 0 {
                info!("{program_name}/{id}: discarded, {} run(s) exceed {budget} steps", outcome.timeouts);
                return None;
            }
            if outcome.failing == 0 {
                info!("{program_name}/{id}: discarded, not killed by the suite");
                return None;
            }
            Some(Mutant {
                id,
                source: text,
                fault: FaultSpec {
                    program: program_name.to_string(),
                    faulty_lines: vec![e.line],
                    description: format!("{} on line {}: `{}` -> `{}`", e.operator.name(), e.line, e.original, e.mutated),
                    mutation: Some(Mutation {
                        operator: e.operator.name().to_string(),
                        original: e.original.clone(),
                        mutated: e.mutated.clone(),
                    }),
                },
                n_failing: outcome.failing,
            })
        })
        .collect();
    results.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::TestCase;
    use crate::Value;

    fn suite(cases: &[(i64, &str)]) -> TestSuite {
        TestSuite {
            tests: cases
                .iter()
                .enumerate()
                .map(|(i, (a, out))| TestCase {
                    id: format!("t{i}"),
                    args: vec![Value::Int(*a)],
                    expected_stdout: Some(out.to_string()),
                })
                .collect(),
        }
    }

    #[test]
    fn relational_swap_on_boundary() {
        let src = "fn main(c: int) {\n  if (0 <= c) {\n    print(1);\n  } else {\n    print(0);\n  }\n}\n";
        let s = suite(&[(0, "1\n"), (5, "1\n"), (-1, "0\n")]);
        let m = seed_faults("p", src, &s, &[Operator::RelationalSwap]);
        assert_eq!(m.len(), 1);
        assert!(m[0].source.contains("if (0 < c)"), "{}", m[0].source);
        let mu = m[0].fault.mutation.as_ref().unwrap();
        assert_eq!((mu.original.as_str(), mu.mutated.as_str()), ("0 <= c", "0 < c"));
        assert_eq!(m[0].fault.faulty_lines, vec![2]);
        assert_eq!(m[0].n_failing, 1);
    }

    #[test]
    fn arithmetic_and_constant_mutants() {
        let src = "fn main(x: int) {\n  let y = x + 1;\n  print(y);\n}\n";
        let s = suite(&[(1, "2\n")]);
        let m = seed_faults("p", src, &s, &Operator::ALL);
        let texts: Vec<&str> = m.iter().map(|m| m.fault.mutation.as_ref().unwrap().mutated.as_str()).collect();
        assert_eq!(texts, vec!["x - 1", "x + 2"]);
    }

    #[test]
    fn equivalent_mutant_is_discarded() {
        // `x * 1` and `x / 1` agree everywhere.
        let src = "fn main(x: int) {\n  print(x * 1);\n  let y = x * 1;\n  print(y);\n}\n";
        let s = suite(&[(3, "3\n3\n"), (-4, "-4\n-4\n")]);
        let m = seed_faults("p", src, &s, &[Operator::ArithmeticSwap]);
        assert!(m.is_empty());
    }

    #[test]
    fn negative_literals_and_parentheses() {
        let src = "fn main(x: int) {\n  let y = (x - -3) * 2;\n  print(y);\n}\n";
        let s = suite(&[(0, "6\n")]);
        let m = seed_faults("p", src, &s, &Operator::ALL);
        let texts: Vec<String> = m.iter().map(|m| m.fault.mutation.as_ref().unwrap().mutated.clone()).collect();
        assert!(texts.contains(&"(x + (-3)) * 2".to_string()), "{texts:?}");
        assert!(texts.contains(&"(x - (-4)) * 2".to_string()), "{texts:?}");
        assert!(texts.contains(&"(x - (-3)) / 2".to_string()), "{texts:?}");
        assert!(texts.contains(&"(x - (-3)) * 3".to_string()), "{texts:?}");
    }
}
