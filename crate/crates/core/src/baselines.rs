//! Baseline fault-localization techniques scored over the same profiles.
//!
//! * Ochiai and DStar (exponent 2): coverage spectra, where a site counts as
//!   covered in a run when its recorded value is not NA.
//! * Baah: per-site least-squares effect of covering the site on failure,
//!   adjusting for the values of its parent sites.
//! * ESP: how far failing runs' values sit from the passing-run
//!   distribution, in passing-run standard deviations. The aggregation (mean
//!   z-score over failing runs) is a reconstruction.
//! * Predicate switching: force every dynamic instance of a branch outcome
//!   the other way and count failing tests that then pass.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::gsa::{InstrumentedProgram, SiteKind, SiteTable};
use crate::lang::{SiteId, Value};
use crate::profile::{run_test, ProfileError, ProfileMatrix, RunConfig, TestSuite};
use crate::ranking::{Ranking, Technique, Universe};

/// Spectrum counts for one element: failing/passing runs that covered it
/// (`ef`, `ep`) or did not (`nf`, `np`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Spectrum {
    pub ef: u32,
    pub ep: u32,
    pub nf: u32,
    pub np: u32,
}

pub fn ochiai_formula(s: Spectrum) -> f64 {
    let denom = (f64::from(s.ef + s.nf) * f64::from(s.ef + s.ep)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        f64::from(s.ef) / denom
    }
}

/// DStar with exponent 2. A zero denominator with `ef > 0` means the element
/// is covered by every failing and no passing run; it gets `f64::MAX`.
pub fn dstar_formula(s: Spectrum) -> f64 {
    let denom = f64::from(s.ep + s.nf);
    let ef = f64::from(s.ef);
    if denom == 0.0 {
        if s.ef > 0 {
            f64::MAX
        } else {
            0.0
        }
    } else {
        ef * ef / denom
    }
}

/// Coverage spectrum of a site: it is covered in a run iff its recorded
/// value is not NA.
pub fn site_spectrum(profiles: &ProfileMatrix, site: SiteId) -> Spectrum {
    let mut sp = Spectrum::default();
    for r in &profiles.rows {
        match (r.executed(site), r.y == 1) {
            (true, true) => sp.ef += 1,
            (true, false) => sp.ep += 1,
            (false, true) => sp.nf += 1,
            (false, false) => sp.np += 1,
        }
    }
    sp
}

fn spectrum_scores(profiles: &ProfileMatrix, table: &SiteTable, f: fn(Spectrum) -> f64) -> BTreeMap<SiteId, f64> {
    table
        .iter()
        .filter(|s| s.kind != SiteKind::Param)
        .map(|s| (s.id, f(site_spectrum(profiles, s.id))))
        .collect()
}

pub fn ochiai(profiles: &ProfileMatrix, table: &SiteTable) -> BTreeMap<SiteId, f64> {
    spectrum_scores(profiles, table, ochiai_formula)
}

pub fn dstar(profiles: &ProfileMatrix, table: &SiteTable) -> BTreeMap<SiteId, f64> {
    spectrum_scores(profiles, table, dstar_formula)
}

/// Least squares with columns processed in order; a column that is (nearly)
/// a linear combination of earlier ones is dropped and gets `None`.
pub fn ols(columns: &[Vec<f64>], y: &[f64]) -> Vec<Option<f64>> {
    let n = y.len();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    // r[k][j]: coefficient of q_k in column j (upper triangular over kept).
    let mut r: Vec<Vec<f64>> = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = col.clone();
        let mut rcol = Vec::new();
        for qk in &q {
            let dot: f64 = qk.iter().zip(&v).map(|(a, b)| a * b).sum();
            for i in 0..n {
                v[i] -= dot * qk[i];
            }
            rcol.push(dot);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-9 * norm0.max(1.0) {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        rcol.push(norm);
        q.push(v);
        r.push(rcol);
        kept.push(j);
    }
    let qty: Vec<f64> = q.iter().map(|qk| qk.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let m = kept.len();
    let mut beta = vec![0.0; m];
    for k in (0..m).rev() {
        let mut s = qty[k];
        for (l, b) in beta.iter().enumerate().take(m).skip(k + 1) {
            s -= r[l][k] * b;
        }
        beta[k] = s / r[k][k];
    }
    let mut out = vec![None; columns.len()];
    for (k, j) in kept.into_iter().enumerate() {
        out[j] = Some(beta[k]);
    }
    out
}

/// Per-site effect of coverage on failure adjusted for parent values
/// (missing parent values become 0 plus a missingness indicator), clamped
/// at 0.
pub fn baah(profiles: &ProfileMatrix, table: &SiteTable) -> BTreeMap<SiteId, f64> {
    let y: Vec<f64> = profiles.rows.iter().map(|r| f64::from(r.y)).collect();
    table
        .iter()
        .filter(|s| s.kind != SiteKind::Param)
        .map(|s| {
            let mut cols = vec![
                vec![1.0; y.len()],
                profiles.rows.iter().map(|r| f64::from(u8::from(r.executed(s.id)))).collect(),
            ];
            for p in table.parents(s.id) {
                let vals: Vec<Option<f64>> = profiles.rows.iter().map(|r| numeric(r.value(*p))).collect();
                if vals.iter().any(Option::is_some) {
                    cols.push(vals.iter().map(|v| v.unwrap_or(0.0)).collect());
                    if vals.iter().any(Option::is_none) {
                        cols.push(vals.iter().map(|v| f64::from(u8::from(v.is_none()))).collect());
                    }
                }
            }
            let beta = ols(&cols, &y);
            (s.id, beta[1].unwrap_or(0.0).max(0.0))
        })
        .collect()
}

fn numeric(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Absolute mean z-score of failing-run values, standardized by the passing
/// runs' mean and sample standard deviation. With constant passing values
/// the score is 0 if failing runs match that constant and `f64::MAX`
/// otherwise. Sites with non-numeric values, no failing execution or fewer
/// than two passing executions are not scored.
pub fn esp(profiles: &ProfileMatrix, table: &SiteTable) -> BTreeMap<SiteId, f64> {
    table
        .iter()
        .filter(|s| s.kind != SiteKind::Param)
        .filter_map(|s| {
            let mut fail = Vec::new();
            let mut pass = Vec::new();
            for r in &profiles.rows {
                let v = r.value(s.id);
                if v.is_na() {
                    continue;
                }
                let x = numeric(v)?;
                if r.y == 1 {
                    fail.push(x);
                } else {
                    pass.push(x);
                }
            }
            if fail.is_empty() || pass.len() < 2 {
                return None;
            }
            let (mp, sd) = mean_sd(&pass);
            let score = if sd == 0.0 {
                if fail.iter().all(|x| *x == mp) {
                    0.0
                } else {
                    f64::MAX
                }
            } else {
                (fail.iter().map(|x| (x - mp) / sd).sum::<f64>() / fail.len() as f64).abs()
            };
            Some((s.id, score))
        })
        .collect()
}

/// Fraction of failing tests that pass once every evaluation of a whole
/// branch/loop condition is inverted. Only whole-condition sites executed by
/// at least one failing test are scored. A flipped run may take at most 20
/// times the steps of the unflipped run (at least 100 000); one that hits
/// this budget still fails.
pub fn predicate_switching(
    program: &InstrumentedProgram,
    suite: &TestSuite,
    profiles: &ProfileMatrix,
    config: RunConfig,
) -> Result<BTreeMap<SiteId, f64>, ProfileError> {
    let failing: BTreeMap<&str, &crate::profile::ProfileRow> = profiles
        .rows
        .iter()
        .filter(|r| r.y == 1)
        .map(|r| (r.test_id.as_str(), r))
        .collect();
    // Flipped runs get a step budget relative to the unflipped run, so that
    // a flip that makes a loop spin fails quickly instead of burning the
    // whole step limit.
    let tests: Vec<_> = suite
        .tests
        .iter()
        .filter_map(|t| failing.get(t.id.as_str()).map(|row| (t, *row)))
        .map(|(t, row)| {
            let (_, r) = run_test(program, t, config)?;
            let budget = r.step_count.saturating_mul(20).max(100_000).min(config.step_limit);
            Ok((t, row, budget))
        })
        .collect::<Result<Vec<_>, ProfileError>>()?;
    let conditions: Vec<SiteId> = program
        .sites
        .iter()
        .filter(|s| {
            s.kind == SiteKind::Predicate
                && program
                    .predicates
                    .get(&s.base)
                    .is_some_and(|e| e.conjunct_index == 0)
        })
        .map(|s| s.id)
        .collect();
    conditions
        .par_iter()
        .map(|site| {
            let mut fixed = 0usize;
            let mut executed = 0usize;
            for (t, row, budget) in &tests {
                if !row.executed(*site) {
                    continue;
                }
                executed += 1;
                let (_, result) = run_test(
                    program,
                    t,
                    RunConfig {
                        forced_flip: Some(*site),
                        step_limit: *budget,
                    },
                )?;
                if !t.fails(&result) {
                    fixed += 1;
                }
            }
            Ok((executed > 0).then(|| (*site, fixed as f64 / tests.len() as f64)))
        })
        .collect::<Result<Vec<_>, ProfileError>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Ranking for one of the profile-only baselines.
pub fn rank(technique: Technique, profiles: &ProfileMatrix, table: &SiteTable) -> Ranking {
    let scores = match technique {
        Technique::Ochiai => ochiai(profiles, table),
        Technique::Dstar => dstar(profiles, table),
        Technique::Baah => baah(profiles, table),
        Technique::Esp => esp(profiles, table),
        other => panic!("{other} needs more than profiles"),
    };
    Ranking::from_site_scores(technique, table, &scores, Universe::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        let s = Spectrum { ef: 2, ep: 3, nf: 0, np: 5 };
        assert!((ochiai_formula(s) - 2.0 / (2.0f64 * 5.0).sqrt()).abs() < 1e-12);
        assert!((dstar_formula(s) - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(dstar_formula(Spectrum { ef: 3, ep: 0, nf: 0, np: 1 }), f64::MAX);
        assert_eq!(ochiai_formula(Spectrum::default()), 0.0);
    }

    #[test]
    fn ols_recovers_coefficients_and_drops_collinear() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let b = ols(&[vec![1.0; 10], x.clone(), x.iter().map(|v| 2.0 * v).collect()], &y);
        assert!((b[0].unwrap() - 3.0).abs() < 1e-9);
        assert!((b[1].unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(b[2], None);
    }
}
