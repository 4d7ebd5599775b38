//! Cost metrics and the covariate-imbalance statistic.

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::gsa::{SiteKind, SiteTable};
use crate::lang::{SiteId, Value};
use crate::profile::ProfileMatrix;
use crate::ranking::{Ranking, Technique};
use crate::transform::PredicateTable;

/// Position of the best-placed faulty element in a ranking, with ties
/// resolved by averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultRank {
    /// Elements scored strictly higher.
    pub above: usize,
    /// Size of the tie group containing the fault (including it).
    pub tied: usize,
    pub total: usize,
}

impl FaultRank {
    /// Percentage of elements examined: everything above plus half the tie
    /// group.
    pub fn exam(&self) -> f64 {
        (self.above as f64 + self.tied as f64 / 2.0) / self.total as f64 * 100.0
    }

    /// 1-based average rank within the tie group.
    pub fn effective_rank(&self) -> f64 {
        self.above as f64 + (self.tied as f64 + 1.0) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no faulty line {lines:?} appears in the {technique} ranking")]
pub struct FaultUnranked {
    pub technique: Technique,
    pub lines: Vec<u32>,
}

/// Locates the faulty lines in `ranking`. Predicate switching only ranks
/// predicates, so for it a fault off any predicate line maps to the nearest
/// predicate line(s).
pub fn fault_rank(ranking: &Ranking, faulty_lines: &[u32]) -> Result<FaultRank, FaultUnranked> {
    let ranked = ranking.lines();
    let mut targets: BTreeSet<u32> = faulty_lines.iter().copied().filter(|l| ranked.contains(l)).collect();
    if targets.is_empty() && ranking.technique == Technique::Predswitch && !ranked.is_empty() {
        let dist = |l: u32| faulty_lines.iter().map(|f| f.abs_diff(l)).min().unwrap_or(u32::MAX);
        let best = ranked.iter().map(|l| dist(*l)).min().expect("nonempty");
        targets = ranked.iter().copied().filter(|l| dist(*l) == best).collect();
    }
    let best_score = targets
        .iter()
        .filter_map(|l| ranking.entry(*l))
        .map(|e| e.score)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));
    let Some(s) = best_score else {
        return Err(FaultUnranked {
            technique: ranking.technique,
            lines: faulty_lines.to_vec(),
        });
    };
    Ok(FaultRank {
        above: ranking.entries.iter().filter(|e| e.score > s).count(),
        tied: ranking.entries.iter().filter(|e| e.score == s).count(),
        total: ranking.entries.len(),
    })
}

/// EXAM percentage; an unranked fault costs 100 and logs a warning.
pub fn exam_score(ranking: &Ranking, faulty_lines: &[u32]) -> f64 {
    match fault_rank(ranking, faulty_lines) {
        Ok(r) => r.exam(),
        Err(e) => {
            warn!("{e}; charging 100%");
            100.0
        }
    }
}

/// Number of versions whose effective fault rank is at most `n`.
pub fn hit_at_n(effective_ranks: &[f64], n: usize) -> usize {
    assert!(n >= 1, "N must be positive");
    effective_ranks.iter().filter(|r| **r <= n as f64).count()
}

/// Ranks with ties averaged, 1-based.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; `None` with fewer than three pairs or when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 3 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Imbalance {
    /// Mean over covariates of the absolute difference in group means.
    pub raw: f64,
    /// Same, with each covariate divided by its pooled standard deviation.
    pub standardized: f64,
    pub n_covariates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImbalanceError {
    #[error("predicate never took both outcomes")]
    OneGroupEmpty,
    #[error("predicate has no numeric covariate")]
    NoNumericCovariate,
}

/// Standardized mean difference of one covariate between two groups.
/// Returns (raw, standardized). A zero pooled deviation falls back to the
/// deviation of the combined sample.
pub fn mean_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let (ma, mb) = (mean(a), mean(b));
    let raw = (ma - mb).abs();
    let dof = a.len() + b.len();
    let mut sd = if dof > 2 {
        ((ss(a, ma) + ss(b, mb)) / (dof - 2) as f64).sqrt()
    } else {
        0.0
    };
    if sd == 0.0 {
        let all: Vec<f64> = a.iter().chain(b).copied().collect();
        let m = mean(&all);
        sd = if all.len() > 1 {
            (ss(&all, m) / (all.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
    }
    let std = if sd == 0.0 { 0.0 } else { raw / sd };
    (raw, std)
}

/// Imbalance of the numeric covariates of a whole-condition predicate site
/// between runs where it ended true and runs where it ended false. The
/// covariates are the non-boolean causal parents of the condition and of its
/// atoms; each is read from the snapshot taken when the reading site ran.
pub fn covariate_imbalance(
    profiles: &ProfileMatrix,
    table: &SiteTable,
    predicates: &PredicateTable,
    site: SiteId,
) -> Result<Imbalance, ImbalanceError> {
    let cond = table.get(site);
    // (reading site, covariate) pairs; atoms of the same condition are
    // expanded into their own parents.
    let mut readers: Vec<(SiteId, SiteId)> = Vec::new();
    let mut stack = vec![site];
    let mut seen = BTreeSet::new();
    while let Some(s) = stack.pop() {
        if !seen.insert(s) {
            continue;
        }
        for &p in table.parents(s) {
            let ps = table.get(p);
            let is_atom = ps.kind == SiteKind::Predicate
                && predicates
                    .get(&ps.base)
                    .zip(predicates.get(&cond.base))
                    .is_some_and(|(a, c)| a.ordinal == c.ordinal);
            if is_atom {
                stack.push(p);
            } else if !readers.iter().any(|(_, c)| *c == p) {
                readers.push((s, p));
            }
        }
    }
    let mut groups: [Vec<&crate::profile::ProfileRow>; 2] = [Vec::new(), Vec::new()];
    for r in &profiles.rows {
        if let Some(b) = r.value(site).as_bool() {
            groups[usize::from(b)].push(r);
        }
    }
    if groups[0].is_empty() || groups[1].is_empty() {
        return Err(ImbalanceError::OneGroupEmpty);
    }
    let mut diffs = Vec::new();
    for (reader, cov) in readers {
        let column = |rows: &[&crate::profile::ProfileRow]| -> Option<Vec<f64>> {
            let mut out = Vec::new();
            for r in rows {
                match r.covariate(reader, cov) {
                    Value::Int(i) => out.push(*i as f64),
                    Value::Float(f) if f.is_finite() => out.push(*f),
                    Value::Na => {}
                    _ => return None,
                }
            }
            Some(out)
        };
        let (Some(t), Some(f)) = (column(&groups[1]), column(&groups[0])) else {
            continue;
        };
        if t.is_empty() || f.is_empty() {
            continue;
        }
        diffs.push(mean_difference(&t, &f));
    }
    if diffs.is_empty() {
        return Err(ImbalanceError::NoNumericCovariate);
    }
    let n = diffs.len() as f64;
    Ok(Imbalance {
        raw: diffs.iter().map(|d| d.0).sum::<f64>() / n,
        standardized: diffs.iter().map(|d| d.1).sum::<f64>() / n,
        n_covariates: diffs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::{ElementKind, RankEntry};

    fn ranking(scores: &[f64]) -> Ranking {
        Ranking {
            technique: Technique::Ochiai,
            entries: scores
                .iter()
                .enumerate()
                .map(|(i, s)| RankEntry {
                    line: i as u32 + 1,
                    kind: ElementKind::Assignment,
                    score: *s,
                    site_ids: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn exam_examples() {
        let mut s = vec![0.1; 10];
        s[0] = 0.9;
        assert_eq!(exam_score(&ranking(&s), &[1]), 5.0);
        let s = [0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.0];
        assert_eq!(exam_score(&ranking(&s), &[3]), 20.0);
        assert_eq!(exam_score(&ranking(&s), &[10]), 95.0);
        assert_eq!(exam_score(&ranking(&s), &[42]), 100.0);
        assert_eq!(fault_rank(&ranking(&s), &[2]).unwrap().effective_rank(), 2.5);
    }

    #[test]
    fn predicate_switching_uses_nearest_predicate() {
        let mut r = ranking(&[0.5, 0.0, 1.0]);
        r.technique = Technique::Predswitch;
        r.entries.retain(|e| e.line != 2);
        // Fault on line 2 is equidistant from lines 1 and 3; the better one counts.
        assert_eq!(fault_rank(&r, &[2]).unwrap().above, 0);
    }

    #[test]
    fn hits() {
        assert_eq!(hit_at_n(&[1.0, 5.0, 12.0], 10), 2);
        assert_eq!(hit_at_n(&[2.5], 2), 0);
        assert_eq!(hit_at_n(&[1.0], 1), 1);
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn mean_difference_examples() {
        assert_eq!(mean_difference(&[3.0, 4.0], &[3.0, 4.0]).1, 0.0);
        // Group means 0 and 1, pooled sd 1.
        let a = [-1.0, 1.0, 0.0, 0.0];
        let b = [0.0, 2.0, 1.0, 1.0];
        let (raw, std) = mean_difference(&b, &a);
        assert_eq!(raw, 1.0);
        let pooled = ((2.0 + 2.0) / 6.0f64).sqrt();
        assert!((std - 1.0 / pooled).abs() < 1e-12);
        let (_, s) = mean_difference(&[0.0, 2.0, 0.0, 2.0], &[1.0, 3.0, 1.0, 3.0]);
        assert!((s - 1.0 / (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
