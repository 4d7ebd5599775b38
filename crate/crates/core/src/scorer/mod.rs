//! Causal suspiciousness of recording sites.
//!
//! For a site T with causal parents C, a forest is fit to predict the test
//! outcome Y from (T, C) over the runs where T executed. For each
//! representative value t of T, the counterfactual failure rate is the mean
//! prediction with T set to t and C left as observed. The site's score is
//! the spread (max − min) of those rates.

pub mod reps;

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forest::{Cell, ColumnKind, FeatureFrame, Forest, ForestError, ForestParams};
use crate::gsa::{SiteKind, SiteTable};
use crate::lang::{SiteId, Value};
use crate::profile::ProfileMatrix;
use crate::ranking::{Ranking, Technique, Universe};
use crate::seed;

#[derive(Debug, Clone)]
pub struct ScoreConfig {
    pub seed: u64,
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    /// Sites executed in fewer runs are not scored.
    pub min_rows: usize,
    pub include_phi: bool,
    /// Fit on the treatment alone (no confounder adjustment).
    pub unadjusted: bool,
    /// Parents to leave out of a site's covariate set.
    pub drop_covariates: BTreeMap<SiteId, BTreeSet<SiteId>>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            seed: 42,
            n_trees: 500,
            mtry: None,
            min_node_size: 5,
            min_rows: 6,
            include_phi: false,
            unadjusted: false,
            drop_covariates: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMean {
    /// Representative value, rendered.
    pub value: String,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteScore {
    pub site: SiteId,
    pub name: String,
    pub line: u32,
    pub kind: SiteKind,
    pub n_rows: usize,
    pub covariates: Vec<SiteId>,
    /// `None` when the site was skipped; see `note`.
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    pub reps: Vec<RepMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub sites: Vec<SiteScore>,
    pub ranking: Ranking,
}

impl ScoreReport {
    pub fn score_of(&self, site: SiteId) -> Option<f64> {
        self.sites.iter().find(|s| s.site == site).and_then(|s| s.score)
    }

    /// Human-readable per-site breakdown.
    pub fn verbose(&self) -> String {
        let mut out = String::new();
        for s in &self.sites {
            let score = s.score.map_or("-".to_string(), |x| format!("{x:.4}"));
            out.push_str(&format!("{} (line {}, {:?}, n={}): {score}", s.name, s.line, s.kind, s.n_rows));
            if let Some(n) = &s.note {
                out.push_str(&format!(" [{n}]"));
            }
            out.push('\n');
            for r in &s.reps {
                out.push_str(&format!("    {} -> {:.4}\n", r.value, r.mean));
            }
        }
        out
    }
}

/// How the treatment column is encoded and which values it is set to.
#[derive(Debug, Clone, PartialEq)]
pub struct Treatment {
    pub kind: ColumnKind,
    /// Observed value per row, encoded.
    pub cells: Vec<Cell>,
    /// Interventions, encoded, with display labels.
    pub reps: Vec<(Cell, String)>,
}

/// Encodes observed treatment values and picks representative values:
/// every observed boolean; de-duplicated 5%, 15%, ..., 95% quantiles of numbers;
/// one value per string cluster. Mixed-type columns fall back to one level
/// per distinct rendered value.
pub fn treatment(values: &[&Value], dim: usize) -> Treatment {
    let all = |f: fn(&Value) -> bool| values.iter().all(|v| f(v));
    if all(|v| matches!(v, Value::Bool(_))) {
        let cells: Vec<Cell> = values.iter().map(|v| Cell::Num(v.as_f64().unwrap())).collect();
        let seen: BTreeSet<bool> = values.iter().filter_map(|v| v.as_bool()).collect();
        let reps = seen
            .into_iter()
            .map(|b| (Cell::Num(f64::from(u8::from(b))), b.to_string()))
            .collect();
        return Treatment {
            kind: ColumnKind::Numeric,
            cells,
            reps,
        };
    }
    let numeric: Option<Vec<f64>> = values
        .iter()
        .map(|v| match v {
            Value::Int(_) | Value::Float(_) => v.as_f64().filter(|x| x.is_finite()),
            _ => None,
        })
        .collect();
    if let Some(xs) = numeric {
        let reps = reps::numeric_reps(&xs)
            .into_iter()
            .map(|q| (Cell::Num(q), crate::lang::value::format_float(q)))
            .collect();
        return Treatment {
            kind: ColumnKind::Numeric,
            cells: xs.into_iter().map(Cell::Num).collect(),
            reps,
        };
    }
    if all(|v| matches!(v, Value::Str(_))) {
        let strings: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let c = reps::cluster_strings(&strings, 2 * dim);
        let label = |l: usize| format!("cluster{l}");
        let cells = c.labels.iter().map(|l| Cell::Cat(label(*l))).collect();
        let mut reps = Vec::new();
        for l in 0..c.n_clusters {
            let example = &strings[c.labels.iter().position(|x| *x == l).expect("cluster has a member")];
            reps.push((Cell::Cat(label(l)), format!("{} (e.g. {example:?})", label(l))));
        }
        return Treatment {
            kind: ColumnKind::Categorical,
            cells,
            reps,
        };
    }
    let render = |v: &Value| format!("{}:{v}", v.type_name());
    let cells = values.iter().map(|v| Cell::Cat(render(v))).collect();
    let levels: BTreeSet<String> = values.iter().map(|v| render(v)).collect();
    Treatment {
        kind: ColumnKind::Categorical,
        cells,
        reps: levels.into_iter().map(|l| (Cell::Cat(l.clone()), l)).collect(),
    }
}

/// Encodes a covariate column: numbers and booleans numerically, anything
/// containing strings categorically. NA stays NA.
pub fn covariate_column(values: &[&Value]) -> (ColumnKind, Vec<Cell>) {
    let categorical = values.iter().any(|v| matches!(v, Value::Str(_)));
    if categorical {
        let cells = values
            .iter()
            .map(|v| match v {
                Value::Na => Cell::Na,
                Value::Str(s) => Cell::Cat(s.clone()),
                other => Cell::Cat(format!("{}:{other}", other.type_name())),
            })
            .collect();
        (ColumnKind::Categorical, cells)
    } else {
        let cells = values
            .iter()
            .map(|v| match v.as_f64() {
                Some(x) if x.is_finite() => Cell::Num(x),
                _ => Cell::Na,
            })
            .collect();
        (ColumnKind::Numeric, cells)
    }
}

/// Mean prediction over all rows of `frame` with column `t` replaced by each
/// intervention in turn.
pub fn counterfactual_means(forest: &Forest, frame: &FeatureFrame, t: usize, interventions: &[Cell]) -> Result<Vec<f64>, ForestError> {
    let n = frame.n_rows();
    let mut encoded_rows = Vec::with_capacity(n);
    for i in 0..n {
        encoded_rows.push(frame.row(i));
    }
    interventions
        .iter()
        .map(|cell| {
            let mut total = 0.0;
            for row in &encoded_rows {
                let mut r = row.clone();
                r[t] = cell.clone();
                total += forest.predict(&r)?;
            }
            Ok(total / n as f64)
        })
        .collect()
}

/// Largest difference between counterfactual failure rates.
pub fn suspiciousness(means: &[f64]) -> f64 {
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    if means.is_empty() {
        0.0
    } else {
        max - min
    }
}

struct Prepared {
    frame: FeatureFrame,
    interventions: Vec<Cell>,
    labels: Vec<String>,
    params: ForestParams,
}

/// Applies the eligibility rules to one site. Returns the partially filled
/// score and, when a model is needed, its training frame.
fn prepare(profiles: &ProfileMatrix, table: &SiteTable, site: SiteId, config: &ScoreConfig) -> (SiteScore, Option<Prepared>) {
    let info = table.get(site);
    let rows: Vec<_> = profiles.rows.iter().filter(|r| r.executed(site)).collect();
    let dropped = config.drop_covariates.get(&site);
    let covariates: Vec<SiteId> = if config.unadjusted {
        Vec::new()
    } else {
        table
            .parents(site)
            .iter()
            .copied()
            .filter(|p| dropped.is_none_or(|d| !d.contains(p)))
            .collect()
    };
    let mut out = SiteScore {
        site,
        name: info.name.clone(),
        line: info.line,
        kind: info.kind,
        n_rows: rows.len(),
        covariates: covariates.clone(),
        score: None,
        note: None,
        reps: Vec::new(),
    };
    if rows.len() < config.min_rows {
        out.note = Some(format!("executed in {} runs, fewer than {}", rows.len(), config.min_rows));
        return (out, None);
    }
    let y: Vec<f64> = rows.iter().map(|r| f64::from(r.y)).collect();
    let values: Vec<&Value> = rows.iter().map(|r| r.value(site)).collect();
    let distinct = {
        let mut seen: Vec<&Value> = Vec::new();
        for v in &values {
            if !seen.contains(v) {
                seen.push(v);
            }
        }
        seen.len()
    };
    if distinct < 2 {
        out.note = Some("treatment takes a single value".into());
        return (out, None);
    }
    let t = treatment(&values, 1 + covariates.len());
    if y.iter().all(|v| *v == y[0]) {
        out.score = Some(0.0);
        out.note = Some("outcome constant where executed".into());
        out.reps = t.reps.iter().map(|(_, l)| RepMean { value: l.clone(), mean: y[0] }).collect();
        return (out, None);
    }
    let mut frame = FeatureFrame::new(y);
    frame.push_column(info.name.clone(), t.kind, t.cells.clone());
    for p in &covariates {
        let vals: Vec<&Value> = rows.iter().map(|r| r.covariate(site, *p)).collect();
        let (kind, cells) = covariate_column(&vals);
        frame.push_column(table.get(*p).name.clone(), kind, cells);
    }
    let params = ForestParams {
        n_trees: config.n_trees,
        mtry: config.mtry,
        min_node_size: config.min_node_size,
        seed: seed::derive(config.seed, &[u64::from(site.0)]),
    };
    let (interventions, labels) = t.reps.into_iter().unzip();
    (
        out,
        Some(Prepared {
            frame,
            interventions,
            labels,
            params,
        }),
    )
}

/// Scores one site.
pub fn score_site(profiles: &ProfileMatrix, table: &SiteTable, site: SiteId, config: &ScoreConfig) -> SiteScore {
    let (mut out, prepared) = prepare(profiles, table, site, config);
    let Some(p) = prepared else {
        return out;
    };
    let result = Forest::fit(&p.frame, p.params).and_then(|f| counterfactual_means(&f, &p.frame, 0, &p.interventions));
    match result {
        Ok(means) => {
            out.score = Some(suspiciousness(&means));
            out.reps = p
                .labels
                .into_iter()
                .zip(means)
                .map(|(value, mean)| RepMean { value, mean })
                .collect();
        }
        Err(e) => {
            debug!("site {}: {e}", out.name);
            out.note = Some(e.to_string());
        }
    }
    out
}

/// The forest [`score_site`] fits for `site`, if the site needs one. Column 0
/// is the treatment, followed by the covariates in parent order.
pub fn site_forest(profiles: &ProfileMatrix, table: &SiteTable, site: SiteId, config: &ScoreConfig) -> Option<Forest> {
    let (_, prepared) = prepare(profiles, table, site, config);
    prepared.and_then(|p| Forest::fit(&p.frame, p.params).ok())
}

/// Scores every eligible site and ranks statement lines.
pub fn score_all(profiles: &ProfileMatrix, table: &SiteTable, config: &ScoreConfig) -> ScoreReport {
    let eligible: Vec<SiteId> = table
        .iter()
        .filter(|s| s.kind != SiteKind::Phi || config.include_phi)
        .map(|s| s.id)
        .collect();
    let sites: Vec<SiteScore> = eligible
        .par_iter()
        .map(|s| score_site(profiles, table, *s, config))
        .collect();
    let scores: BTreeMap<SiteId, f64> = sites.iter().filter_map(|s| s.score.map(|x| (s.site, x))).collect();
    let ranking = Ranking::from_site_scores(
        Technique::Unival,
        table,
        &scores,
        Universe {
            include_phi: config.include_phi,
            predicates_only: false,
        },
    );
    ScoreReport { sites, ranking }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suspiciousness_is_spread() {
        assert_eq!(suspiciousness(&[0.2, 0.9, 0.5]), 0.9 - 0.2);
        assert_eq!(suspiciousness(&[0.4]), 0.0);
        assert_eq!(suspiciousness(&[]), 0.0);
    }

    #[test]
    fn treatment_kinds() {
        let b = [Value::Bool(true), Value::Bool(true)];
        let t = treatment(&b.iter().collect::<Vec<_>>(), 1);
        assert_eq!(t.reps.len(), 1);
        let n: Vec<Value> = (0..40).map(Value::Int).collect();
        let t = treatment(&n.iter().collect::<Vec<_>>(), 1);
        assert_eq!(t.reps.len(), 10);
        assert!(matches!(t.reps[0].0, Cell::Num(q) if (q - 1.95).abs() < 1e-12));
        let mixed = [Value::Int(1), Value::Str("1".into())];
        let t = treatment(&mixed.iter().collect::<Vec<_>>(), 1);
        assert_eq!(t.kind, ColumnKind::Categorical);
        assert_eq!(t.reps.len(), 2);
    }
}
