//! Random-forest regression with mixed numeric/categorical features and
//! missing values.
//!
//! Trees are grown on bootstrap samples with variance-reduction splits.
//! Numeric features split at midpoints between consecutive distinct values;
//! categorical features order their levels by mean target and split on a
//! prefix of that order. A numeric column containing missing values is
//! imputed with its training median and gains a 0/1 "is missing" companion
//! feature; a missing categorical value is simply one more level.
//!
//! Every tree draws from its own RNG stream derived from the forest seed and
//! its index, so fitting is deterministic regardless of thread count.

mod frame;
mod tree;

pub use frame::{Cell, Column, ColumnKind, FeatureFrame};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;
use tree::{grow, FeatKind, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `max(1, floor(sqrt(p)))`.
    pub mtry: Option<usize>,
    /// Nodes with this many samples or fewer become leaves.
    pub min_node_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            min_node_size: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("no rows to fit")]
    Empty,
    #[error("target is constant; nothing to learn")]
    DegenerateData,
    #[error("every feature is constant")]
    NoVariation,
    #[error("column `{column}` has {got} cells, expected {expected}")]
    LengthMismatch { column: String, expected: usize, got: usize },
    #[error("column `{column}` row {row}: {message}")]
    KindMismatch { column: String, row: usize, message: String },
    #[error("row has {got} cells, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("n_trees must be positive")]
    NoTrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Encoder {
    Numeric {
        name: String,
        median: f64,
        missing_indicator: bool,
    },
    Categorical {
        name: String,
        /// Training levels in first-seen order; code = index. Missing values
        /// are the level `None`.
        levels: Vec<Option<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    params: ForestParams,
    mtry: usize,
    encoders: Vec<Encoder>,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(frame: &FeatureFrame, params: ForestParams) -> Result<Forest, ForestError> {
        if params.n_trees == 0 {
            return Err(ForestError::NoTrees);
        }
        let n = frame.n_rows();
        if n == 0 {
            return Err(ForestError::Empty);
        }
        frame.validate()?;
        if frame.target.iter().all(|y| *y == frame.target[0]) {
            return Err(ForestError::DegenerateData);
        }
        let mut encoders = Vec::new();
        let mut features: Vec<Vec<f64>> = Vec::new();
        let mut kinds = Vec::new();
        for col in &frame.columns {
            match col.kind {
                ColumnKind::Numeric => {
                    let mut present: Vec<f64> = col.cells.iter().filter_map(Cell::as_num).collect();
                    let median = median(&mut present);
                    let missing_indicator = present.len() < n;
                    features.push(col.cells.iter().map(|c| c.as_num().unwrap_or(median)).collect());
                    kinds.push(FeatKind::Numeric);
                    if missing_indicator {
                        features.push(col.cells.iter().map(|c| f64::from(u8::from(c.is_na()))).collect());
                        kinds.push(FeatKind::Numeric);
                    }
                    encoders.push(Encoder::Numeric {
                        name: col.name.clone(),
                        median,
                        missing_indicator,
                    });
                }
                ColumnKind::Categorical => {
                    let mut levels: Vec<Option<String>> = Vec::new();
                    let mut codes = Vec::with_capacity(n);
                    for c in &col.cells {
                        let key = c.as_cat().map(str::to_string);
                        let code = match levels.iter().position(|l| *l == key) {
                            Some(i) => i,
                            None => {
                                levels.push(key);
                                levels.len() - 1
                            }
                        };
                        codes.push(code as f64);
                    }
                    features.push(codes);
                    kinds.push(FeatKind::Categorical { n_levels: levels.len() });
                    encoders.push(Encoder::Categorical {
                        name: col.name.clone(),
                        levels,
                    });
                }
            }
        }
        let varies = features.iter().any(|f| f.iter().any(|v| *v != f[0]));
        if !varies {
            return Err(ForestError::NoVariation);
        }
        let p = features.len();
        let mtry = params
            .mtry
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
            .clamp(1, p);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(params.seed, &[t as u64]);
                grow(&features, &kinds, &frame.target, mtry, params.min_node_size, &mut rng)
            })
            .collect();
        Ok(Forest {
            params,
            mtry,
            encoders,
            trees,
        })
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Encodes a raw row (one cell per training column) into model features.
    /// Unseen categorical levels fall to the right at every split.
    pub fn encode(&self, row: &[Cell]) -> Result<Vec<f64>, ForestError> {
        if row.len() != self.encoders.len() {
            return Err(ForestError::SchemaMismatch {
                expected: self.encoders.len(),
                got: row.len(),
            });
        }
        let mut out = Vec::with_capacity(row.len() + 2);
        for (enc, cell) in self.encoders.iter().zip(row) {
            match enc {
                Encoder::Numeric {
                    median,
                    missing_indicator,
                    ..
                } => {
                    out.push(cell.as_num().unwrap_or(*median));
                    if *missing_indicator {
                        out.push(f64::from(u8::from(cell.is_na())));
                    }
                }
                Encoder::Categorical { levels, .. } => {
                    let key = cell.as_cat();
                    let code = levels
                        .iter()
                        .position(|l| l.as_deref() == key)
                        .map_or(-1.0, |i| i as f64);
                    out.push(code);
                }
            }
        }
        Ok(out)
    }

    pub fn predict_encoded(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, row: &[Cell]) -> Result<f64, ForestError> {
        Ok(self.predict_encoded(&self.encode(row)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }
}

/// Type-7 median; 0 for an empty slice.
fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> ForestParams {
        ForestParams {
            n_trees: 100,
            seed,
            ..Default::default()
        }
    }

    fn xor_frame() -> FeatureFrame {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let (x1, x2) = ((i / 2) % 2, i % 2);
            a.push(Cell::Num(x1 as f64));
            b.push(Cell::Num(x2 as f64));
            y.push(f64::from(x1 ^ x2));
        }
        let mut f = FeatureFrame::new(y);
        f.push_column("a", ColumnKind::Numeric, a);
        f.push_column("b", ColumnKind::Numeric, b);
        f
    }

    #[test]
    fn learns_xor_with_one_feature_per_split() {
        let forest = Forest::fit(&xor_frame(), params(1)).unwrap();
        assert_eq!(forest.mtry(), 1);
        for (x1, x2) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let p = forest.predict(&[Cell::Num(x1), Cell::Num(x2)]).unwrap();
            let want = if x1 != x2 { 1.0 } else { 0.0 };
            assert!((p - want).abs() < 0.1, "({x1},{x2}) -> {p}");
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let f = xor_frame();
        assert_eq!(Forest::fit(&f, params(9)).unwrap(), Forest::fit(&f, params(9)).unwrap());
        assert_ne!(Forest::fit(&f, params(9)).unwrap(), Forest::fit(&f, params(10)).unwrap());
    }

    #[test]
    fn categorical_levels_and_missing_values() {
        let mut cat = Vec::new();
        let mut num = Vec::new();
        let mut y = Vec::new();
        for i in 0..120 {
            let level = ["red", "green", "blue"][i % 3];
            cat.push(if i % 10 == 0 { Cell::Na } else { Cell::Cat(level.into()) });
            num.push(if i % 7 == 0 { Cell::Na } else { Cell::Num((i % 5) as f64) });
            y.push(if level == "green" { 1.0 } else { 0.0 });
        }
        let mut f = FeatureFrame::new(y);
        f.push_column("colour", ColumnKind::Categorical, cat);
        f.push_column("noise", ColumnKind::Numeric, num);
        let forest = Forest::fit(&f, params(3)).unwrap();
        let green = forest.predict(&[Cell::Cat("green".into()), Cell::Num(1.0)]).unwrap();
        let red = forest.predict(&[Cell::Cat("red".into()), Cell::Na]).unwrap();
        assert!(green > 0.9 && red < 0.1, "{green} {red}");
        // Unseen level and wrong arity.
        assert!(forest.predict(&[Cell::Cat("mauve".into()), Cell::Num(0.0)]).is_ok());
        assert!(matches!(forest.predict(&[Cell::Na]), Err(ForestError::SchemaMismatch { .. })));
        let back: Forest = serde_json::from_str(&forest.to_json()).unwrap();
        assert_eq!(back, forest);
    }

    #[test]
    fn rejects_constant_target() {
        let mut f = FeatureFrame::new(vec![1.0; 10]);
        f.push_column("x", ColumnKind::Numeric, (0..10).map(|i| Cell::Num(i as f64)).collect());
        assert_eq!(Forest::fit(&f, params(0)).unwrap_err(), ForestError::DegenerateData);
    }
}
