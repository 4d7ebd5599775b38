use serde::{Deserialize, Serialize};

use super::ForestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Na,
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Cell::Cat(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Cell::Na)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub cells: Vec<Cell>,
}

/// Column-major training data with a numeric target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub columns: Vec<Column>,
    pub target: Vec<f64>,
}

impl FeatureFrame {
    pub fn new(target: Vec<f64>) -> Self {
        FeatureFrame {
            columns: Vec::new(),
            target,
        }
    }

    pub fn push_column(&mut self, name: impl Into<String>, kind: ColumnKind, cells: Vec<Cell>) {
        self.columns.push(Column {
            name: name.into(),
            kind,
            cells,
        });
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn row(&self, i: usize) -> Vec<Cell> {
        self.columns.iter().map(|c| c.cells[i].clone()).collect()
    }

    pub(super) fn validate(&self) -> Result<(), ForestError> {
        let n = self.n_rows();
        for c in &self.columns {
            if c.cells.len() != n {
                return Err(ForestError::LengthMismatch {
                    column: c.name.clone(),
                    expected: n,
                    got: c.cells.len(),
                });
            }
            for (row, cell) in c.cells.iter().enumerate() {
                let ok = match (c.kind, cell) {
                    (_, Cell::Na) => true,
                    (ColumnKind::Numeric, Cell::Num(x)) => x.is_finite(),
                    (ColumnKind::Categorical, Cell::Cat(_)) => true,
                    _ => false,
                };
                if !ok {
                    return Err(ForestError::KindMismatch {
                        column: c.name.clone(),
                        row,
                        message: format!("{cell:?} in a {:?} column", c.kind),
                    });
                }
            }
        }
        Ok(())
    }
}
