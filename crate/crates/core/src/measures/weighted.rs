//! Weighted-sum measures over the original attributes with uniform weights.

use serde::{Deserialize, Serialize};

use crate::data::{Attribute, AttributeKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-attribute local similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LocalSim {
    /// `(1 - |a - b|)^exponent` on a single scaled column.
    Numeric {
        column: usize,
        min: f64,
        max: f64,
        mean: f64,
        std: f64,
        exponent: f64,
    },
    /// 1 when the one-hot groups are identical, 0 otherwise.
    Categorical {
        columns: std::ops::Range<usize>,
        categories: usize,
    },
}

impl LocalSim {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            LocalSim::Numeric { column, exponent, .. } => {
                let base = 1.0 - (x[*column] - y[*column]).abs();
                if *exponent == 1.0 {
                    base
                } else {
                    base.powf(*exponent)
                }
            }
            LocalSim::Categorical { columns, .. } => {
                if x[columns.clone()] == y[columns.clone()] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Local similarities of every attribute, combined with weights `1/M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSimParams {
    pub locals: Vec<LocalSim>,
    pub width: usize,
}

impl LocalSimParams {
    /// Plain `1 - |a - b|` and equality locals.
    pub fn uniform(attributes: &[Attribute], width: usize) -> Result<Self> {
        let locals = attributes
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => LocalSim::Numeric {
                    column: a.columns.start,
                    min: 0.0,
                    max: 1.0,
                    mean: 0.5,
                    std: 0.0,
                    exponent: 1.0,
                },
                AttributeKind::Categorical { categories } => LocalSim::Categorical {
                    columns: a.columns.clone(),
                    categories: categories.len(),
                },
            })
            .collect();
        Self::checked(locals, width)
    }

    /// Polynomial locals whose exponent `m = clamp(range / (4 sd), 1, 4)` is
    /// estimated on `rows` of `features`. Constant columns get `m = 1`.
    pub fn fit(attributes: &[Attribute], features: &Matrix<f64>, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("cannot fit local similarities on zero rows".into()));
        }
        let locals = attributes
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => {
                    let column = a.columns.start;
                    let values: Vec<f64> = rows.iter().map(|&r| features.row(r)[column]).collect();
                    let n = values.len() as f64;
                    let mean = values.iter().sum::<f64>() / n;
                    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let std = if values.len() > 1 {
                        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
                            .sqrt()
                    } else {
                        0.0
                    };
                    let exponent = if std > 0.0 {
                        ((max - min) / (4.0 * std)).clamp(1.0, 4.0)
                    } else {
                        1.0
                    };
                    LocalSim::Numeric {
                        column,
                        min,
                        max,
                        mean: mean.clamp(min, max),
                        std,
                        exponent,
                    }
                }
                AttributeKind::Categorical { categories } => LocalSim::Categorical {
                    columns: a.columns.clone(),
                    categories: categories.len(),
                },
            })
            .collect();
        Self::checked(locals, features.cols())
    }

    fn checked(locals: Vec<LocalSim>, width: usize) -> Result<Self> {
        if locals.is_empty() {
            return Err(Error::Config("weighted sum needs at least one attribute".into()));
        }
        for l in &locals {
            let end = match l {
                LocalSim::Numeric { column, .. } => column + 1,
                LocalSim::Categorical { columns, .. } => columns.end,
            };
            if end > width {
                return Err(Error::shape(width, end, "attribute columns"));
            }
        }
        Ok(Self { locals, width })
    }

    /// Global similarity of two preprocessed rows.
    pub fn similarity(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.width {
            return Err(Error::shape(self.width, x.len(), "left input width"));
        }
        if y.len() != self.width {
            return Err(Error::shape(self.width, y.len(), "right input width"));
        }
        Ok(self.eval(x, y))
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sum: f64 = self.locals.iter().map(|l| l.eval(x, y)).sum();
        sum / self.locals.len() as f64
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.locals
            .iter()
            .filter_map(|l| match l {
                LocalSim::Numeric { exponent, .. } => Some(*exponent),
                LocalSim::Categorical { .. } => None,
            })
            .collect()
    }
}
