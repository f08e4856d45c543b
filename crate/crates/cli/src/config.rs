//! Run configuration: built-in defaults, overlaid by an optional JSON file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simlearn::eval::BenchmarkPlan;
use simlearn::measures::{MeasureConfig, MeasureTag};
use simlearn::optim::{OptimizerConfig, OptimizerKind};
use simlearn::data::PairMode;
use simlearn::{Error, Result};

/// Every knob a run can set. Fields left `None` fall through to the next
/// layer; [`RunConfig::resolved`] fills the rest with defaults. The resolved
/// value is embedded verbatim in every artifact a command writes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// `all` or comma separated dataset ids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub datasets: Option<String>,
    /// `all` or comma separated measure names.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measures: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    /// `ordered-full`, `unordered-unique` or `sampled:<count>`; unset picks
    /// each measure's default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizers: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate_every: Option<usize>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))
    }

    /// `top` wins wherever it sets a field.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay_fields!(self, top; command, datasets, measures, epochs, alpha, optimizer,
            pair_mode, folds, repeats, seed, strict, out, split, grid, optimizers, validate_every);
        self
    }

    /// Fills the fields every command relies on and validates the result.
    pub fn resolved(mut self) -> Result<Self> {
        let plan = BenchmarkPlan::default();
        let measure = MeasureConfig::default();
        self.epochs.get_or_insert_with(|| plan.epochs.clone());
        self.alpha.get_or_insert(measure.alpha);
        self.optimizer.get_or_insert(measure.optimizer);
        self.folds.get_or_insert(plan.folds);
        self.repeats.get_or_insert(plan.repeats);
        self.seed.get_or_insert(plan.seed);
        self.strict.get_or_insert(plan.strict);
        self.plan()?.validate()?;
        Ok(self)
    }

    pub fn measure_config(&self) -> Result<MeasureConfig> {
        let mut cfg = MeasureConfig::default();
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(o) = self.optimizer {
            cfg.optimizer = o;
        }
        if let Some(p) = &self.pair_mode {
            cfg.pair_mode = Some(PairMode::parse(p, self.seed.unwrap_or_default())?);
        }
        if let Some(&e) = self.epochs.as_ref().and_then(|e| e.first()) {
            cfg.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn measure_tags(&self) -> Result<Vec<MeasureTag>> {
        MeasureTag::parse_list(self.measures.as_deref().unwrap_or("all"))
    }

    pub fn optimizer_kinds(&self) -> Result<Vec<OptimizerKind>> {
        self.optimizers
            .as_deref()
            .unwrap_or("rprop,adam,rmsprop")
            .split(',')
            .map(|s| s.trim().parse())
            .collect()
    }

    pub fn plan(&self) -> Result<BenchmarkPlan> {
        let d = BenchmarkPlan::default();
        Ok(BenchmarkPlan {
            measures: self.measure_tags()?,
            epochs: self.epochs.clone().unwrap_or(d.epochs),
            folds: self.folds.unwrap_or(d.folds),
            repeats: self.repeats.unwrap_or(d.repeats),
            seed: self.seed.unwrap_or(d.seed),
            measure: self.measure_config()?,
            strict: self.strict.unwrap_or(d.strict),
        })
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}
