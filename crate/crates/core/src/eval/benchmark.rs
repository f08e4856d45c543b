use std::borrow::Cow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, Dataset, Split};
use crate::error::{Error, Result};
use crate::measures::{train_measure, History, MeasureConfig, MeasureTag, ValidationPoint};
use crate::optim::{OptimizerConfig, OptimizerKind};
use crate::seed::{derive_seed, name_id};

use super::retrieval::retrieval_loss;

/// What to run for every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkPlan {
    pub measures: Vec<MeasureTag>,
    /// Epoch budgets; each is an independent training run.
    pub epochs: Vec<usize>,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Template for every measure; `epochs` is overridden per budget.
    pub measure: MeasureConfig,
    /// Refit normalization on each training partition.
    pub strict: bool,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        Self {
            measures: MeasureTag::ALL.to_vec(),
            epochs: vec![200],
            folds: 5,
            repeats: 5,
            seed: 7,
            measure: MeasureConfig::default(),
            strict: false,
        }
    }
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::Config("no measures selected".into()));
        }
        if self.epochs.is_empty() {
            return Err(Error::Config("no epoch budget given".into()));
        }
        if self.folds < 2 || self.repeats == 0 {
            return Err(Error::Config("need at least 2 folds and 1 repeat".into()));
        }
        self.measure.validate()
    }

    /// Cross-validation splits of `ds`, shared by every measure.
    pub fn splits(&self, ds: &Dataset) -> Result<Vec<Split>> {
        stratified_kfold(
            ds.labels(),
            ds.class_names(),
            self.folds,
            self.repeats,
            derive_seed(self.seed, &[name_id(ds.name())]),
        )
    }

    /// Seed of one (dataset, measure, split) cell.
    pub fn cell_seed(&self, ds: &Dataset, tag: MeasureTag, split: usize) -> u64 {
        derive_seed(self.seed, &[name_id(ds.name()), name_id(tag.name()), split as u64])
    }

    fn config_for(&self, epochs: usize) -> MeasureConfig {
        MeasureConfig {
            epochs,
            ..self.measure.clone()
        }
    }
}

/// Result of training and evaluating one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub loss: f64,
    pub history: History,
}

/// Trains `tag` on one split and scores the validation rows.
pub fn evaluate_split(
    ds: &Dataset,
    tag: MeasureTag,
    config: &MeasureConfig,
    split: &Split,
    seed: u64,
    strict: bool,
) -> Result<SplitOutcome> {
    let data = if strict {
        Cow::Owned(ds.refit(&split.train))
    } else {
        Cow::Borrowed(ds)
    };
    let (measure, history) = train_measure::<f64>(
        tag,
        config,
        &data,
        &split.train,
        Some(&split.validation),
        seed,
    )?;
    Ok(SplitOutcome {
        loss: retrieval_loss(&measure, &data, &split.train, &split.validation)?,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub rows: usize,
    pub width: usize,
    pub classes: usize,
    pub sha256: String,
}

impl DatasetInfo {
    fn of(ds: &Dataset) -> Self {
        Self {
            id: ds.name().to_string(),
            rows: ds.len(),
            width: ds.width(),
            classes: ds.n_classes(),
            sha256: ds.provenance().sha256.clone(),
        }
    }
}

/// Settings a cell ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub master_seed: u64,
    pub optimizer: OptimizerConfig,
    pub alpha: f64,
    pub pair_mode: String,
    pub folds: usize,
    pub repeats: usize,
    pub strict: bool,
}

/// One (dataset, measure, epochs) entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub measure: MeasureTag,
    pub measure_type: String,
    pub epochs: usize,
    pub config: CellConfig,
    /// Validation retrieval loss per split, in split order.
    pub losses: Vec<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub wall_clock_s: f64,
    pub error: Option<String>,
}

/// Arithmetic mean and sample standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Caller-supplied run configuration, embedded verbatim.
    pub run_config: serde_json::Value,
    pub plan: BenchmarkPlan,
    pub datasets: Vec<DatasetInfo>,
    pub cells: Vec<CellReport>,
}

impl BenchmarkReport {
    pub fn cell(&self, dataset: &str, measure: MeasureTag, epochs: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.measure == measure && c.epochs == epochs)
    }

    /// One row per cell. Wall-clock times are left out so that reruns are
    /// byte-identical; the first line carries the run configuration.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# config={}\n", serde_json::to_string(&self.run_config)?);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset", "measure", "type", "epochs", "optimizer", "alpha", "pair_mode", "seed",
            "splits", "mean", "std", "losses", "error",
        ])?;
        for c in &self.cells {
            let losses: Vec<String> = c.losses.iter().map(f64::to_string).collect();
            w.write_record([
                c.dataset.clone(),
                c.measure.name().to_string(),
                c.measure_type.clone(),
                c.epochs.to_string(),
                c.config.optimizer.kind.name().to_string(),
                c.config.alpha.to_string(),
                c.config.pair_mode.clone(),
                c.config.master_seed.to_string(),
                c.losses.len().to_string(),
                c.mean.map(|v| v.to_string()).unwrap_or_default(),
                c.std.map(|v| v.to_string()).unwrap_or_default(),
                losses.join(";"),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        b = b.num_threads(j);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

struct Task<'a> {
    ds: &'a Dataset,
    tag: MeasureTag,
    config: MeasureConfig,
    split: &'a Split,
    seed: u64,
    /// Rough cost, used to start expensive tasks first.
    cost: f64,
}

fn cost(ds: &Dataset, tag: MeasureTag, config: &MeasureConfig) -> f64 {
    let n = ds.len() as f64;
    let per_epoch = match tag {
        MeasureTag::T11 | MeasureTag::T21 => 0.0,
        MeasureTag::T31 => n,
        MeasureTag::Chopra => n * n * 0.1,
        MeasureTag::Esnn => n * n,
        MeasureTag::Gabel => 2.0 * n * n,
    };
    per_epoch * config.epochs as f64 + n * n
}

/// Runs every task on the pool; results come back in task order.
fn run_tasks(tasks: &[Task<'_>], strict: bool, jobs: Option<usize>) -> Result<Vec<(Result<SplitOutcome>, f64)>> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| tasks[b].cost.total_cmp(&tasks[a].cost).then(a.cmp(&b)));
    let done: Vec<(usize, Result<SplitOutcome>, f64)> = pool(jobs)?.install(|| {
        order
            .par_iter()
            .map(|&i| {
                let t = &tasks[i];
                let start = Instant::now();
                let r = evaluate_split(t.ds, t.tag, &t.config, t.split, t.seed, strict);
                (i, r, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut out: Vec<Option<(Result<SplitOutcome>, f64)>> = (0..tasks.len()).map(|_| None).collect();
    for (i, r, secs) in done {
        out[i] = Some((r, secs));
    }
    Ok(out.into_iter().map(|o| o.expect("every task ran")).collect())
}

fn summarize(outcomes: &[(Result<SplitOutcome>, f64)]) -> (Vec<f64>, Option<String>, f64) {
    let mut losses = Vec::with_capacity(outcomes.len());
    let mut error = None;
    let mut secs = 0.0;
    for (r, s) in outcomes {
        secs += s;
        match r {
            Ok(o) => losses.push(o.loss),
            Err(e) if error.is_none() => error = Some(e.to_string()),
            Err(_) => {}
        }
    }
    (losses, error, secs)
}

/// Cross-validated retrieval loss of every measure and epoch budget on every
/// dataset. A failing split marks its cell as failed; other cells still run.
pub fn run_benchmark(
    datasets: &[Dataset],
    plan: &BenchmarkPlan,
    jobs: Option<usize>,
    run_config: serde_json::Value,
) -> Result<BenchmarkReport> {
    plan.validate()?;
    let splits: Vec<std::result::Result<Vec<Split>, String>> = datasets
        .iter()
        .map(|ds| plan.splits(ds).map_err(|e| e.to_string()))
        .collect();
    let mut tasks = Vec::new();
    let mut layout = Vec::new();
    for (ds, sp) in datasets.iter().zip(&splits) {
        for &tag in &plan.measures {
            for &epochs in &plan.epochs {
                let config = plan.config_for(epochs);
                let first = tasks.len();
                if let Ok(sp) = sp {
                    for (k, split) in sp.iter().enumerate() {
                        tasks.push(Task {
                            ds,
                            tag,
                            cost: cost(ds, tag, &config),
                            config: config.clone(),
                            split,
                            seed: plan.cell_seed(ds, tag, k),
                        });
                    }
                }
                layout.push((ds, sp.as_ref().err(), tag, epochs, config, first..tasks.len()));
            }
        }
    }
    log::info!("benchmark: {} training runs", tasks.len());
    let results = run_tasks(&tasks, plan.strict, jobs)?;
    let cells = layout
        .into_iter()
        .map(|(ds, split_err, tag, epochs, config, range)| {
            let (losses, error, secs) = summarize(&results[range]);
            let error = split_err.cloned().or(error);
            let (mean, std) = if error.is_none() && !losses.is_empty() {
                let (m, s) = mean_std(&losses);
                (Some(m), Some(s))
            } else {
                (None, None)
            };
            CellReport {
                dataset: ds.name().to_string(),
                measure: tag,
                measure_type: tag.type_name().to_string(),
                epochs,
                config: CellConfig {
                    master_seed: plan.seed,
                    optimizer: config.optimizer,
                    alpha: config.alpha,
                    pair_mode: config.pair_mode_for(tag).name(),
                    folds: plan.folds,
                    repeats: plan.repeats,
                    strict: plan.strict,
                },
                losses,
                mean,
                std,
                wall_clock_s: secs,
                error,
            }
        })
        .collect();
    Ok(BenchmarkReport {
        run_config,
        plan: plan.clone(),
        datasets: datasets.iter().map(DatasetInfo::of).collect(),
        cells,
    })
}

/// `n` evenly spaced values from 0 to 1 inclusive.
pub fn alpha_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("an alpha grid needs at least 2 points, got {n}")));
    }
    Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub mean: f64,
    pub std: f64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub run_config: serde_json::Value,
    pub dataset: String,
    pub epochs: usize,
    pub points: Vec<AlphaPoint>,
}

impl AlphaSweep {
    /// Grid point with the lowest mean loss; the smallest alpha wins ties.
    pub fn best(&self) -> Option<&AlphaPoint> {
        self.points.iter().fold(None, |best: Option<&AlphaPoint>, p| match best {
            Some(b) if b.mean <= p.mean => Some(b),
            _ => Some(p),
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# config={}\n", serde_json::to_string(&self.run_config)?);
        out.push_str("alpha,mean,std,losses\n");
        for p in &self.points {
            let losses: Vec<String> = p.losses.iter().map(f64::to_string).collect();
            out.push_str(&format!("{},{},{},{}\n", p.alpha, p.mean, p.std, losses.join(";")));
        }
        Ok(out)
    }
}

fn first_budget(plan: &BenchmarkPlan) -> Result<usize> {
    plan.validate()?;
    Ok(plan.epochs[0])
}

/// One cross-validated eSNN run per alpha, at the plan's first epoch budget.
/// Splits and seeds match [`run_benchmark`], so a one-point grid reproduces
/// the benchmark cell.
pub fn alpha_sweep(
    ds: &Dataset,
    grid: &[f64],
    plan: &BenchmarkPlan,
    jobs: Option<usize>,
    run_config: serde_json::Value,
) -> Result<AlphaSweep> {
    if grid.is_empty() {
        return Err(Error::Config("empty alpha grid".into()));
    }
    let epochs = first_budget(plan)?;
    let splits = plan.splits(ds)?;
    let mut tasks = Vec::new();
    for &alpha in grid {
        let config = MeasureConfig {
            alpha,
            ..plan.config_for(epochs)
        };
        config.validate()?;
        for (k, split) in splits.iter().enumerate() {
            tasks.push(Task {
                ds,
                tag: MeasureTag::Esnn,
                cost: cost(ds, MeasureTag::Esnn, &config),
                config: config.clone(),
                split,
                seed: plan.cell_seed(ds, MeasureTag::Esnn, k),
            });
        }
    }
    let results = run_tasks(&tasks, plan.strict, jobs)?;
    let points = grid
        .iter()
        .zip(results.chunks(splits.len()))
        .map(|(&alpha, chunk)| {
            let (losses, error, _) = summarize(chunk);
            if let Some(e) = error {
                return Err(Error::Protocol(format!("alpha {alpha}: {e}")));
            }
            let (mean, std) = mean_std(&losses);
            Ok(AlphaPoint {
                alpha,
                mean,
                std,
                losses,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlphaSweep {
        run_config,
        dataset: ds.name().to_string(),
        epochs,
        points,
    })
}

/// Mean training and validation curves of one optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerCurve {
    pub optimizer: OptimizerKind,
    /// Mean over splits of the training loss at each epoch.
    pub train_loss: Vec<f64>,
    /// Mean over splits of the validation retrieval loss.
    pub validation: Vec<ValidationPoint>,
    /// Final validation retrieval loss per split.
    pub final_losses: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerComparison {
    pub run_config: serde_json::Value,
    pub dataset: String,
    pub epochs: usize,
    pub curves: Vec<OptimizerCurve>,
}

impl OptimizerComparison {
    pub fn curve(&self, kind: OptimizerKind) -> Option<&OptimizerCurve> {
        self.curves.iter().find(|c| c.optimizer == kind)
    }

    /// Long format: `optimizer,epoch,train_loss,validation_loss`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# config={}\n", serde_json::to_string(&self.run_config)?);
        out.push_str("optimizer,epoch,train_loss,validation_loss\n");
        for c in &self.curves {
            for (e, l) in c.train_loss.iter().enumerate() {
                let val = c
                    .validation
                    .iter()
                    .find(|v| v.epoch == e + 1)
                    .map(|v| v.loss.to_string())
                    .unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", c.optimizer.name(), e + 1, l, val));
            }
        }
        Ok(out)
    }
}

/// eSNN trained with each optimizer on identical splits and seeds.
/// Validation loss is recorded every `validate_every` epochs.
pub fn compare_optimizers(
    ds: &Dataset,
    kinds: &[OptimizerKind],
    plan: &BenchmarkPlan,
    validate_every: usize,
    jobs: Option<usize>,
    run_config: serde_json::Value,
) -> Result<OptimizerComparison> {
    if kinds.is_empty() {
        return Err(Error::Config("no optimizers selected".into()));
    }
    let epochs = first_budget(plan)?;
    let splits = plan.splits(ds)?;
    let mut tasks = Vec::new();
    for &kind in kinds {
        let config = MeasureConfig {
            optimizer: OptimizerConfig {
                kind,
                ..plan.measure.optimizer
            },
            validate_every: Some(validate_every),
            ..plan.config_for(epochs)
        };
        config.validate()?;
        for (k, split) in splits.iter().enumerate() {
            tasks.push(Task {
                ds,
                tag: MeasureTag::Esnn,
                cost: cost(ds, MeasureTag::Esnn, &config),
                config: config.clone(),
                split,
                seed: plan.cell_seed(ds, MeasureTag::Esnn, k),
            });
        }
    }
    let results = run_tasks(&tasks, plan.strict, jobs)?;
    let curves = kinds
        .iter()
        .zip(results.chunks(splits.len()))
        .map(|(&kind, chunk)| {
            let outcomes: Vec<&SplitOutcome> = chunk
                .iter()
                .map(|(r, _)| r.as_ref().map_err(|e| Error::Protocol(format!("{}: {e}", kind.name()))))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Protocol(e.to_string()))?;
            let n = outcomes.len() as f64;
            let train_loss = (0..epochs)
                .map(|e| outcomes.iter().map(|o| o.history.train_loss[e]).sum::<f64>() / n)
                .collect();
            let validation = (0..outcomes[0].history.validation.len())
                .map(|i| ValidationPoint {
                    epoch: outcomes[0].history.validation[i].epoch,
                    loss: outcomes.iter().map(|o| o.history.validation[i].loss).sum::<f64>() / n,
                })
                .collect();
            let final_losses: Vec<f64> = outcomes.iter().map(|o| o.loss).collect();
            let (mean, std) = mean_std(&final_losses);
            Ok(OptimizerCurve {
                optimizer: kind,
                train_loss,
                validation,
                final_losses,
                mean,
                std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimizerComparison {
        run_config,
        dataset: ds.name().to_string(),
        epochs,
        curves,
    })
}
