use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use simlearn::data::{default_data_dir, Dataset, FileStatus, Manifest, Split, DATA_DIR_ENV};
use simlearn::eval::{
    alpha_grid, alpha_sweep, compare_optimizers, export_embeddings, render_table, retrieval_loss,
    run_benchmark, BenchmarkPlan,
};
use simlearn::measures::{train_measure, Measure, MeasureDocument, MeasureTag};
use simlearn::{Error, Result};

use crate::config::RunConfig;
use crate::{Cli, Command};

const DEFAULT_OUT_DIR: &str = "results";
const DEFAULT_GRID: usize = 100;
const DEFAULT_VALIDATE_EVERY: usize = 10;

/// What `train` writes and `eval` / `export-embeddings` read back.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    run_config: RunConfig,
    dataset: String,
    split: usize,
    validation_loss: f64,
    measure: MeasureDocument,
}

struct Context {
    data_dir: PathBuf,
    jobs: Option<usize>,
    file: RunConfig,
}

impl Context {
    fn config(&self, flags: RunConfig) -> Result<RunConfig> {
        self.file.clone().overlay(flags).resolved()
    }

    fn manifest(&self) -> Result<Manifest> {
        Manifest::load(&self.data_dir)
    }

    fn load(&self, id: &str) -> Result<Dataset> {
        self.manifest()?.entry(id)?.load(&self.data_dir)
    }
}

pub(crate) fn run(cli: Cli) -> Result<()> {
    if cli.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let file = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let data_dir = cli
        .data_dir
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(default_data_dir);
    let ctx = Context { data_dir, jobs: cli.jobs, file };
    match cli.command {
        Command::Fetch { datasets, offline, force } => fetch(&ctx, &datasets, offline, force),
        Command::Train { dataset, measure, split, knobs } => {
            let flags = RunConfig {
                datasets: Some(dataset),
                measures: Some(measure),
                split,
                ..knobs.into_config("train")?
            };
            train(&ctx, ctx.config(flags)?)
        }
        Command::Eval { model, dataset, split } => eval(&ctx, &model, dataset, split),
        Command::Benchmark { datasets, measures, knobs } => {
            let flags = RunConfig {
                datasets,
                measures,
                ..knobs.into_config("benchmark")?
            };
            benchmark(&ctx, ctx.config(flags)?)
        }
        Command::SweepAlpha { dataset, grid, knobs } => {
            let flags = RunConfig {
                datasets: Some(dataset),
                grid,
                ..knobs.into_config("sweep-alpha")?
            };
            sweep(&ctx, ctx.config(flags)?)
        }
        Command::CompareOptimizers { dataset, optimizers, validate_every, knobs } => {
            let flags = RunConfig {
                datasets: Some(dataset),
                optimizers,
                validate_every,
                ..knobs.into_config("compare-optimizers")?
            };
            compare(&ctx, ctx.config(flags)?)
        }
        Command::ExportEmbeddings { model, dataset, all_rows, untrained, out } => {
            embeddings(&ctx, &model, dataset, all_rows, untrained, out)
        }
    }
}

fn fetch(ctx: &Context, selector: &str, offline: bool, force: bool) -> Result<()> {
    let manifest = ctx.manifest()?;
    let mut failures = Vec::new();
    for entry in manifest.select(selector)? {
        let status = match entry.check(&ctx.data_dir) {
            Ok(FileStatus::Verified) if !force => FileStatus::Verified,
            Ok(status) if offline => status,
            Err(e) if offline => {
                failures.push(e.to_string());
                continue;
            }
            _ => match download(&entry.url).and_then(|bytes| entry.install(&ctx.data_dir, &bytes)) {
                Ok(s) => s,
                Err(e) => {
                    failures.push(format!("{}: {e}", entry.id));
                    continue;
                }
            },
        };
        match status {
            FileStatus::Verified => println!("ok        {}", entry.id),
            FileStatus::Unpinned { sha256 } => println!("unpinned  {} sha256={sha256}", entry.id),
            FileStatus::Missing => failures.push(format!(
                "{}: missing at {}",
                entry.id,
                entry.path(&ctx.data_dir).display()
            )),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Data {
            path: ctx.data_dir.clone(),
            message: failures.join("; "),
        })
    }
}

fn download(url: &str) -> Result<Vec<u8>> {
    info!("downloading {url}");
    let failed = |e: ureq::Error| Error::Data {
        path: PathBuf::from(url),
        message: format!("download failed: {e}"),
    };
    ureq::get(url)
        .call()
        .map_err(failed)?
        .body_mut()
        .read_to_vec()
        .map_err(failed)
}

fn single_tag(cfg: &RunConfig) -> Result<MeasureTag> {
    match cfg.measure_tags()?.as_slice() {
        [tag] => Ok(*tag),
        _ => Err(Error::Config("exactly one measure expected".into())),
    }
}

fn split_of<'a>(splits: &'a [Split], k: usize) -> Result<&'a Split> {
    splits
        .get(k)
        .ok_or_else(|| Error::Config(format!("split {k} out of range, {} splits", splits.len())))
}

/// The dataset as the split sees it: renormalized on the training rows in
/// strict mode.
fn prepared(ds: Dataset, plan: &BenchmarkPlan, split: &Split) -> Dataset {
    if plan.strict {
        ds.refit(&split.train)
    } else {
        ds
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn train(ctx: &Context, cfg: RunConfig) -> Result<()> {
    let id = cfg.datasets.clone().unwrap_or_default();
    let tag = single_tag(&cfg)?;
    let plan = cfg.plan()?;
    let ds = ctx.load(&id)?;
    let splits = plan.splits(&ds)?;
    let k = cfg.split.unwrap_or(0);
    let split = split_of(&splits, k)?;
    let ds = prepared(ds, &plan, split);
    let seed = plan.cell_seed(&ds, tag, k);
    let (measure, history) = train_measure::<f64>(tag, &plan.measure, &ds, &split.train, None, seed)?;
    let loss = retrieval_loss(&measure, &ds, &split.train, &split.validation)?;
    if let Some(last) = history.train_loss.last() {
        info!("final training loss {last}");
    }
    let path = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}-{id}-split{k}.json", tag.name())));
    let file = ModelFile {
        run_config: cfg,
        dataset: id.clone(),
        split: k,
        validation_loss: loss,
        measure: measure.to_document(),
    };
    write(&path, &serde_json::to_string_pretty(&file)?)?;
    println!("{id} {tag} split {k}: validation retrieval loss {loss}");
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Data {
        path: path.to_owned(),
        message: format!("not a model file: {e}"),
    })
}

fn eval(ctx: &Context, model: &Path, dataset: Option<String>, split: Option<usize>) -> Result<()> {
    let file = read_model(model)?;
    let id = dataset.unwrap_or(file.dataset);
    let k = split.unwrap_or(file.split);
    let plan = file.run_config.plan()?;
    let ds = ctx.load(&id)?;
    let splits = plan.splits(&ds)?;
    let split = split_of(&splits, k)?;
    let ds = prepared(ds, &plan, split);
    let measure = Measure::<f64>::from_document(&file.measure)?;
    let loss = retrieval_loss(&measure, &ds, &split.train, &split.validation)?;
    println!("{id} {} split {k}: validation retrieval loss {loss}", measure.tag());
    Ok(())
}

fn load_selected(ctx: &Context, cfg: &RunConfig) -> Result<Vec<Dataset>> {
    let manifest = ctx.manifest()?;
    manifest
        .select(cfg.datasets.as_deref().unwrap_or("all"))?
        .into_iter()
        .map(|e| e.load(&ctx.data_dir))
        .collect()
}

fn benchmark(ctx: &Context, cfg: RunConfig) -> Result<()> {
    let plan = cfg.plan()?;
    let datasets = load_selected(ctx, &cfg)?;
    let dir = out_dir(&cfg);
    let report = run_benchmark(&datasets, &plan, ctx.jobs, cfg.to_value())?;
    write(&dir.join("benchmark.csv"), &report.to_csv()?)?;
    write(&dir.join("benchmark.json"), &report.to_json()?)?;
    for &epochs in &plan.epochs {
        let table = render_table(&report, epochs);
        write(&dir.join(format!("table-{epochs}.md")), &table)?;
        println!("{epochs} epochs\n\n{table}");
    }
    let failed: Vec<String> = report
        .cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| format!("{}/{}: {e}", c.dataset, c.measure)))
        .collect();
    if !failed.is_empty() {
        eprintln!("{} cells failed: {}", failed.len(), failed.join("; "));
    }
    Ok(())
}

fn sweep(ctx: &Context, cfg: RunConfig) -> Result<()> {
    let plan = cfg.plan()?;
    let ds = ctx.load(cfg.datasets.as_deref().unwrap_or_default())?;
    let grid = alpha_grid(cfg.grid.unwrap_or(DEFAULT_GRID))?;
    let result = alpha_sweep(&ds, &grid, &plan, ctx.jobs, cfg.to_value())?;
    write(&out_dir(&cfg).join("alpha.csv"), &result.to_csv()?)?;
    if let Some(best) = result.best() {
        println!("best alpha {} with mean loss {} (std {})", best.alpha, best.mean, best.std);
    }
    Ok(())
}

fn compare(ctx: &Context, cfg: RunConfig) -> Result<()> {
    let plan = cfg.plan()?;
    let kinds = cfg.optimizer_kinds()?;
    let ds = ctx.load(cfg.datasets.as_deref().unwrap_or_default())?;
    let every = cfg.validate_every.unwrap_or(DEFAULT_VALIDATE_EVERY);
    let result = compare_optimizers(&ds, &kinds, &plan, every, ctx.jobs, cfg.to_value())?;
    write(&out_dir(&cfg).join("optimizers.csv"), &result.to_csv()?)?;
    for c in &result.curves {
        println!("{:<8} mean {:.4} std {:.4}", c.optimizer.name(), c.mean, c.std);
    }
    Ok(())
}

fn embeddings(
    ctx: &Context,
    model: &Path,
    dataset: Option<String>,
    all_rows: bool,
    untrained: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let file = read_model(model)?;
    let id = dataset.unwrap_or_else(|| file.dataset.clone());
    let plan = file.run_config.plan()?;
    let ds = ctx.load(&id)?;
    let splits = plan.splits(&ds)?;
    let split = split_of(&splits, file.split)?;
    let ds = prepared(ds, &plan, split);
    let trained = Measure::<f64>::from_document(&file.measure)?;
    let measure = if untrained {
        Measure::for_dataset(trained.tag(), trained.config().clone(), &ds, trained.seed())?
    } else {
        trained
    };
    let rows: Vec<usize> = if all_rows {
        (0..ds.len()).collect()
    } else {
        split.validation.clone()
    };
    let export = export_embeddings(&measure, &ds, &rows)?;
    let header = serde_json::json!({
        "command": "export-embeddings",
        "model": model,
        "dataset": id,
        "all_rows": all_rows,
        "untrained": untrained,
        "run_config": file.run_config,
    });
    let path = out.unwrap_or_else(|| PathBuf::from(format!("embeddings-{id}.csv")));
    write(&path, &format!("# config={header}\n{}", export.to_csv()))?;
    println!("{} rows, silhouette {}", rows.len(), export.silhouette);
    Ok(())
}
