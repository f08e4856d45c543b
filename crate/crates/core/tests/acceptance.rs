//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! `cargo test -p simlearn --test acceptance -- 3 7` runs criteria 3 and 7 only.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use simlearn::data::{default_data_dir, pairs_over, Dataset, Manifest, PairMode, PairTriplet};
use simlearn::eval::{
    alpha_grid, alpha_sweep, compare_optimizers, export_embeddings, render_table, retrieval_loss,
    run_benchmark, BenchmarkPlan, BenchmarkReport,
};
use simlearn::measures::{esnn_loss, one_hot, train_measure, Measure, MeasureConfig, MeasureTag};
use simlearn::nn::{init_network, Activation, Network};
use simlearn::optim::OptimizerKind;
use simlearn::Matrix;

const SUBSET: [&str; 4] = ["bal", "iris", "hay", "ttt"];
const EPOCHS: usize = 200;
const TABLE_TOLERANCE: f64 = 0.06;
const GRADIENT_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const SWEEP_EPOCHS: usize = 40;
const SWEEP_POINTS: usize = 21;
const SWEEP_BAND: (f64, f64) = (0.05, 0.35);

/// Published mean retrieval losses after 200 epochs, in `MeasureTag::ALL` order:
/// esnn, chopra, gabel, t31, t11, t21.
const REFERENCE: [(&str, [f64; 6]); 4] = [
    ("bal", [0.01, 0.00, 0.14, 0.10, 0.42, 0.81]),
    ("iris", [0.04, 0.03, 0.18, 0.07, 0.05, 0.04]),
    ("hay", [0.19, 0.21, 0.26, 0.17, 0.33, 0.37]),
    ("ttt", [0.03, 0.03, 0.17, 0.07, 0.32, 0.07]),
];

type Verdict = Result<String, String>;

fn main() {
    let filter: BTreeSet<usize> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.trim_start_matches(['c', 'C']).parse().ok())
        .collect();
    let criteria: [(usize, &str, fn() -> Verdict); 11] = [
        (1, "table reproduction at 200 epochs", table_reproduction),
        (2, "eSNN average below chopra and gabel", ordering),
        (3, "symmetric measures are bit-exact symmetric", symmetry),
        (4, "eSNN self-similarity is constant", self_similarity),
        (5, "eSNN loss gradient matches finite differences", gradient_check),
        (6, "pair builder counts", pair_counts),
        (7, "retrieval loss equals brute-force oracle", retrieval_oracle),
        (8, "RProp beats Adam and RMSProp on bal", optimizer_comparison),
        (9, "alpha sweep minimum inside band", alpha_band),
        (10, "training separates held-out embeddings", embedding_separation),
        (11, "benchmark CSV is deterministic", determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  criterion {id:>2}  {name}: {detail} [{secs:.0}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {id:>2}  {name}: {detail} [{secs:.0}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn dataset(id: &str) -> &'static Dataset {
    static CACHE: OnceLock<Vec<Dataset>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        let dir = default_data_dir();
        let manifest = Manifest::load(&dir).unwrap();
        SUBSET.iter().map(|id| manifest.entry(id).unwrap().load(&dir).unwrap()).collect()
    });
    all.iter().find(|d| d.name() == id).unwrap()
}

fn run_config(what: &str) -> serde_json::Value {
    json!({ "suite": "acceptance", "run": what })
}

fn benchmark() -> &'static BenchmarkReport {
    static REPORT: OnceLock<BenchmarkReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let datasets: Vec<Dataset> = SUBSET.iter().map(|id| dataset(id).clone()).collect();
        let plan = BenchmarkPlan {
            epochs: vec![EPOCHS],
            ..Default::default()
        };
        let report = run_benchmark(&datasets, &plan, None, run_config("table")).unwrap();
        let dir = out_dir();
        std::fs::write(dir.join("benchmark.csv"), report.to_csv().unwrap()).unwrap();
        let table = render_table(&report, EPOCHS);
        std::fs::write(dir.join("benchmark.md"), &table).unwrap();
        for line in table.lines() {
            println!("      {line}");
        }
        report
    })
}

fn table_reproduction() -> Verdict {
    let report = benchmark();
    let mut misses = Vec::new();
    for (id, row) in REFERENCE {
        for (tag, want) in MeasureTag::ALL.into_iter().zip(row) {
            let cell = report.cell(id, tag, EPOCHS).unwrap();
            match cell.mean {
                Some(got) if (got - want).abs() <= TABLE_TOLERANCE => {}
                Some(got) => misses.push(format!("{id}/{tag} {got:.3} vs {want:.2}")),
                None => misses.push(format!("{id}/{tag} failed: {}", cell.error.clone().unwrap_or_default())),
            }
        }
    }
    check(
        misses.is_empty(),
        format!("{} of 24 cells outside +-{TABLE_TOLERANCE} {misses:?}", misses.len()),
    )
}

fn ordering() -> Verdict {
    let report = benchmark();
    let average = |tag| {
        SUBSET
            .iter()
            .map(|id| report.cell(id, tag, EPOCHS).and_then(|c| c.mean).unwrap_or(f64::NAN))
            .sum::<f64>()
            / SUBSET.len() as f64
    };
    let (esnn, chopra, gabel) = (average(MeasureTag::Esnn), average(MeasureTag::Chopra), average(MeasureTag::Gabel));
    check(
        esnn < chopra && esnn < gabel,
        format!("esnn {esnn:.4}, chopra {chopra:.4}, gabel {gabel:.4}"),
    )
}

/// One measure per dataset and symmetric tag, trained on the first split.
fn trained_models() -> &'static Vec<(String, Measure<f64>)> {
    static MODELS: OnceLock<Vec<(String, Measure<f64>)>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let plan = BenchmarkPlan::default();
        let mut out = Vec::new();
        for id in SUBSET {
            let ds = dataset(id);
            let split = &plan.splits(ds).unwrap()[0];
            for tag in MeasureTag::ALL.into_iter().filter(|t| t.is_symmetric()) {
                let cfg = MeasureConfig { epochs: EPOCHS, ..Default::default() };
                let seed = plan.cell_seed(ds, tag, 0);
                let (m, _) = train_measure(tag, &cfg, ds, &split.train, None, seed).unwrap();
                out.push((id.to_string(), m));
            }
        }
        out
    })
}

fn symmetry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut broken = Vec::new();
    for (id, m) in trained_models() {
        let ds = dataset(id);
        let mut bad = 0;
        for _ in 0..1000 {
            let (a, b) = (rng.random_range(0..ds.len()), rng.random_range(0..ds.len()));
            let xy = m.raw_similarity(ds.row(a), ds.row(b)).unwrap();
            let yx = m.raw_similarity(ds.row(b), ds.row(a)).unwrap();
            bad += usize::from(xy.to_bits() != yx.to_bits());
        }
        checked += 1;
        if bad > 0 {
            broken.push(format!("{id}/{}: {bad}", m.tag()));
        }
    }
    check(
        broken.is_empty(),
        format!("{checked} models x 1000 pairs, asymmetric: {broken:?}"),
    )
}

fn self_similarity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut details = Vec::new();
    let mut ok = true;
    for (id, m) in trained_models().iter().filter(|(_, m)| m.tag() == MeasureTag::Esnn) {
        let ds = dataset(id);
        // distinct dataset rows first, then random points of the unit cube
        let mut inputs: Vec<Vec<f64>> = Vec::new();
        let mut seen = BTreeSet::new();
        for i in 0..ds.len() {
            if inputs.len() < 100 && seen.insert(ds.row(i).iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
                inputs.push(ds.row(i).to_vec());
            }
        }
        let from_rows = inputs.len();
        while inputs.len() < 100 {
            inputs.push((0..ds.width()).map(|_| rng.random::<f64>()).collect());
        }
        let scores: BTreeSet<u64> = inputs
            .iter()
            .map(|x| m.raw_similarity(x, x).unwrap().to_bits())
            .collect();
        ok &= scores.len() == 1;
        details.push(format!("{id}: {from_rows} rows + {} random, {} distinct scores", 100 - from_rows, scores.len()));
    }
    check(ok, details.join(", "))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Worst relative error over the parameters of `net`, skipping parameters
/// whose one-sided slopes disagree (a relu or absolute-value kink lies
/// within one step).
fn finite_difference(
    net: &mut Network<f64>,
    analytic: &[f64],
    mut loss: impl FnMut(&Network<f64>) -> f64,
) -> (f64, usize) {
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let (mut worst, mut kinks) = (0.0f64, 0);
    for i in 0..net.parameter_count() {
        let orig = net.parameters()[i];
        let base = loss(net);
        net.parameters_mut()[i] = orig + FD_STEP;
        let up = loss(net);
        net.parameters_mut()[i] = orig - FD_STEP;
        let down = loss(net);
        net.parameters_mut()[i] = orig;
        if rel((up - base) / FD_STEP, (base - down) / FD_STEP) > 1e-3 {
            kinks += 1;
            continue;
        }
        worst = worst.max(rel(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    (worst, kinks)
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut kinks, mut params) = (0.0f64, 0, 0);
    for trial in 0..100u64 {
        let m = rng.random_range(1..7);
        let k = rng.random_range(2..5);
        let rows = rng.random_range(k..12);
        let x = random_matrix(&mut rng, rows, m);
        let labels: Vec<usize> = (0..rows).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let targets = one_hot(&labels, k);
        let pairs: Vec<PairTriplet> = (0..rng.random_range(1..20))
            .map(|_| {
                let a = rng.random_range(0..rows);
                let b = (a + rng.random_range(1..rows)) % rows;
                PairTriplet { x: a, y: b, same: labels[a] == labels[b] }
            })
            .collect();
        let alpha = rng.random::<f64>();
        let hidden = rng.random_range(2..8);
        let c_act = if rng.random::<bool>() { Activation::Sigmoid } else { Activation::Relu };
        let mut g = init_network::<f64>(&[m, hidden, hidden, k], &[Activation::Relu, Activation::Relu, Activation::Softmax], trial).unwrap();
        let mut c = init_network::<f64>(&[k, hidden, 1], &[c_act, Activation::Sigmoid], trial + 1000).unwrap();
        let out = esnn_loss(&g, &c, alpha, &x, &targets, &pairs).unwrap();
        let cc = c.clone();
        let (eg, kg) = finite_difference(&mut g, &out.g.values, |g| esnn_loss(g, &cc, alpha, &x, &targets, &pairs).unwrap().loss);
        let gg = g.clone();
        let (ec, kc) = finite_difference(&mut c, &out.c.values, |c| esnn_loss(&gg, c, alpha, &x, &targets, &pairs).unwrap().loss);
        worst = worst.max(eg).max(ec);
        kinks += kg + kc;
        params += g.parameter_count() + c.parameter_count();
    }
    check(
        worst < GRADIENT_TOLERANCE && kinks * 20 <= params,
        format!("100 configurations, worst relative error {worst:.2e}, {kinks} of {params} parameters skipped at kinks"),
    )
}

fn pair_counts() -> Verdict {
    for n in 0..=100usize {
        let labels: Vec<usize> = (0..n).map(|i| (i * 7) % 3).collect();
        let ordered = pairs_over(&labels, &PairMode::OrderedFull).unwrap();
        let unordered = pairs_over(&labels, &PairMode::UnorderedUnique).unwrap();
        let distinct_ordered: BTreeSet<(usize, usize)> = ordered.iter().map(|p| (p.x, p.y)).collect();
        let distinct_unordered: BTreeSet<(usize, usize)> =
            unordered.iter().map(|p| (p.x.min(p.y), p.x.max(p.y))).collect();
        let want = n * n.saturating_sub(1);
        if ordered.len() != want || distinct_ordered.len() != want {
            return Err(format!("N={n}: ordered-full gave {}", ordered.len()));
        }
        if unordered.len() != want / 2 || distinct_unordered.len() != want / 2 {
            return Err(format!("N={n}: unordered-unique gave {}", unordered.len()));
        }
        let labelled = ordered.iter().chain(&unordered).all(|p| p.x != p.y && p.same == (labels[p.x] == labels[p.y]));
        if !labelled {
            return Err(format!("N={n}: bad triplet labels"));
        }
    }
    Ok("N = 0..=100, N(N-1) ordered and N(N-1)/2 unordered".into())
}

fn retrieval_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for fixture in 0..20 {
        let n = rng.random_range(4..=50);
        let m = rng.random_range(1..5);
        let x = Matrix::from_vec(n, m, (0..n * m).map(|_| rng.random_range(0..4) as f64).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| if i < 2 { i } else { rng.random_range(0..3) }).collect();
        let ds = Dataset::from_matrix("fixture", &x, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let (train, val) = rows.split_at(rng.random_range(1..n));
        let tag = [MeasureTag::T11, MeasureTag::T21][fixture % 2];
        let cfg = MeasureConfig { epochs: 0, ..Default::default() };
        let (measure, _) = train_measure::<f64>(tag, &cfg, &ds, train, None, 0).unwrap();
        let got = retrieval_loss(&measure, &ds, train, val).unwrap();
        // every query against every training row, first best in training order
        let mut misses = 0;
        for &q in val {
            let mut best: Option<(f64, usize)> = None;
            for &r in train {
                let s = measure.raw_similarity(ds.row(q), ds.row(r)).unwrap();
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, r));
                }
            }
            misses += usize::from(ds.labels()[best.unwrap().1] != ds.labels()[q]);
        }
        let want = misses as f64 / val.len() as f64;
        if got != want {
            return Err(format!("fixture {fixture}: protocol {got}, oracle {want}"));
        }
    }
    Ok("20 fixtures agree exactly".into())
}

fn optimizer_comparison() -> Verdict {
    let plan = BenchmarkPlan { epochs: vec![EPOCHS], ..Default::default() };
    let kinds = [OptimizerKind::Rprop, OptimizerKind::Adam, OptimizerKind::Rmsprop];
    let cmp = compare_optimizers(dataset("bal"), &kinds, &plan, EPOCHS, None, run_config("optimizers")).unwrap();
    std::fs::write(out_dir().join("optimizers.csv"), cmp.to_csv().unwrap()).unwrap();
    let mean = |k| cmp.curve(k).unwrap().mean;
    let (r, a, m) = (mean(OptimizerKind::Rprop), mean(OptimizerKind::Adam), mean(OptimizerKind::Rmsprop));
    let splits = cmp.curve(OptimizerKind::Rprop).unwrap().final_losses.len();
    check(
        r <= a && r <= m && splits == 25,
        format!("{splits} splits, rprop {r:.4}, adam {a:.4}, rmsprop {m:.4}"),
    )
}

fn alpha_band() -> Verdict {
    let plan = BenchmarkPlan { epochs: vec![SWEEP_EPOCHS], ..Default::default() };
    let grid = alpha_grid(SWEEP_POINTS).unwrap();
    let sweep = alpha_sweep(dataset("bal"), &grid, &plan, None, run_config("alpha")).unwrap();
    std::fs::write(out_dir().join("alpha.csv"), sweep.to_csv().unwrap()).unwrap();
    let best = sweep.best().unwrap();
    let curve: Vec<String> = sweep.points.iter().map(|p| format!("{:.2}:{:.3}", p.alpha, p.mean)).collect();
    check(
        (SWEEP_BAND.0..=SWEEP_BAND.1).contains(&best.alpha),
        format!("argmin alpha {:.2} (loss {:.4}) at {SWEEP_EPOCHS} epochs; {}", best.alpha, best.mean, curve.join(" ")),
    )
}

fn embedding_separation() -> Verdict {
    let ds = dataset("iris");
    let plan = BenchmarkPlan::default();
    let split = &plan.splits(ds).unwrap()[0];
    let seed = plan.cell_seed(ds, MeasureTag::Esnn, 0);
    let cfg = MeasureConfig { epochs: EPOCHS, ..Default::default() };
    let untrained = Measure::<f64>::for_dataset(MeasureTag::Esnn, cfg.clone(), ds, seed).unwrap();
    let (trained, _) = train_measure::<f64>(MeasureTag::Esnn, &cfg, ds, &split.train, None, seed).unwrap();
    let before = export_embeddings(&untrained, ds, &split.validation).unwrap().silhouette;
    let after = export_embeddings(&trained, ds, &split.validation).unwrap().silhouette;
    check(after > before, format!("iris held-out silhouette {before:.3} -> {after:.3}"))
}

fn determinism() -> Verdict {
    let datasets = vec![dataset("iris").clone(), dataset("hay").clone()];
    let plan = BenchmarkPlan {
        epochs: vec![20],
        repeats: 1,
        ..Default::default()
    };
    let first = run_benchmark(&datasets, &plan, Some(2), run_config("determinism")).unwrap().to_csv().unwrap();
    let second = run_benchmark(&datasets, &plan, Some(2), run_config("determinism")).unwrap().to_csv().unwrap();
    check(
        first == second,
        format!("two runs, {} bytes of CSV, identical: {}", first.len(), first == second),
    )
}
