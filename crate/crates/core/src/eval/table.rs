use std::fmt::Write;

use super::benchmark::BenchmarkReport;

/// Markdown table of mean losses at one epoch budget: datasets as rows,
/// measures as columns, with `Sum` and `Average` rows.
///
/// In each row the lowest mean is bold, as is every mean that exceeds it by
/// less than the standard deviation of that best cell.
pub fn render_table(report: &BenchmarkReport, epochs: usize) -> String {
    let measures = &report.plan.measures;
    let mut out = String::new();
    let _ = write!(out, "| dataset |");
    for m in measures {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|");
    for _ in measures {
        out.push_str("---:|");
    }
    out.push('\n');
    let mut sums = vec![Some(0.0f64); measures.len()];
    for ds in &report.datasets {
        let cells: Vec<_> = measures
            .iter()
            .map(|&m| report.cell(&ds.id, m, epochs).and_then(|c| c.mean.zip(c.std)))
            .collect();
        let best = cells
            .iter()
            .flatten()
            .copied()
            .fold(None, |b: Option<(f64, f64)>, c| match b {
                Some(b) if b.0 <= c.0 => Some(b),
                _ => Some(c),
            });
        let _ = write!(out, "| {} |", ds.id);
        for (k, cell) in cells.iter().enumerate() {
            match (cell, best) {
                (Some((mean, _)), Some((bm, bs))) => {
                    if *mean == bm || mean - bm < bs {
                        let _ = write!(out, " **{mean:.2}** |");
                    } else {
                        let _ = write!(out, " {mean:.2} |");
                    }
                    sums[k] = sums[k].map(|s| s + mean);
                }
                _ => {
                    out.push_str(" n/a |");
                    sums[k] = None;
                }
            }
        }
        out.push('\n');
    }
    let n = report.datasets.len() as f64;
    for (label, scale) in [("Sum", 1.0), ("Average", 1.0 / n)] {
        let _ = write!(out, "| {label} |");
        for s in &sums {
            match s {
                Some(s) => {
                    let _ = write!(out, " {:.2} |", s * scale);
                }
                None => out.push_str(" n/a |"),
            }
        }
        out.push('\n');
    }
    out
}
