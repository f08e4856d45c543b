use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::measures::Measure;
use crate::scalar::Scalar;

/// Principal-component projection of a set of row vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// One row per input vector, one column per component.
    pub coordinates: Matrix<f64>,
    /// Unit principal directions, one per row.
    pub basis: Matrix<f64>,
    /// Singular values of the centred data, largest first.
    pub singular_values: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Projects mean-centred `vectors` onto their top `dims` singular directions.
pub fn pca_project(vectors: &Matrix<f64>, dims: usize) -> Result<Projection> {
    let (n, k) = (vectors.rows(), vectors.cols());
    if dims == 0 || n < dims || k < dims {
        return Err(Error::Projection(format!(
            "cannot project {n} vectors of width {k} onto {dims} components"
        )));
    }
    let mut mean = vec![0.0; k];
    for row in vectors.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, k, |i, j| vectors.row(i)[j] - mean[j]);
    let svd = centred.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Projection("singular value decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut basis = Matrix::zeros(dims, k);
    for (d, &i) in order.iter().take(dims).enumerate() {
        for j in 0..k {
            basis.row_mut(d)[j] = v_t[(i, j)];
        }
    }
    let mut coordinates = Matrix::zeros(n, dims);
    for i in 0..n {
        for d in 0..dims {
            coordinates.row_mut(i)[d] = (0..k).map(|j| centred[(i, j)] * basis.row(d)[j]).sum();
        }
    }
    Ok(Projection {
        coordinates,
        basis,
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        mean,
    })
}

/// Mean silhouette coefficient under Euclidean distance. Points alone in their
/// cluster score 0.
pub fn silhouette(points: &Matrix<f64>, labels: &[usize]) -> Result<f64> {
    if points.rows() != labels.len() {
        return Err(Error::shape(points.rows(), labels.len(), "silhouette labels"));
    }
    let clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; clusters];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Projection("silhouette needs at least two clusters".into()));
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let mut total = 0.0;
    let mut sums = vec![0.0; clusters];
    for (i, a) in points.iter_rows().enumerate() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, b) in points.iter_rows().enumerate() {
            if i != j {
                sums[labels[j]] += dist(a, b);
            }
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a_i = sums[own] / (sizes[own] - 1) as f64;
        let b_i = (0..clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a_i.max(b_i);
        if denom > 0.0 {
            total += (b_i - a_i) / denom;
        }
    }
    Ok(total / points.rows() as f64)
}

/// Embeddings of selected rows with their 2-D principal-component coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingExport {
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub embeddings: Matrix<f64>,
    pub projection: Projection,
    /// Silhouette of the embeddings grouped by class.
    pub silhouette: f64,
}

impl EmbeddingExport {
    /// `pc1,pc2,label` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,pc1,pc2,label\n");
        for (i, (&row, &label)) in self.rows.iter().zip(&self.labels).enumerate() {
            let c = self.projection.coordinates.row(i);
            out.push_str(&format!("{row},{},{},{}\n", c[0], c[1], self.class_names[label]));
        }
        out
    }
}

/// Runs `rows` of `ds` through the measure's embedding network.
pub fn export_embeddings<T: Scalar>(
    measure: &Measure<T>,
    ds: &Dataset,
    rows: &[usize],
) -> Result<EmbeddingExport> {
    let embeddings = measure.embed(&ds.features().select_rows(rows))?;
    let labels: Vec<usize> = rows.iter().map(|&r| ds.labels()[r]).collect();
    let projection = pca_project(&embeddings, 2)?;
    Ok(EmbeddingExport {
        rows: rows.to_vec(),
        silhouette: silhouette(&embeddings, &labels)?,
        labels,
        class_names: ds.class_names().to_vec(),
        embeddings,
        projection,
    })
}
