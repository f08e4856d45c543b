use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::measures::Measure;
use crate::scalar::Scalar;

/// Index of the highest score in each row; ties go to the lowest index and
/// NaN never wins over a number.
pub fn nearest(scores: &Matrix<f64>) -> Vec<usize> {
    scores
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (j, &s) in row.iter().enumerate().skip(1) {
                if s > row[best] || (row[best].is_nan() && !s.is_nan()) {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of query rows whose best-scoring reference has another class.
///
/// `scores` is `queries x references`, with references labelled by
/// `reference_labels` and queries by `query_labels`.
pub fn retrieval_loss_from_scores(
    scores: &Matrix<f64>,
    reference_labels: &[usize],
    query_labels: &[usize],
) -> Result<f64> {
    if query_labels.is_empty() || reference_labels.is_empty() {
        return Err(Error::Protocol("empty training or validation partition".into()));
    }
    if scores.rows() != query_labels.len() || scores.cols() != reference_labels.len() {
        return Err(Error::shape(
            query_labels.len() * reference_labels.len(),
            scores.rows() * scores.cols(),
            "score matrix",
        ));
    }
    let misses = nearest(scores)
        .into_iter()
        .zip(query_labels)
        .filter(|&(j, &l)| reference_labels[j] != l)
        .count();
    Ok(misses as f64 / query_labels.len() as f64)
}

/// Retrieval loss of `measure` with `train` rows as the case base and
/// `validation` rows as queries.
pub fn retrieval_loss<T: Scalar>(
    measure: &Measure<T>,
    ds: &Dataset,
    train: &[usize],
    validation: &[usize],
) -> Result<f64> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Protocol("empty training or validation partition".into()));
    }
    let refs = ds.features().select_rows(train);
    let queries = ds.features().select_rows(validation);
    let scores = measure.rank_block(&queries, &refs)?;
    let ref_labels: Vec<usize> = train.iter().map(|&r| ds.labels()[r]).collect();
    let query_labels: Vec<usize> = validation.iter().map(|&r| ds.labels()[r]).collect();
    retrieval_loss_from_scores(&scores, &ref_labels, &query_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores_retrieve_the_first_reference() {
        // references labelled (1, 0, 0, 1, 0); every query gets reference 0
        let scores = Matrix::from_vec(5, 5, vec![0.5; 25]).unwrap();
        let loss = retrieval_loss_from_scores(&scores, &[1, 0, 0, 1, 0], &[1, 1, 0, 0, 0]).unwrap();
        assert_eq!(loss, 0.6);
    }

    #[test]
    fn nan_never_wins() {
        let scores = Matrix::from_vec(1, 3, vec![f64::NAN, 0.1, 0.1]).unwrap();
        assert_eq!(nearest(&scores), vec![1]);
    }

    #[test]
    fn empty_partitions_are_rejected() {
        let scores = Matrix::zeros(0, 2);
        assert!(matches!(
            retrieval_loss_from_scores(&scores, &[0, 1], &[]),
            Err(Error::Protocol(_))
        ));
    }
}
