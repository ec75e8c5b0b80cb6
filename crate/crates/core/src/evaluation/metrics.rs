//! ROC-AUC and precision @ rank n for outlier scores (label 1 = outlier).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Real;

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

fn check_lengths<T>(scores: &[T], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::param("labels", format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

fn cmp<T: Real>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (outlier, inlier) pairs where the outlier scores higher, ties counting 1/2.
pub fn roc_auc<T: Real>(scores: &[T], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(scores[a], scores[b]));

    // sum of outlier ranks, tied blocks get the average rank; doubled to stay integral
    let mut rank_sum_x2: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && cmp(scores[order[end]], scores[order[start]]) == Ordering::Equal {
            end += 1;
        }
        // ranks start+1 ..= end, average (start + 1 + end) / 2
        let avg_x2 = (start + 1 + end) as u64;
        let outliers = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u64;
        rank_sum_x2 += outliers * avg_x2;
        start = end;
    }
    let pos_u = pos as u64;
    let u_x2 = rank_sum_x2 - pos_u * (pos_u + 1);
    Ok(u_x2 as f64 / 2.0 / (pos as f64 * neg as f64))
}

/// Fraction of true outliers among the `n` highest scores, `n` the number of
/// outliers. Ties at the cut favour the lower index.
pub fn precision_at_n<T: Real>(scores: &[T], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(scores[b], scores[a]).then(a.cmp(&b)));
    let hits = order[..pos].iter().filter(|&&i| labels[i] == 1).count();
    Ok(hits as f64 / pos as f64)
}
