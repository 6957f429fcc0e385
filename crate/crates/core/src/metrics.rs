//! Evaluation metrics over column-per-sample prediction matrices.
//!
//! [`pearson_r`] is the *uncentered* correlation: the cosine between the two
//! matrices flattened to vectors. It is not the classical centered Pearson
//! coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// A per-sample average with the count of samples dropped as degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMean {
    pub value: f64,
    pub used: usize,
    pub excluded: usize,
}

fn same_shape(pred: &DataMatrix, truth: &DataMatrix) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(Error::dims(format!(
            "prediction is {:?} but truth is {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of columns whose argmax equals the label.
pub fn accuracy(pred: &DataMatrix, labels: &[usize]) -> Result<f64> {
    if pred.samples() != labels.len() {
        return Err(Error::dims(format!(
            "{} prediction columns for {} labels",
            pred.samples(),
            labels.len()
        )));
    }
    let classes = pred.dim();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{classes}")));
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(j, &l)| argmax(pred.sample(j)) == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Argmax decoding of each column.
pub fn decode_labels(pred: &DataMatrix) -> Vec<usize> {
    (0..pred.samples()).map(|j| argmax(pred.sample(j))).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// `⟨ŷ, y⟩ / (‖ŷ‖‖y‖)` over all entries.
pub fn pearson_r(pred: &DataMatrix, truth: &DataMatrix) -> Result<f64> {
    same_shape(pred, truth)?;
    cosine(pred.as_slice(), truth.as_slice())
        .ok_or_else(|| Error::Degenerate("correlation of a zero matrix".into()))
}

fn finish(sum: f64, used: usize, excluded: usize, what: &str) -> Result<SampleMean> {
    if used == 0 {
        return Err(Error::Degenerate(format!("every sample is degenerate for {what}")));
    }
    Ok(SampleMean {
        value: sum / used as f64,
        used,
        excluded,
    })
}

/// Per-sample `1 − Σ(ŷ − y)² / Σ(y − ȳ)²` averaged over samples, where `ȳ`
/// is the sample's mean coordinate. Samples with constant truth are excluded.
pub fn mean_r2(pred: &DataMatrix, truth: &DataMatrix) -> Result<SampleMean> {
    same_shape(pred, truth)?;
    let d = truth.dim() as f64;
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for j in 0..truth.samples() {
        let y = truth.sample(j);
        let p = pred.sample(j);
        let mean = y.iter().sum::<f64>() / d;
        let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        if ss_tot == 0.0 {
            excluded += 1;
            continue;
        }
        let ss_res: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += 1.0 - ss_res / ss_tot;
        used += 1;
    }
    finish(sum, used, excluded, "mean R²")
}

fn group_means(m: &DataMatrix, groups: &[usize]) -> Vec<Vec<f64>> {
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let mut sums = vec![vec![0.0; m.dim()]; n_groups];
    let mut counts = vec![0usize; n_groups];
    for (j, &g) in groups.iter().enumerate() {
        for (acc, v) in sums[g].iter_mut().zip(m.sample(j)) {
            *acc += v;
        }
        counts[g] += 1;
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Mean per-sample cosine similarity. With `groups`, each matrix has its own
/// per-group mean column subtracted from every member first. Samples with a
/// zero norm after centering are excluded.
pub fn mean_cosine(
    pred: &DataMatrix,
    truth: &DataMatrix,
    groups: Option<&[usize]>,
) -> Result<SampleMean> {
    same_shape(pred, truth)?;
    let centers = match groups {
        Some(g) => {
            if g.len() != truth.samples() {
                return Err(Error::dims(format!(
                    "{} group ids for {} samples",
                    g.len(),
                    truth.samples()
                )));
            }
            Some((group_means(pred, g), group_means(truth, g)))
        }
        None => None,
    };
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for j in 0..truth.samples() {
        let c = match (&centers, groups) {
            (Some((cp, ct)), Some(g)) => {
                let p: Vec<f64> = pred.sample(j).iter().zip(&cp[g[j]]).map(|(a, b)| a - b).collect();
                let t: Vec<f64> = truth.sample(j).iter().zip(&ct[g[j]]).map(|(a, b)| a - b).collect();
                cosine(&p, &t)
            }
            _ => cosine(pred.sample(j), truth.sample(j)),
        };
        match c {
            Some(v) => {
                sum += v;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    finish(sum, used, excluded, "mean cosine")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DataMatrix {
        DataMatrix::from_row_slice(rows, cols, v).unwrap()
    }

    #[test]
    fn accuracy_of_one_hot() {
        let labels = [2, 0, 1, 1];
        let pred = DataMatrix::one_hot(&labels, 3).unwrap();
        assert_eq!(accuracy(&pred, &labels).unwrap(), 1.0);
    }

    #[test]
    fn ties_go_to_class_zero() {
        let pred = m(2, 3, &[0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(accuracy(&pred, &[0, 0, 1]).unwrap(), 2.0 / 3.0);
        assert_eq!(decode_labels(&pred), vec![0, 0, 0]);
    }

    #[test]
    fn accuracy_rejects_bad_labels() {
        let pred = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(accuracy(&pred, &[0]).is_err());
        assert!(accuracy(&pred, &[0, 2]).is_err());
    }

    #[test]
    fn pearson_extremes() {
        let t = m(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_abs_diff_eq!(pearson_r(&t, &t).unwrap(), 1.0, epsilon = 1e-15);
        let neg = DataMatrix::new(-t.as_matrix()).unwrap();
        assert_abs_diff_eq!(pearson_r(&neg, &t).unwrap(), -1.0, epsilon = 1e-15);
        assert!(pearson_r(&DataMatrix::zeros(2, 2), &t).is_err());
    }

    #[test]
    fn r2_identities() {
        let t = m(3, 2, &[1.0, 4.0, 2.0, 0.0, 6.0, 5.0]);
        assert_eq!(mean_r2(&t, &t).unwrap().value, 1.0);
        let mut means = t.clone().into_inner();
        for mut c in means.column_iter_mut() {
            let mu = c.mean();
            c.fill(mu);
        }
        let r = mean_r2(&DataMatrix::new(means).unwrap(), &t).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn r2_excludes_constant_samples() {
        let t = m(2, 2, &[1.0, 3.0, 1.0, 4.0]);
        let r = mean_r2(&t, &t).unwrap();
        assert_eq!((r.used, r.excluded), (1, 1));
        let flat = m(2, 1, &[1.0, 1.0]);
        assert!(mean_r2(&flat, &flat).is_err());
    }

    #[test]
    fn centering_removes_group_shift() {
        let t = m(2, 4, &[1.0, 2.0, -1.0, 0.5, 3.0, -2.0, 0.0, 1.5]);
        let mut p = t.clone().into_inner();
        let groups = [0, 0, 1, 1];
        for (j, &g) in groups.iter().enumerate() {
            p[(0, j)] += if g == 0 { 5.0 } else { -3.0 };
            p[(1, j)] += if g == 0 { 1.0 } else { 2.0 };
        }
        let p = DataMatrix::new(p).unwrap();
        let r = mean_cosine(&p, &t, Some(&groups)).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_cosine(&t, &t, None).unwrap().value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn group_length_checked() {
        let t = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(mean_cosine(&t, &t, Some(&[0])).is_err());
    }
}
