use serde::{Deserialize, Serialize};

use crate::diff::Tensor;
use crate::engine::pseudo_label;
use crate::error::{GgdError, Result};

/// Where an ensemble's pseudo-label mass lands, class by class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelDrift {
    /// Mean clipped pseudo-label mass per class, averaged over all samples.
    pub mean_mass: Vec<f64>,
    /// Spearman correlation between `mean_mass` and the class prior.
    pub rank_correlation: f64,
}

/// Ranks with ties sharing their mean (1-based) rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of mid-ranks; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(GgdError::contract(
            "rank correlation needs two equal series of length >= 2",
        ));
    }
    let (ra, rb) = (mid_ranks(a), mid_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

/// Per-class mean of `clip_pseudo(negative_gradient(H, Y), Y)` and its rank
/// agreement with `class_prior`.
pub fn pseudo_label_drift(h: &Tensor, y: &Tensor, class_prior: &[f64]) -> Result<PseudoLabelDrift> {
    let pseudo = pseudo_label(h, y)?;
    let c = y.row_len();
    if class_prior.len() != c {
        return Err(GgdError::dim(
            "pseudo_label_drift",
            format!("prior of length {} for {c} classes", class_prior.len()),
        ));
    }
    let mut mass = vec![0.0; c];
    for row in pseudo.data().chunks(c) {
        for (m, v) in mass.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = y.rows() as f64;
    let mean_mass: Vec<f64> = mass.iter().map(|m| m / n).collect();
    let rank_correlation = spearman(&mean_mass, class_prior)?;
    Ok(PseudoLabelDrift {
        mean_mass,
        rank_correlation,
    })
}
