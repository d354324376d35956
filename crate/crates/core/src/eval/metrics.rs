use serde::{Deserialize, Serialize};

use crate::error::{GgdError, Result};

fn check_pair(pred: &[usize], reference: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return Err(GgdError::contract("no predictions to score"));
    }
    if pred.len() != reference.len() {
        return Err(GgdError::contract(format!(
            "{} predictions vs {} references",
            pred.len(),
            reference.len()
        )));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> Result<f64> {
    check_pair(pred, labels)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Accuracy conditioned on each true class; classes without samples get NaN.
pub fn per_class_accuracy(pred: &[usize], labels: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    check_pair(pred, labels)?;
    let mut hits = vec![0usize; num_classes];
    let mut totals = vec![0usize; num_classes];
    for (&p, &l) in pred.iter().zip(labels) {
        if l >= num_classes {
            return Err(GgdError::contract(format!("label {l} outside [0, {num_classes})")));
        }
        totals[l] += 1;
        hits[l] += usize::from(p == l);
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| if t == 0 { f64::NAN } else { h as f64 / t as f64 })
        .collect())
}

/// Mean of the per-class accuracies over classes that have samples.
pub fn mean_class_accuracy(per_class: &[f64]) -> f64 {
    let seen: Vec<f64> = per_class.iter().copied().filter(|v| !v.is_nan()).collect();
    seen.iter().sum::<f64>() / seen.len().max(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusionAxis {
    VsLabel,
    VsBias,
}

/// `counts[i][j]`: samples with reference `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub axis: ConfusionAxis,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Fraction of samples on the diagonal.
    pub fn diagonal_fraction(&self) -> f64 {
        self.trace() as f64 / self.total().max(1) as f64
    }
}

pub fn confusion(
    pred: &[usize],
    reference: &[usize],
    num_classes: usize,
    axis: ConfusionAxis,
) -> Result<ConfusionMatrix> {
    check_pair(pred, reference)?;
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &r) in pred.iter().zip(reference) {
        if p >= num_classes || r >= num_classes {
            return Err(GgdError::contract(format!(
                "class pair ({r}, {p}) outside [0, {num_classes})"
            )));
        }
        counts[r][p] += 1;
    }
    Ok(ConfusionMatrix { axis, counts })
}

/// Share of the total loss carried by the masked samples; 0 when the total is 0.
pub fn hard_ratio(losses: &[f64], hard_mask: &[bool]) -> Result<f64> {
    if losses.len() != hard_mask.len() {
        return Err(GgdError::contract(format!(
            "{} losses vs {} mask entries",
            losses.len(),
            hard_mask.len()
        )));
    }
    if losses.iter().any(|l| !(*l >= 0.0)) {
        return Err(GgdError::contract("losses must be non-negative"));
    }
    let total: f64 = losses.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let hard: f64 = losses.iter().zip(hard_mask).filter(|(_, &m)| m).map(|(l, _)| l).sum();
    Ok(hard / total)
}

/// Samples whose bias attribute contradicts the label.
pub fn hard_mask(labels: &[usize], bias_attr: &[usize]) -> Vec<bool> {
    labels.iter().zip(bias_attr).map(|(l, b)| l != b).collect()
}

pub fn grad_cosine(g1: &[f64], g2: &[f64]) -> Result<f64> {
    if g1.len() != g2.len() || g1.is_empty() {
        return Err(GgdError::contract(format!(
            "gradient lengths {} and {} differ or are empty",
            g1.len(),
            g2.len()
        )));
    }
    let n1 = g1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n2 = g2.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(GgdError::contract("cosine of a zero gradient"));
    }
    let dot: f64 = g1.iter().zip(g2).map(|(a, b)| a * b).sum();
    Ok((dot / (n1 * n2)).clamp(-1.0, 1.0))
}
