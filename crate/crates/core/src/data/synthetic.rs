use rand::Rng;
use rand_distr::StandardNormal;

use super::BiasedDataset;
use crate::diff::Tensor;
use crate::error::{GgdError, Result};
use crate::seed::{mix, stream_rng};

/// Spread of the class means of the core features.
const MEAN_SCALE: f64 = 1.5;
const MEANS_STREAM: u64 = 0x6d65_616e;

/// Flat feature vectors `[core | bias]` shaped `(n, 1, 1, d_core + d_bias)`.
///
/// Core features are unit-variance Gaussians around a per-class mean. Bias
/// features are a noise-free code of `bias_attr`, which equals the label with
/// probability `rho` and is otherwise a uniformly chosen other class.
pub fn synthetic_spurious(
    n: usize,
    d_core: usize,
    d_bias: usize,
    rho: f64,
    num_classes: usize,
    seed: u64,
) -> Result<BiasedDataset> {
    if n == 0 || d_core == 0 || d_bias == 0 || num_classes == 0 {
        return Err(GgdError::contract(
            "n, d_core, d_bias and the class count must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(GgdError::contract("rho must be in [0,1]"));
    }
    let mut means_rng = stream_rng(mix(seed, MEANS_STREAM), 0);
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            (0..d_core)
                .map(|_| MEAN_SCALE * means_rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    // One-hot codes when there is room, otherwise fixed Gaussian codes.
    let codes: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| {
            if d_bias >= num_classes {
                (0..d_bias).map(|k| if k == c { 1.0 } else { 0.0 }).collect()
            } else {
                (0..d_bias)
                    .map(|_| means_rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        })
        .collect();

    let width = d_core + d_bias;
    let mut data = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    let mut bias_attr = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let label = rng.random_range(0..num_classes);
        let bias = if num_classes == 1 || rng.random::<f64>() < rho {
            label
        } else {
            let k = rng.random_range(0..num_classes - 1);
            if k >= label {
                k + 1
            } else {
                k
            }
        };
        data.extend(means[label].iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
        data.extend_from_slice(&codes[bias]);
        labels.push(label);
        bias_attr.push(bias);
    }
    BiasedDataset::new(
        Tensor::new(vec![n, 1, 1, width], data)?,
        labels,
        bias_attr,
        num_classes,
        rho,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = synthetic_spurious(100, 4, 10, 0.9, 10, 1).unwrap();
        assert_eq!(a.images.shape(), &[100, 1, 1, 14]);
        let b = synthetic_spurious(100, 4, 10, 0.9, 10, 1).unwrap();
        let bits = |d: &BiasedDataset| d.images.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn rho_one_codes_the_label() {
        let d = synthetic_spurious(300, 3, 5, 1.0, 5, 2).unwrap();
        assert_eq!(d.bias_attr, d.labels);
        for i in 0..d.len() {
            let row = d.images.row(i);
            assert_eq!(row[3 + d.labels[i]], 1.0);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(synthetic_spurious(0, 1, 1, 0.5, 2, 0).is_err());
        assert!(synthetic_spurious(10, 1, 1, 1.2, 2, 0).is_err());
    }
}
