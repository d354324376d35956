use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BiasedDataset, RawDataset};
use crate::diff::Tensor;
use crate::error::{GgdError, Result};
use crate::seed::stream_rng;

/// Source intensities at or above this are digit strokes and stay untouched.
pub const FOREGROUND_THRESHOLD: f64 = 0.5;

/// Ten distinct RGB background colours, one per class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Palette(Vec<[u8; 3]>);

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != 10 {
            return Err(GgdError::contract(format!(
                "palette needs exactly 10 colours, got {}",
                colors.len()
            )));
        }
        for (i, c) in colors.iter().enumerate() {
            if colors[..i].contains(c) {
                return Err(GgdError::contract(format!("palette colour {c:?} repeats")));
            }
        }
        Ok(Palette(colors))
    }

    /// The palette shipped in `configs/palette.json`.
    pub fn reference() -> Self {
        Palette(vec![
            [255, 0, 0],
            [0, 255, 0],
            [0, 0, 255],
            [225, 225, 0],
            [225, 0, 225],
            [0, 255, 255],
            [255, 128, 0],
            [255, 0, 128],
            [128, 0, 255],
            [128, 128, 128],
        ])
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.0
    }
}

/// Picks the background colour index for one sample: the class colour with
/// probability `rho`, otherwise one of the other nine uniformly.
fn draw_color(rng: &mut impl Rng, label: usize, rho: f64) -> usize {
    if rng.random::<f64>() < rho {
        label
    } else {
        let k = rng.random_range(0..9);
        if k >= label {
            k + 1
        } else {
            k
        }
    }
}

/// Renders each grayscale digit in white over a coloured background.
pub fn colorize(raw: &RawDataset, rho: f64, palette: &Palette, seed: u64) -> Result<BiasedDataset> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(GgdError::contract("rho must be in [0,1]"));
    }
    if palette.0.len() != 10 {
        return Err(GgdError::contract("palette needs exactly 10 colours"));
    }
    if raw.num_classes != 10 || raw.labels.iter().any(|&l| l >= 10) {
        return Err(GgdError::contract("colorize needs labels in [0, 10)"));
    }
    let (h, w) = (raw.height(), raw.width());
    let area = h * w;
    let mut data = Vec::with_capacity(raw.len() * 3 * area);
    let mut bias_attr = Vec::with_capacity(raw.len());
    for (i, &label) in raw.labels.iter().enumerate() {
        let color = draw_color(&mut stream_rng(seed, i as u64), label, rho);
        bias_attr.push(color);
        let rgb = palette.0[color].map(|c| f64::from(c) / 255.0);
        let src = raw.images.row(i);
        for bg in rgb {
            data.extend(src.iter().map(|&v| if v >= FOREGROUND_THRESHOLD { v } else { bg }));
        }
    }
    BiasedDataset::new(
        Tensor::new(vec![raw.len(), 3, h, w], data)?,
        raw.labels.clone(),
        bias_attr,
        10,
        rho,
        seed,
    )
}
