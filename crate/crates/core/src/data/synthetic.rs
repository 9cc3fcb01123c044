//! Parametric texture images standing in for real specimen photos.
//!
//! Each class combines a stripe orientation, a stripe frequency and a color
//! tint; no single cue identifies a class on its own. Every record adds a
//! random phase, a small orientation wobble and pixel noise. Each source
//! applies its own mild color cast, so sources differ in style as real
//! collection sites do.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f32::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub source_tags: Vec<String>,
    /// 0: every class spread evenly over sources; 1: every class lives in a
    /// single source.
    pub class_source_skew: f32,
    pub side: usize,
    pub seed: u64,
}

const TINTS: [[f32; 3]; 4] = [[1.0, 0.55, 0.45], [0.45, 1.0, 0.55], [0.5, 0.6, 1.0], [0.9, 0.9, 0.4]];
const NOISE: f32 = 0.08;

/// Number of records of a class that go to each source. The class's home
/// source receives its even share plus `skew` of everything else.
fn source_quotas(per_class: usize, n_sources: usize, home: usize, skew: f32) -> Vec<usize> {
    let even = per_class as f32 / n_sources as f32;
    let home_count = libm::roundf(even + skew * (per_class as f32 - even)) as usize;
    let home_count = home_count.min(per_class);
    let rest = per_class - home_count;
    let others = n_sources - 1;
    let mut quotas = alloc::vec![0; n_sources];
    quotas[home] = home_count;
    // empty when there is a single source, so `others` is never zero here
    for (k, s) in (0..n_sources).filter(|&s| s != home).enumerate() {
        quotas[s] = rest / others + usize::from(k < rest % others);
    }
    quotas
}

/// Renders one texture of class `class`.
fn render<R: Rng + ?Sized>(cfg: &SyntheticConfig, class: usize, source: usize, rng: &mut R) -> Tensor {
    let side = cfg.side;
    let spacing = PI / cfg.n_classes as f32;
    let angle = class as f32 * spacing + rng.random_range(-0.2..=0.2) * spacing;
    let cycles = 2.0 + (class % 3) as f32 * 1.5;
    let phase = rng.random_range(0.0..2.0 * PI);
    let tint = TINTS[class % TINTS.len()];
    // per-source color cast
    let cast = [1.0 - 0.06 * source as f32, 1.0, 0.94 + 0.06 * source as f32];
    let (sin, cos) = (libm::sinf(angle), libm::cosf(angle));
    let mut data = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let u = (x as f32 * cos + y as f32 * sin) / side as f32;
            let wave = libm::sinf(2.0 * PI * cycles * u + phase);
            for ch in 0..3 {
                let v = 0.5 + 0.35 * wave * tint[ch] + (tint[ch] - 0.7) * 0.2;
                let v = v * cast[ch] + NOISE * Distribution::<f32>::sample(&StandardNormal, rng);
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Tensor::from_vec(&[side, side, 3], data).expect("side*side*3 values")
}

/// Generates `n_classes × per_class` records in class-major order.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.n_classes < 2 {
        return Err(Error::config("synthetic data needs at least 2 classes"));
    }
    if cfg.per_class == 0 {
        return Err(Error::config("synthetic data needs at least 1 record per class"));
    }
    if cfg.source_tags.is_empty() {
        return Err(Error::config("synthetic data needs at least 1 source tag"));
    }
    if !(0.0..=1.0).contains(&cfg.class_source_skew) {
        return Err(Error::config(format!("skew {} outside [0, 1]", cfg.class_source_skew)));
    }
    if cfg.side == 0 {
        return Err(Error::config("image side must be positive"));
    }
    let n_sources = cfg.source_tags.len();
    let mut records = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for class in 0..cfg.n_classes {
        let mut rng = derive_rng(cfg.seed, &[stream::SYNTHETIC, class as u64]);
        let quotas = source_quotas(cfg.per_class, n_sources, class % n_sources, cfg.class_source_skew);
        for (source, &count) in quotas.iter().enumerate() {
            for _ in 0..count {
                records.push(LabeledImage {
                    pixels: render(cfg, class, source, &mut rng),
                    label: class,
                    source: cfg.source_tags[source].clone(),
                });
            }
        }
    }
    Dataset::new(records, cfg.n_classes)
}
