use alloc::vec::Vec;

use rand::Rng;

use super::image::{adjust_color, hflip, rotate, vflip};
use super::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};
use crate::tensor::Tensor;

/// One augmented copy of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    HFlip,
    VFlip,
    Rotate,
    Jitter,
    HFlipRotate,
    VFlipJitter,
}

impl Variant {
    /// The variants emitted after each original, in output order.
    pub const ALL: [Variant; 6] = [
        Variant::HFlip,
        Variant::VFlip,
        Variant::Rotate,
        Variant::Jitter,
        Variant::HFlipRotate,
        Variant::VFlipJitter,
    ];
}

/// Random-transform magnitudes. Rotation angles are drawn uniformly from
/// ±`max_rotation_deg`; brightness and contrast factors from 1 ± `jitter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationPolicy {
    pub max_rotation_deg: f32,
    pub jitter: f32,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        AugmentationPolicy { max_rotation_deg: 30.0, jitter: 0.1 }
    }
}

impl AugmentationPolicy {
    /// Output records per input record (the original plus one per variant).
    pub const EXPANSION: usize = 1 + Variant::ALL.len();

    fn apply<R: Rng + ?Sized>(&self, img: &Tensor, variant: Variant, rng: &mut R) -> Result<Tensor> {
        let mut rot = |img: &Tensor| {
            let deg = if self.max_rotation_deg > 0.0 {
                rng.random_range(-self.max_rotation_deg..=self.max_rotation_deg)
            } else {
                0.0
            };
            rotate(img, deg.to_radians())
        };
        match variant {
            Variant::HFlip => hflip(img),
            Variant::VFlip => vflip(img),
            Variant::Rotate => rot(img),
            Variant::HFlipRotate => rot(&hflip(img)?),
            Variant::Jitter => self.jitter_with(img, rng),
            Variant::VFlipJitter => self.jitter_with(&vflip(img)?, rng),
        }
    }

    fn jitter_with<R: Rng + ?Sized>(&self, img: &Tensor, rng: &mut R) -> Result<Tensor> {
        let j = self.jitter;
        let (b, c) = if j > 0.0 {
            (rng.random_range(1.0 - j..=1.0 + j), rng.random_range(1.0 - j..=1.0 + j))
        } else {
            (1.0, 1.0)
        };
        adjust_color(img, b, c)
    }
}

/// Expands every record into itself followed by its six variants. Labels and
/// sources are inherited; randomness is per-record and seeded.
pub fn augment(ds: &Dataset, policy: &AugmentationPolicy, seed: u64) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::data("cannot augment an empty dataset"));
    }
    if policy.max_rotation_deg < 0.0 || !(0.0..1.0).contains(&policy.jitter) {
        return Err(Error::config("augmentation magnitudes out of range"));
    }
    let mut out = Vec::with_capacity(ds.len() * AugmentationPolicy::EXPANSION);
    for (i, rec) in ds.records().iter().enumerate() {
        let mut rng = derive_rng(seed, &[stream::AUGMENT, i as u64]);
        out.push(rec.clone());
        for variant in Variant::ALL {
            out.push(LabeledImage {
                pixels: policy.apply(&rec.pixels, variant, &mut rng)?,
                label: rec.label,
                source: rec.source.clone(),
            });
        }
    }
    Dataset::new(out, ds.n_classes())
}
