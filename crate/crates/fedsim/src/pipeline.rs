//! Config → dataset → train/test split.

use fedsim_core::data::{augment, generate_synthetic, split_train_test, AugmentationPolicy, Dataset, SyntheticConfig};
use sha2::{Digest, Sha256};

use crate::config::{AugmentOrder, DataKind, RunConfig};
use crate::error::{AppError, Result};
use crate::ingest::ingest_image_folder;

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    /// SHA-256 of the raw (pre-augmentation) dataset.
    pub fingerprint: String,
    pub warnings: Vec<String>,
}

/// Content hash over class count, labels, source tags and pixel bits.
pub fn fingerprint(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((ds.n_classes() as u64).to_le_bytes());
    h.update((ds.len() as u64).to_le_bytes());
    for r in ds.records() {
        h.update((r.label as u64).to_le_bytes());
        h.update((r.source.len() as u64).to_le_bytes());
        h.update(r.source.as_bytes());
        for d in r.pixels.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        for v in r.pixels.data() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Loads or generates the raw dataset described by `cfg`. Folder data fixes
/// the class count; an explicit `data.classes` that disagrees is an error.
pub fn load_dataset(cfg: &mut RunConfig) -> Result<Dataset> {
    match cfg.data.kind {
        DataKind::Synthetic => Ok(generate_synthetic(&SyntheticConfig {
            n_classes: cfg.data.classes,
            per_class: cfg.data.per_class,
            source_tags: cfg.data.sources.clone(),
            class_source_skew: cfg.data.skew,
            side: cfg.image_size,
            seed: cfg.experiment.seed,
        })?),
        DataKind::Folder => {
            let path = cfg.data.path.clone().ok_or_else(|| AppError::Config("`data.path` missing".into()))?;
            let ds = ingest_image_folder(&path, cfg.image_size)?;
            if ds.n_classes() != cfg.data.classes {
                if cfg.data.classes_explicit {
                    return Err(AppError::Config(format!(
                        "`data.classes`: set to {} but {} holds {} classes",
                        cfg.data.classes,
                        path.display(),
                        ds.n_classes()
                    )));
                }
                cfg.set_classes(ds.n_classes());
            }
            Ok(ds)
        }
    }
}

/// Augments (if enabled) and splits. With `AugmentOrder::AfterSplit` only
/// the training split is augmented and the test split stays raw.
pub fn prepare(cfg: &mut RunConfig) -> Result<PreparedData> {
    let raw = load_dataset(cfg)?;
    let fp = fingerprint(&raw);
    let seed = cfg.experiment.seed;
    let policy = AugmentationPolicy::default();
    let (train, test, warnings) = match (cfg.augment, cfg.augment_order) {
        (true, AugmentOrder::BeforeSplit) => {
            let s = split_train_test(&augment(&raw, &policy, seed)?, cfg.split_fraction, seed)?;
            (s.train, s.test, s.warnings)
        }
        (true, AugmentOrder::AfterSplit) => {
            let s = split_train_test(&raw, cfg.split_fraction, seed)?;
            (augment(&s.train, &policy, seed)?, s.test, s.warnings)
        }
        (false, _) => {
            let s = split_train_test(&raw, cfg.split_fraction, seed)?;
            (s.train, s.test, s.warnings)
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    if test.is_empty() {
        return Err(AppError::Data("test split is empty".into()));
    }
    Ok(PreparedData { train, test, fingerprint: fp, warnings })
}
