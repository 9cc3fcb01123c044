//! Labelled image datasets and the transformations applied to them before
//! training: synthetic generation, resizing, augmentation, train/test
//! splitting and client partitioning.

mod augment;
mod image;
mod partition;
mod split;
mod synthetic;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use augment::{augment, AugmentationPolicy, Variant};
pub use image::{adjust_color, hflip, resize_to, rotate, vflip};
pub use partition::{partition_by_source, partition_iid, Partition};
pub use split::{split_train_test, Split};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    /// H×W×3, values in [0, 1].
    pub pixels: Tensor,
    pub label: usize,
    /// Collection site the image came from.
    pub source: String,
}

/// An immutable, ordered collection of labelled images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<LabeledImage>,
    n_classes: usize,
    sources: Vec<String>,
}

impl Dataset {
    /// Validates labels, image shapes (all H×W×3 and equal) and pixel range.
    pub fn new(records: Vec<LabeledImage>, n_classes: usize) -> Result<Self> {
        let shape = records.first().map(|r| r.pixels.shape().to_vec());
        for (i, r) in records.iter().enumerate() {
            if r.label >= n_classes {
                return Err(Error::data(format!(
                    "record {i}: label {} outside [0, {n_classes})",
                    r.label
                )));
            }
            if r.pixels.shape().len() != 3 || r.pixels.shape()[2] != 3 {
                return Err(Error::data(format!("record {i}: expected H×W×3, got {:?}", r.pixels.shape())));
            }
            if Some(r.pixels.shape()) != shape.as_deref() {
                return Err(Error::data(format!("record {i}: image size differs from record 0")));
            }
            if r.pixels.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::data(format!("record {i}: pixel outside [0, 1]")));
            }
        }
        let mut sources: Vec<String> = records.iter().map(|r| r.source.clone()).collect();
        sources.sort();
        sources.dedup();
        Ok(Dataset { records, n_classes, sources })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&LabeledImage> {
        self.records.get(index)
    }

    pub fn records(&self) -> &[LabeledImage] {
        &self.records
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Distinct source tags, sorted.
    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    /// Side lengths (height, width) shared by all images.
    pub fn image_dims(&self) -> Option<(usize, usize)> {
        self.records.first().map(|r| (r.pixels.shape()[0], r.pixels.shape()[1]))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.n_classes];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// Record count per source tag.
    pub fn source_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.source.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// A new dataset holding copies of the given records, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::data(format!("index {i} outside dataset of {}", self.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(records, self.n_classes)
    }

    /// Concatenation of two datasets with the same class count.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.n_classes != other.n_classes {
            return Err(Error::data("cannot concatenate datasets with different class counts"));
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Dataset::new(records, self.n_classes)
    }
}
