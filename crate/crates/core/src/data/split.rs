use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};

/// A stratified train/test split. Index lists refer to the parent dataset and
/// are ascending; the datasets keep parent order.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Non-fatal anomalies, e.g. single-record classes.
    pub warnings: Vec<String>,
}

/// Per-class train quotas: `floor(fraction·count)` per class, topped up by
/// largest remainder until the total reaches `floor(fraction·n)`. A class
/// with a single record sends it to train; any larger class keeps at least
/// one test record.
fn train_quotas(counts: &[usize], fraction: f64, warnings: &mut Vec<String>) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let target = libm::floor(fraction * n as f64 + 1e-9) as usize;
    let mut quotas: Vec<usize> = counts
        .iter()
        .enumerate()
        .map(|(class, &c)| {
            if c == 1 {
                warnings.push(format!("class {class} has a single record; it goes to train"));
                return 1;
            }
            (libm::floor(fraction * c as f64 + 1e-9) as usize).min(c - 1)
        })
        .collect();
    let mut assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 1).collect();
    let remainder = |c: usize| fraction * counts[c] as f64 - quotas[c] as f64;
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    for class in order {
        if assigned >= target {
            break;
        }
        if quotas[class] + 1 < counts[class] {
            quotas[class] += 1;
            assigned += 1;
        }
    }
    quotas
}

/// Stratified split: each class is shuffled with the seed and its first
/// quota records go to train.
pub fn split_train_test(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); ds.n_classes()];
    for (i, r) in ds.records().iter().enumerate() {
        by_class[r.label].push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::data(format!("class {empty} has no records")));
    }
    let mut warnings = Vec::new();
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = train_quotas(&counts, train_fraction, &mut warnings);
    let mut rng = derive_rng(seed, &[stream::SPLIT]);
    let (mut train_indices, mut test_indices) = (Vec::new(), Vec::new());
    for (members, &quota) in by_class.iter_mut().zip(&quotas) {
        members.shuffle(&mut rng);
        train_indices.extend_from_slice(&members[..quota]);
        test_indices.extend_from_slice(&members[quota..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(Split {
        train: ds.subset(&train_indices)?,
        test: ds.subset(&test_indices)?,
        train_indices,
        test_indices,
        warnings,
    })
}
