use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};

/// One client's shard of the training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub client: u32,
    /// Ascending, unique indices into the parent dataset.
    pub indices: Vec<usize>,
    /// Most frequent source tag (ties: smallest tag). The only tag for
    /// source partitions.
    pub source: String,
}

impl Partition {
    fn new(client: u32, mut indices: Vec<usize>, parent: &Dataset) -> Self {
        indices.sort_unstable();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &indices {
            *counts.entry(parent.records()[i].source.as_str()).or_insert(0) += 1;
        }
        let mut source = "";
        let mut best = 0;
        for (tag, n) in counts {
            if n > best {
                best = n;
                source = tag;
            }
        }
        Partition { client, indices, source: String::from(source) }
    }

    /// Sample count n_k.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Record count per source tag in this shard.
    pub fn source_histogram(&self, parent: &Dataset) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for &i in &self.indices {
            *h.entry(parent.records()[i].source.clone()).or_insert(0) += 1;
        }
        h
    }

    /// Record count per class in this shard.
    pub fn class_histogram(&self, parent: &Dataset) -> Vec<usize> {
        let mut h = alloc::vec![0; parent.n_classes()];
        for &i in &self.indices {
            h[parent.records()[i].label] += 1;
        }
        h
    }
}

/// Sizes of `k` near-equal contiguous chunks of `n` items; the first `n % k`
/// chunks get one extra.
fn chunk_sizes(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |i| n / k + usize::from(i < n % k))
}

/// IID partitioning: shuffle all indices, then deal contiguous chunks.
pub fn partition_iid(train: &Dataset, k: usize, seed: u64) -> Result<Vec<Partition>> {
    if k == 0 {
        return Err(Error::config("need at least one client"));
    }
    if k > train.len() {
        return Err(Error::config(format!("{k} clients for only {} records", train.len())));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut derive_rng(seed, &[stream::PARTITION]));
    let mut start = 0;
    Ok(chunk_sizes(train.len(), k)
        .enumerate()
        .map(|(client, size)| {
            let chunk = order[start..start + size].to_vec();
            start += size;
            Partition::new(client as u32, chunk, train)
        })
        .collect())
}

/// Mutually exclusive partitioning: every client holds records of exactly
/// one source.
///
/// Sources are ordered by record count (descending, ties by tag) and
/// clients are assigned to them round-robin. Each source's records, in
/// dataset order, are cut into equal contiguous shards, one per client
/// assigned to it.
pub fn partition_by_source(train: &Dataset, k: usize) -> Result<Vec<Partition>> {
    if k < 2 {
        return Err(Error::config("source partitioning needs at least 2 clients"));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in train.records().iter().enumerate() {
        groups.entry(r.source.as_str()).or_default().push(i);
    }
    if k < groups.len() {
        return Err(Error::config(format!(
            "{k} clients cannot cover {} sources with single-source shards",
            groups.len()
        )));
    }
    let mut sources: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    sources.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
    let n_sources = sources.len();
    let shards_per_source: Vec<usize> = (0..n_sources).map(|s| k / n_sources + usize::from(s < k % n_sources)).collect();
    let mut shards: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n_sources);
    for ((tag, members), &count) in sources.iter().zip(&shards_per_source) {
        if members.len() < count {
            return Err(Error::config(format!(
                "source {tag} has {} records, too few for {count} clients",
                members.len()
            )));
        }
        let mut start = 0;
        let mut cut = Vec::with_capacity(count);
        for size in chunk_sizes(members.len(), count) {
            cut.push(members[start..start + size].to_vec());
            start += size;
        }
        shards.push(cut);
    }
    Ok((0..k)
        .map(|client| {
            let (s, nth) = (client % n_sources, client / n_sources);
            Partition::new(client as u32, core::mem::take(&mut shards[s][nth]), train)
        })
        .collect())
}
