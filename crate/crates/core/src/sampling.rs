//! Class-balanced downsampling and the class-subset tuning sample.
//!
//! Both operations take the label of every record and return the indices
//! of the kept records in input order, so they work on any record type.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::LeafLabel;

pub const DEFAULT_TUNING_CLASSES: usize = 1500;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Maximum instances kept per class; `None` keeps everything.
    pub per_class_cap: Option<usize>,
    pub seed: u64,
    pub tuning_class_count: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            per_class_cap: None,
            seed: 0,
            tuning_class_count: DEFAULT_TUNING_CLASSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("per-class cap must be at least 1")]
    ZeroCap,
    #[error("target fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
}

fn group_by_class(labels: &[LeafLabel]) -> BTreeMap<&LeafLabel, Vec<usize>> {
    let mut groups: BTreeMap<&LeafLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Keeps a seeded uniform subset of `cap` instances of every class larger
/// than the cap; smaller classes are kept whole.
pub fn downsample(labels: &[LeafLabel], config: &SamplerConfig) -> Result<Vec<usize>, SamplingError> {
    let Some(cap) = config.per_class_cap else {
        return Ok((0..labels.len()).collect());
    };
    if cap == 0 {
        return Err(SamplingError::ZeroCap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut keep = vec![false; labels.len()];
    for members in group_by_class(labels).values() {
        if members.len() <= cap {
            for &i in members {
                keep[i] = true;
            }
        } else {
            for pos in index::sample(&mut rng, members.len(), cap) {
                keep[members[pos]] = true;
            }
        }
    }
    Ok(keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect())
}

/// Number of instances kept by a cap, without sampling.
pub fn kept_under_cap(labels: &[LeafLabel], cap: usize) -> usize {
    group_by_class(labels).values().map(|m| m.len().min(cap)).sum()
}

/// Smallest cap keeping at least `fraction` of the data.
pub fn cap_for_fraction(labels: &[LeafLabel], fraction: f64) -> Result<usize, SamplingError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SamplingError::BadFraction(fraction));
    }
    let sizes: Vec<usize> = group_by_class(labels).values().map(Vec::len).collect();
    let largest = sizes.iter().copied().max().unwrap_or(1);
    let target = (fraction * labels.len() as f64).ceil() as usize;
    let kept = |cap: usize| sizes.iter().map(|&s| s.min(cap)).sum::<usize>();
    let (mut lo, mut hi) = (1usize, largest.max(1));
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if kept(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// All instances of `tuning_class_count` classes drawn uniformly at random.
/// With fewer classes available, every class is used and a warning logged.
pub fn tuning_subsample(labels: &[LeafLabel], config: &SamplerConfig) -> Vec<usize> {
    let groups = group_by_class(labels);
    if config.tuning_class_count >= groups.len() {
        if config.tuning_class_count > groups.len() {
            log::warn!(
                "tuning sample asked for {} classes but only {} exist; using all",
                config.tuning_class_count,
                groups.len()
            );
        }
        return (0..labels.len()).collect();
    }
    let classes: Vec<&LeafLabel> = groups.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chosen: std::collections::BTreeSet<&LeafLabel> =
        index::sample(&mut rng, classes.len(), config.tuning_class_count)
            .into_iter()
            .map(|i| classes[i])
            .collect();
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| chosen.contains(l).then_some(i))
        .collect()
}
