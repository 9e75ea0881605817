//! Labeled SPD datasets: the container type, the `SPDS` file format,
//! covariance descriptors, synthetic generation and stratified splits.

mod descriptor;
mod format;
mod synthetic;

pub use descriptor::covariance_descriptor;
pub use format::{read_dataset, read_text_dataset, write_dataset, FLAG_REPAIR, MAGIC, VERSION};
pub use synthetic::{generate_synthetic, synthetic_centers, SyntheticSpec, CENTER_SEPARATION};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// SPD samples of one dimension with 1-based class labels in `1..=label_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSpdDataset {
    samples: Vec<SpdMatrix>,
    labels: Vec<u32>,
    label_count: u32,
}

impl LabeledSpdDataset {
    pub fn new(samples: Vec<SpdMatrix>, labels: Vec<u32>, label_count: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidDataset("dataset has no samples".into()));
        }
        if samples.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if label_count == 0 {
            return Err(Error::InvalidDataset("label count must be at least 1".into()));
        }
        let d = samples[0].dim();
        for (i, x) in samples.iter().enumerate() {
            if x.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: x.dim(),
                }
                .at("sample", i));
            }
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y == 0 || y > label_count) {
            return Err(Error::InvalidDataset(format!(
                "sample {i}: label {y} outside 1..={label_count}"
            )));
        }
        Ok(LabeledSpdDataset {
            samples,
            labels,
            label_count,
        })
    }

    /// Infers the label count from the largest label.
    pub fn from_labeled(samples: Vec<SpdMatrix>, labels: Vec<u32>) -> Result<Self> {
        let l = labels.iter().copied().max().unwrap_or(0);
        Self::new(samples, labels, l)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    pub fn samples(&self) -> &[SpdMatrix] {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of samples per class, indexed by `label - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_count as usize];
        for &y in &self.labels {
            counts[y as usize - 1] += 1;
        }
        counts
    }

    /// Fails with `InvalidDataset` if some class has no samples.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::InvalidDataset(format!("class {} has no samples", c + 1))),
            None => Ok(()),
        }
    }

    /// The samples at `indices`, in that order, keeping the label count.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidInput(format!("sample index {i} out of range")));
            }
            samples.push(self.samples[i].clone());
            labels.push(self.labels[i]);
        }
        Self::new(samples, labels, self.label_count)
    }
}

/// Stratified split: each class contributes `round(fraction·count)` samples
/// to the first part (at least one, and at least one left for the second).
pub fn split(
    data: &LabeledSpdDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledSpdDataset, LabeledSpdDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for class in 1..=data.label_count() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "class {class} has {} samples, need at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        first.extend_from_slice(&members[..take]);
        second.extend_from_slice(&members[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((data.subset(&first)?, data.subset(&second)?))
}
