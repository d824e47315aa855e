//! What patch folds and random splits have in common.

use serde::{Deserialize, Serialize};

use crate::leakage::{Visibility, VisibilityMask};
use crate::raster::{Coord, Dims, LabelMap};

/// Per-class pixel counts; `counts[k - 1]` holds class `k`. Serializes as a
/// plain array of length K.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassHistogram {
    counts: Vec<usize>,
}

impl ClassHistogram {
    pub fn zeros(class_count: u16) -> Self {
        Self {
            counts: vec![0; class_count as usize],
        }
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn class_count(&self) -> u16 {
        self.counts.len() as u16
    }

    /// Count for class `k` (1-based); zero for out-of-range classes.
    pub fn get(&self, class: u16) -> usize {
        match class {
            0 => 0,
            k => self.counts.get(k as usize - 1).copied().unwrap_or(0),
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, usize)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &n)| (i as u16 + 1, n))
    }

    pub(crate) fn add(&mut self, class: u16) {
        if class != 0 {
            self.counts[class as usize - 1] += 1;
        }
    }
}

/// Histogram of classes `1..=K` among `pixels`; unlabeled pixels are ignored.
pub fn class_histogram(labels: &LabelMap, pixels: &[Coord]) -> ClassHistogram {
    let mut h = ClassHistogram::zeros(labels.class_count());
    for &c in pixels {
        h.add(labels.get(c));
    }
    h
}

/// A disjoint training/test partition of a scene's labeled pixels.
pub trait TrainTestSplit {
    /// Training pixels, sorted row-major.
    fn training_pixels(&self) -> &[Coord];

    /// Test pixels, sorted row-major.
    fn test_pixels(&self) -> &[Coord];

    /// Pixels removed from the test-time image. Random splits remove exactly
    /// their training pixels; patch folds remove whole patches.
    fn visibility(&self, dims: Dims) -> VisibilityMask {
        let mut mask = VisibilityMask::filled(dims, Visibility::TestVisible);
        for &c in self.training_pixels() {
            mask.set(c, Visibility::TrainVisible);
        }
        mask
    }
}
