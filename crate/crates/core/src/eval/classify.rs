//! Deterministic proxy classifiers.
//!
//! Nearest centroid stands in for a spectral-only network, k-nearest-neighbour
//! on spatial-spectral features for a network that looks at a pixel's
//! surroundings. Both are invariant to the order training samples arrive in.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::raster::Coord;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    /// `(class, centroid)` sorted by class.
    centroids: Vec<(u16, Vec<f64>)>,
}

impl NearestCentroid {
    pub fn fit(features: &[Vec<f64>], classes: &[u16]) -> Result<Self> {
        if features.len() != classes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature vectors for {} labels",
                features.len(),
                classes.len()
            )));
        }
        if features.is_empty() {
            return Err(Error::invalid("nearest centroid needs at least one training sample"));
        }
        // Sum in a canonical order so the centroids are bit-identical under
        // any permutation of the input.
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&i, &j| {
            classes[i]
                .cmp(&classes[j])
                .then_with(|| lexicographic(&features[i], &features[j]))
        });

        let mut centroids: Vec<(u16, Vec<f64>)> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for i in order {
            let class = classes[i];
            match centroids.last_mut() {
                Some((k, sum)) if *k == class => {
                    for (s, v) in sum.iter_mut().zip(&features[i]) {
                        *s += v;
                    }
                    *counts.last_mut().unwrap() += 1;
                }
                _ => {
                    centroids.push((class, features[i].clone()));
                    counts.push(1);
                }
            }
        }
        for ((_, sum), n) in centroids.iter_mut().zip(counts) {
            for s in sum.iter_mut() {
                *s /= n as f64;
            }
        }
        Ok(Self { centroids })
    }

    pub fn classes(&self) -> impl Iterator<Item = u16> + '_ {
        self.centroids.iter().map(|(k, _)| *k)
    }

    pub fn centroid(&self, class: u16) -> Option<&[f64]> {
        self.centroids
            .iter()
            .find(|(k, _)| *k == class)
            .map(|(_, c)| c.as_slice())
    }

    /// Closest centroid; equal distances go to the smaller class id.
    pub fn predict(&self, feature: &[f64]) -> u16 {
        let mut best = (f64::INFINITY, 0u16);
        for (class, centroid) in &self.centroids {
            let d = squared_distance(feature, centroid);
            if d < best.0 {
                best = (d, *class);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub coord: Coord,
    pub class: u16,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KNearestNeighbors {
    samples: Vec<TrainingSample>,
}

impl KNearestNeighbors {
    pub fn fit(samples: Vec<TrainingSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("kNN needs at least one training sample"));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Majority vote of the `k` nearest samples. Distance ties are broken by
    /// `(row, col)` of the training pixel, vote ties by the smaller class id.
    pub fn predict(&self, query: &[f64], k: usize) -> Result<u16> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::invalid(format!("k must be odd and positive, got {k}")));
        }
        if k > self.samples.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the {} training samples",
                self.samples.len()
            )));
        }
        let mut ranked: Vec<(f64, Coord, u16)> = self
            .samples
            .iter()
            .map(|s| (squared_distance(query, &s.features), s.coord, s.class))
            .collect();
        let key = |a: &(f64, Coord, u16), b: &(f64, Coord, u16)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, key);
            ranked.truncate(k);
        }

        let mut votes: Vec<(u16, usize)> = Vec::new();
        for &(_, _, class) in &ranked {
            match votes.iter_mut().find(|(c, _)| *c == class) {
                Some((_, n)) => *n += 1,
                None => votes.push((class, 1)),
            }
        }
        votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(votes[0].0)
    }
}

/// Stand-alone kNN prediction over `(coord, class, features)` training samples.
pub fn predict_knn(training: &[TrainingSample], query: &[f64], k: usize) -> Result<u16> {
    KNearestNeighbors::fit(training.to_vec())?.predict(query, k)
}
