//! Training/test leakage through overlapping feature windows.
//!
//! A test pixel leaks when its feature window reaches a training pixel: the
//! classifier has then seen part of what it is tested on. Two reports exist:
//!
//! - *geometric*: windows over the full image, as most published pipelines
//!   extract them;
//! - *masked*: windows restricted to the test-visible part of the image, i.e.
//!   training data removed before testing. Under a consistent mask this is
//!   always empty; anything else is reported as a violation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Coord, Dims, LabelMap, NeighborhoodSpec, SpectralCube};
use crate::split::TrainTestSplit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    /// Belongs to the training image (training pixels, whole training patches).
    TrainVisible,
    /// Belongs to the test-time image.
    TestVisible,
    /// Visible to neither side.
    Unassigned,
}

/// Which side a feature window is being extracted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Train,
    Test,
}

impl Side {
    pub fn visibility(self) -> Visibility {
        match self {
            Side::Train => Visibility::TrainVisible,
            Side::Test => Visibility::TestVisible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMask {
    dims: Dims,
    states: Vec<Visibility>,
}

impl VisibilityMask {
    pub fn filled(dims: Dims, state: Visibility) -> Self {
        Self {
            dims,
            states: vec![state; dims.pixel_count()],
        }
    }

    pub fn from_states(dims: Dims, states: Vec<Visibility>) -> Result<Self> {
        if states.len() != dims.pixel_count() {
            return Err(Error::DimensionMismatch(format!(
                "mask for {dims} needs {} states, got {}",
                dims.pixel_count(),
                states.len()
            )));
        }
        Ok(Self { dims, states })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, c: Coord) -> Visibility {
        self.states[self.dims.index(c)]
    }

    pub fn set(&mut self, c: Coord, state: Visibility) {
        let i = self.dims.index(c);
        self.states[i] = state;
    }

    pub fn count(&self, state: Visibility) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    pub fn coords_with(&self, state: Visibility) -> impl Iterator<Item = Coord> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == state)
            .map(|(i, _)| self.dims.coord(i))
    }

    pub(crate) fn check_dims(&self, dims: Dims) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}, scene is {dims}",
                self.dims
            )));
        }
        Ok(())
    }
}

/// Removal-semantics mask of a split: patch folds hide whole patches, random
/// splits hide their training pixels.
pub fn build_visibility<S: TrainTestSplit + ?Sized>(split: &S, dims: Dims) -> VisibilityMask {
    split.visibility(dims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageMode {
    Geometric,
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub mode: LeakageMode,
    pub window: NeighborhoodSpec,
    pub test_pixel_count: usize,
    pub leaked_test_pixels: Vec<Coord>,
    pub leaked_fraction: f64,
    /// Leaked share of each class's test pixels; classes without test pixels
    /// are omitted.
    pub per_class_leak_fraction: BTreeMap<u16, f64>,
    /// Training pixels whose own window reaches a test pixel.
    pub training_pixels_touching_test: usize,
}

impl LeakageReport {
    pub fn leaked_count(&self) -> usize {
        self.leaked_test_pixels.len()
    }

    fn build(
        mode: LeakageMode,
        window: NeighborhoodSpec,
        labels: &LabelMap,
        test: &[Coord],
        leaked: Vec<Coord>,
        training_pixels_touching_test: usize,
    ) -> Self {
        let mut support: BTreeMap<u16, (usize, usize)> = BTreeMap::new();
        for &c in test {
            support.entry(labels.get(c)).or_default().0 += 1;
        }
        for &c in &leaked {
            support.entry(labels.get(c)).or_default().1 += 1;
        }
        let per_class_leak_fraction = support
            .into_iter()
            .filter(|(_, (n, _))| *n > 0)
            .map(|(k, (n, l))| (k, l as f64 / n as f64))
            .collect();
        let leaked_fraction = if test.is_empty() {
            0.0
        } else {
            leaked.len() as f64 / test.len() as f64
        };
        Self {
            mode,
            window,
            test_pixel_count: test.len(),
            leaked_test_pixels: leaked,
            leaked_fraction,
            per_class_leak_fraction,
            training_pixels_touching_test,
        }
    }
}

/// Marks every pixel whose window (of the given size) contains a marked pixel.
/// Separable: a running count along rows, then along columns. O(pixels).
pub(crate) fn dilate(marked: &[bool], dims: Dims, window: NeighborhoodSpec) -> Vec<bool> {
    let (h, w) = (dims.height, dims.width);
    let (rr, cr) = (window.row_radius(), window.col_radius());

    let mut horizontal = vec![false; marked.len()];
    for r in 0..h {
        let row = &marked[r * w..(r + 1) * w];
        let mut prefix = vec![0usize; w + 1];
        for c in 0..w {
            prefix[c + 1] = prefix[c] + row[c] as usize;
        }
        for c in 0..w {
            let lo = c.saturating_sub(cr);
            let hi = (c + cr + 1).min(w);
            horizontal[r * w + c] = prefix[hi] > prefix[lo];
        }
    }

    let mut out = vec![false; marked.len()];
    let mut prefix = vec![0usize; h + 1];
    for c in 0..w {
        for r in 0..h {
            prefix[r + 1] = prefix[r] + horizontal[r * w + c] as usize;
        }
        for r in 0..h {
            let lo = r.saturating_sub(rr);
            let hi = (r + rr + 1).min(h);
            out[r * w + c] = prefix[hi] > prefix[lo];
        }
    }
    out
}

fn check_split<S: TrainTestSplit + ?Sized>(split: &S, dims: Dims) -> Result<()> {
    for &c in split.training_pixels().iter().chain(split.test_pixels()) {
        dims.check(c)?;
    }
    Ok(())
}

fn indicator(coords: impl IntoIterator<Item = Coord>, dims: Dims) -> Vec<bool> {
    let mut v = vec![false; dims.pixel_count()];
    for c in coords {
        v[dims.index(c)] = true;
    }
    v
}

/// Test pixels whose full-image window contains a training pixel.
pub fn geometric_leakage<S: TrainTestSplit + ?Sized>(
    split: &S,
    labels: &LabelMap,
    window: NeighborhoodSpec,
) -> Result<LeakageReport> {
    let dims = labels.dims();
    window.check_fits(dims)?;
    check_split(split, dims)?;

    let train = indicator(split.training_pixels().iter().copied(), dims);
    let near_train = dilate(&train, dims, window);
    let leaked: Vec<Coord> = split
        .test_pixels()
        .iter()
        .copied()
        .filter(|&c| near_train[dims.index(c)])
        .collect();

    let test = indicator(split.test_pixels().iter().copied(), dims);
    let near_test = dilate(&test, dims, window);
    let touching = split
        .training_pixels()
        .iter()
        .filter(|&&c| near_test[dims.index(c)])
        .count();

    Ok(LeakageReport::build(
        LeakageMode::Geometric,
        window,
        labels,
        split.test_pixels(),
        leaked,
        touching,
    ))
}

/// Leakage under removal semantics: each window only sees pixels visible to its
/// own side. A consistent mask yields an empty report; a test pixel that is not
/// test-visible, or a training pixel left test-visible inside a test window,
/// counts as leaked.
pub fn masked_leakage<S: TrainTestSplit + ?Sized>(
    split: &S,
    labels: &LabelMap,
    window: NeighborhoodSpec,
    mask: &VisibilityMask,
) -> Result<LeakageReport> {
    let dims = labels.dims();
    window.check_fits(dims)?;
    mask.check_dims(dims)?;
    check_split(split, dims)?;

    let exposed_train = indicator(
        split
            .training_pixels()
            .iter()
            .copied()
            .filter(|&c| mask.get(c) == Visibility::TestVisible),
        dims,
    );
    let near_exposed = dilate(&exposed_train, dims, window);
    let leaked: Vec<Coord> = split
        .test_pixels()
        .iter()
        .copied()
        .filter(|&c| mask.get(c) != Visibility::TestVisible || near_exposed[dims.index(c)])
        .collect();

    let exposed_test = indicator(
        split
            .test_pixels()
            .iter()
            .copied()
            .filter(|&c| mask.get(c) == Visibility::TrainVisible),
        dims,
    );
    let near_exposed_test = dilate(&exposed_test, dims, window);
    let touching = split
        .training_pixels()
        .iter()
        .filter(|&&c| mask.get(c) != Visibility::TrainVisible || near_exposed_test[dims.index(c)])
        .count();

    Ok(LeakageReport::build(
        LeakageMode::Masked,
        window,
        labels,
        split.test_pixels(),
        leaked,
        touching,
    ))
}

/// Computes a per-pixel feature vector. Implemented by the proxy classifiers'
/// extractors in [`crate::eval::features`].
pub trait FeatureExtractor {
    fn extract(&self, cube: &SpectralCube, pixel: Coord, mask: &VisibilityMask, side: Side) -> Result<Vec<f64>>;
}

/// Dynamic leakage check: overwrite the spectra of every train-visible pixel
/// and verify no test feature vector changes (bit for bit), then the same with
/// test-visible pixels against training features.
pub fn perturbation_independence_check<S, F>(
    cube: &SpectralCube,
    split: &S,
    mask: &VisibilityMask,
    extractor: &F,
) -> Result<bool>
where
    S: TrainTestSplit + ?Sized,
    F: FeatureExtractor + ?Sized,
{
    mask.check_dims(cube.dims())?;
    check_split(split, cube.dims())?;

    let sides = [
        (Visibility::TrainVisible, split.test_pixels(), Side::Test),
        (Visibility::TestVisible, split.training_pixels(), Side::Train),
    ];
    for (perturbed_state, observed, side) in sides {
        let mut perturbed = cube.clone();
        for (i, c) in mask.coords_with(perturbed_state).enumerate() {
            for (b, v) in perturbed.spectrum_mut(c).iter_mut().enumerate() {
                *v = -1.0e3 - (i * 31 + b * 7) as f64;
            }
        }
        for &p in observed {
            let before = extractor.extract(cube, p, mask, side)?;
            let after = extractor.extract(&perturbed, p, mask, side)?;
            let same = before.len() == after.len()
                && before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
