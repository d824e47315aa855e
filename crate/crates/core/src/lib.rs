//! Leak-free evaluation tooling for hyperspectral scene segmentation.
//!
//! The crate generates patch-based training/test folds (random non-overlapping
//! rectangles become training data and are removed from the scene), the random
//! pixel splits commonly used in the literature, and the machinery needed to show
//! why the latter over-estimate accuracy: a leakage auditor, deterministic proxy
//! classifiers, segmentation metrics and a paired Wilcoxon signed-rank test.
//!
//! Module map:
//!
//! - [`raster`]: cubes, label maps, coordinates, windows and patch arithmetic.
//! - [`patch`]: patch-based fold generation and dataset presets.
//! - [`random`]: balanced / imbalanced Monte-Carlo pixel splits.
//! - [`leakage`]: visibility masks, geometric and masked leakage reports.
//! - [`eval`]: feature extraction, classifiers, metrics, gap analysis, Wilcoxon.
//! - [`synth`]: synthetic scenes with contiguous classes and correlated noise.
//! - [`io`]: NPY, JSON manifests and PPM rendering.
//! - [`cli`]: the `hsi-bench` command line.

pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod leakage;
pub mod patch;
pub mod random;
pub mod raster;
pub mod seed;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
pub use raster::{Coord, Dims, LabelMap, NeighborhoodSpec, PatchRect, SpectralCube};
pub use split::TrainTestSplit;
