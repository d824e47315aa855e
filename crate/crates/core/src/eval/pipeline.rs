//! Train a proxy classifier on one split and score it on the split's test set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::classify::{KNearestNeighbors, NearestCentroid, TrainingSample};
use crate::eval::features::{extract_features, FeatureSet, MinMaxScaler};
use crate::eval::metrics::{evaluate, EvalReport};
use crate::leakage::{Side, Visibility, VisibilityMask};
use crate::random::carve_validation;
use crate::raster::{Coord, LabelMap, SpectralCube};
use crate::split::TrainTestSplit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    NearestCentroid,
    Knn { k: usize },
}

/// Whether feature windows respect the split's visibility mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Masking {
    /// Training data is removed from the test image and vice versa.
    Removal,
    /// Windows read the whole image.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxySetup {
    pub classifier: Classifier,
    pub features: FeatureSet,
    pub masking: Masking,
}

impl ProxySetup {
    /// Nearest centroid on the pixel spectrum.
    pub fn spectral() -> Self {
        Self {
            classifier: Classifier::NearestCentroid,
            features: FeatureSet::Spectral,
            masking: Masking::None,
        }
    }

    /// kNN on spectrum plus window mean.
    pub fn spatial(window: crate::raster::NeighborhoodSpec, k: usize, masking: Masking) -> Self {
        Self {
            classifier: Classifier::Knn { k },
            features: FeatureSet::SpatialSpectral { window },
            masking,
        }
    }
}

/// Optional validation subset carved from the training pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSpec {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    pub test: EvalReport,
    pub validation: Option<EvalReport>,
}

enum Model {
    Centroid(NearestCentroid),
    Knn(KNearestNeighbors, usize),
}

impl Model {
    fn predict(&self, f: &[f64]) -> Result<u16> {
        match self {
            Model::Centroid(m) => Ok(m.predict(f)),
            Model::Knn(m, k) => m.predict(f, *k),
        }
    }
}

pub fn evaluate_split<S: TrainTestSplit + ?Sized>(
    cube: &SpectralCube,
    labels: &LabelMap,
    split: &S,
    setup: &ProxySetup,
    validation: Option<ValidationSpec>,
) -> Result<SplitEvaluation> {
    labels.check_matches(cube)?;
    let dims = cube.dims();
    let window = setup.features.window();
    window.check_fits(dims)?;
    if split.training_pixels().is_empty() {
        return Err(Error::invalid("split has no training pixels"));
    }
    if split.test_pixels().is_empty() {
        return Err(Error::invalid("split has no test pixels"));
    }

    let visibility = split.visibility(dims);
    // scaling statistics only ever read training-visible pixels
    let scaler = MinMaxScaler::fit(cube, visibility.coords_with(Visibility::TrainVisible))?;
    let scaled = scaler.transform(cube);
    let mask: Option<&VisibilityMask> = match setup.masking {
        Masking::Removal => Some(&visibility),
        Masking::None => None,
    };

    let (fit_pixels, validation_pixels) = match validation {
        Some(v) => {
            let carve = carve_validation(split.training_pixels(), v.fraction, v.seed)?;
            (carve.training, Some(carve.validation))
        }
        None => (split.training_pixels().to_vec(), None),
    };

    let features_of = |pixels: &[Coord], side: Side| -> Result<Vec<Vec<f64>>> {
        pixels
            .par_iter()
            .map(|&c| extract_features(&scaled, c, window, mask, side))
            .collect()
    };

    let train_features = features_of(&fit_pixels, Side::Train)?;
    let train_classes: Vec<u16> = fit_pixels.iter().map(|&c| labels.get(c)).collect();
    let model = match setup.classifier {
        Classifier::NearestCentroid => Model::Centroid(NearestCentroid::fit(&train_features, &train_classes)?),
        Classifier::Knn { k } => {
            let samples = fit_pixels
                .iter()
                .zip(train_features)
                .zip(&train_classes)
                .map(|((&coord, features), &class)| TrainingSample { coord, class, features })
                .collect();
            Model::Knn(KNearestNeighbors::fit(samples)?, k)
        }
    };

    let score = |pixels: &[Coord], side: Side| -> Result<EvalReport> {
        let features = features_of(pixels, side)?;
        let predictions: Vec<(Coord, u16)> = pixels
            .par_iter()
            .zip(features.par_iter())
            .map(|(&c, f)| model.predict(f).map(|k| (c, k)))
            .collect::<Result<_>>()?;
        evaluate(labels, pixels, &predictions)
    };

    let test = score(split.test_pixels(), Side::Test)?;
    let validation = validation_pixels
        .map(|v| score(&v, Side::Train))
        .transpose()?;
    Ok(SplitEvaluation { test, validation })
}
