//! Per-pixel feature vectors for the proxy classifiers.
//!
//! The spectral variant is the pixel's own spectrum. The spatial-spectral
//! variant appends the mean spectrum of the pixel's window, averaged only over
//! pixels visible to the requested side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::{FeatureExtractor, Side, VisibilityMask};
use crate::raster::{Coord, Dims, NeighborhoodSpec, SpectralCube};

/// Feature vector for `pixel`. With `mask = None` the window sees the whole
/// image, which is how features are usually extracted under random splits.
pub fn extract_features(
    cube: &SpectralCube,
    pixel: Coord,
    window: NeighborhoodSpec,
    mask: Option<&VisibilityMask>,
    side: Side,
) -> Result<Vec<f64>> {
    let dims = cube.dims();
    dims.check(pixel)?;
    if let Some(m) = mask {
        if m.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}, cube is {dims}",
                m.dims()
            )));
        }
    }
    let spectrum = cube.spectrum(pixel);
    if window.is_single_pixel() {
        return Ok(spectrum.to_vec());
    }

    let bands = cube.bands();
    let mut features = Vec::with_capacity(2 * bands);
    features.extend_from_slice(spectrum);
    features.extend(window_mean(cube, pixel, window, dims, mask, side));
    Ok(features)
}

fn window_mean(
    cube: &SpectralCube,
    pixel: Coord,
    window: NeighborhoodSpec,
    dims: Dims,
    mask: Option<&VisibilityMask>,
    side: Side,
) -> Vec<f64> {
    let wanted = side.visibility();
    let (rows, cols) = window.clipped_bounds(pixel, dims);
    let mut sum = vec![0.0; cube.bands()];
    let mut n = 0usize;
    for r in rows {
        for c in cols.clone() {
            let coord = Coord::new(r, c);
            if mask.is_some_and(|m| m.get(coord) != wanted) {
                continue;
            }
            for (s, v) in sum.iter_mut().zip(cube.spectrum(coord)) {
                *s += v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return cube.spectrum(pixel).to_vec();
    }
    sum.iter().map(|s| s / n as f64).collect()
}

/// Which features a classifier is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSet {
    Spectral,
    SpatialSpectral { window: NeighborhoodSpec },
}

impl FeatureSet {
    pub fn window(&self) -> NeighborhoodSpec {
        match self {
            FeatureSet::Spectral => NeighborhoodSpec::single_pixel(),
            FeatureSet::SpatialSpectral { window } => *window,
        }
    }
}

/// [`FeatureExtractor`] adapter; `masked = false` ignores the mask entirely.
#[derive(Debug, Clone, Copy)]
pub struct WindowExtractor {
    pub window: NeighborhoodSpec,
    pub masked: bool,
}

impl WindowExtractor {
    pub fn spectral() -> Self {
        Self {
            window: NeighborhoodSpec::single_pixel(),
            masked: false,
        }
    }

    pub fn masked(window: NeighborhoodSpec) -> Self {
        Self { window, masked: true }
    }

    pub fn unmasked(window: NeighborhoodSpec) -> Self {
        Self { window, masked: false }
    }
}

impl FeatureExtractor for WindowExtractor {
    fn extract(&self, cube: &SpectralCube, pixel: Coord, mask: &VisibilityMask, side: Side) -> Result<Vec<f64>> {
        extract_features(cube, pixel, self.window, self.masked.then_some(mask), side)
    }
}

/// Per-band min-max scaling fitted on a subset of pixels (the training-visible
/// ones, so test data never informs it).
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    scale: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(cube: &SpectralCube, pixels: impl IntoIterator<Item = Coord>) -> Result<Self> {
        let bands = cube.bands();
        let mut min = vec![f64::INFINITY; bands];
        let mut max = vec![f64::NEG_INFINITY; bands];
        let mut any = false;
        for c in pixels {
            any = true;
            for (b, &v) in cube.spectrum(c).iter().enumerate() {
                min[b] = min[b].min(v);
                max[b] = max[b].max(v);
            }
        }
        if !any {
            return Err(Error::invalid("cannot fit a scaler on zero pixels"));
        }
        let scale = min
            .iter()
            .zip(&max)
            .map(|(lo, hi)| if hi > lo { 1.0 / (hi - lo) } else { 1.0 })
            .collect();
        Ok(Self { min, scale })
    }

    pub fn transform(&self, cube: &SpectralCube) -> SpectralCube {
        let bands = cube.bands();
        let values = cube
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let b = i % bands;
                (v - self.min[b]) * self.scale[b]
            })
            .collect();
        SpectralCube::new(cube.height(), cube.width(), bands, values)
            .expect("scaling preserves shape and finiteness")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::Visibility;

    fn ramp(h: usize, w: usize, bands: usize) -> SpectralCube {
        let values = (0..h * w * bands).map(|i| i as f64).collect();
        SpectralCube::new(h, w, bands, values).unwrap()
    }

    #[test]
    fn single_pixel_window_is_the_spectrum() {
        let cube = ramp(5, 5, 3);
        let mask = VisibilityMask::filled(cube.dims(), Visibility::TrainVisible);
        let f = extract_features(&cube, Coord::new(2, 2), NeighborhoodSpec::single_pixel(), Some(&mask), Side::Test).unwrap();
        assert_eq!(f, cube.spectrum(Coord::new(2, 2)));
    }

    #[test]
    fn interior_window_mean() {
        let cube = ramp(7, 7, 2);
        let window = NeighborhoodSpec::square(5).unwrap();
        let f = extract_features(&cube, Coord::new(3, 3), window, None, Side::Test).unwrap();
        assert_eq!(f.len(), 4);
        let mut expected = [0.0; 2];
        for r in 1..6 {
            for c in 1..6 {
                for (b, e) in expected.iter_mut().enumerate() {
                    *e += cube.get(Coord::new(r, c), b) / 25.0;
                }
            }
        }
        for b in 0..2 {
            assert!((f[2 + b] - expected[b]).abs() < 1e-9);
        }
        // symmetric ramp: window mean equals the center
        assert_eq!(&f[..2], cube.spectrum(Coord::new(3, 3)));
    }

    #[test]
    fn masked_mean_skips_other_side_and_falls_back() {
        let cube = ramp(3, 3, 1);
        let mut mask = VisibilityMask::filled(cube.dims(), Visibility::TrainVisible);
        mask.set(Coord::new(1, 1), Visibility::TestVisible);
        mask.set(Coord::new(0, 0), Visibility::TestVisible);
        let w3 = NeighborhoodSpec::square(3).unwrap();
        let f = extract_features(&cube, Coord::new(1, 1), w3, Some(&mask), Side::Test).unwrap();
        assert_eq!(f, vec![4.0, 2.0]);
        let lonely = VisibilityMask::filled(cube.dims(), Visibility::Unassigned);
        let f = extract_features(&cube, Coord::new(2, 2), w3, Some(&lonely), Side::Train).unwrap();
        assert_eq!(f, vec![8.0, 8.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let cube = ramp(3, 3, 1);
        let mask = VisibilityMask::filled(Dims::new(3, 4).unwrap(), Visibility::TestVisible);
        let w3 = NeighborhoodSpec::square(3).unwrap();
        assert!(extract_features(&cube, Coord::new(1, 1), w3, Some(&mask), Side::Test).is_err());
    }

    #[test]
    fn scaler_maps_fit_pixels_to_unit_range() {
        let cube = ramp(2, 2, 2);
        let s = MinMaxScaler::fit(&cube, cube.dims().coords()).unwrap();
        let t = s.transform(&cube);
        assert_eq!(t.spectrum(Coord::new(0, 0)), &[0.0, 0.0]);
        assert_eq!(t.spectrum(Coord::new(1, 1)), &[1.0, 1.0]);
        assert!(MinMaxScaler::fit(&cube, std::iter::empty()).is_err());
    }
}
