//! Synthetic hyperspectral scenes with spatially contiguous classes and
//! spatially correlated noise.
//!
//! Labels come from a Voronoi partition of random sites, sites assigned to
//! classes round-robin. Each pixel's spectrum is its class signature plus a
//! per-band noise field that is box-blurred `correlation_radius` times, plus
//! white noise.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Coord, Dims, LabelMap, SpectralCube};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub class_count: u16,
    /// Voronoi sites per class.
    pub region_seeds_per_class: usize,
    /// Mean pairwise Euclidean distance between class signatures.
    pub signature_separation: f64,
    pub iid_noise_sigma: f64,
    pub correlated_noise_sigma: f64,
    /// Number of 3x3 box-blur passes applied to the correlated noise.
    pub correlation_radius: usize,
    /// Share of pixels relabeled 0.
    pub unlabeled_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            bands: 16,
            class_count: 4,
            region_seeds_per_class: 3,
            signature_separation: 1.0,
            iid_noise_sigma: 0.1,
            correlated_noise_sigma: 0.5,
            correlation_radius: 4,
            unlabeled_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(Error::invalid(format!(
                "synthetic scenes must be at least 8x8, got {}x{}",
                self.height, self.width
            )));
        }
        if self.bands < 4 {
            return Err(Error::invalid("synthetic scenes need at least 4 bands"));
        }
        if self.class_count < 2 {
            return Err(Error::invalid("synthetic scenes need at least 2 classes"));
        }
        if self.region_seeds_per_class == 0 {
            return Err(Error::invalid("need at least one region seed per class"));
        }
        let sites = self.class_count as usize * self.region_seeds_per_class;
        if sites > self.height * self.width {
            return Err(Error::invalid("more region seeds than pixels"));
        }
        for (name, v) in [
            ("signature_separation", self.signature_separation),
            ("iid_noise_sigma", self.iid_noise_sigma),
            ("correlated_noise_sigma", self.correlated_noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.unlabeled_fraction) {
            return Err(Error::invalid(format!(
                "unlabeled_fraction must lie in [0, 1), got {}",
                self.unlabeled_fraction
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims {
            height: self.height,
            width: self.width,
        }
    }
}

/// Generates a cube and its label map; identical configs give identical output.
pub fn generate_scene(config: &SynthConfig) -> Result<(SpectralCube, LabelMap)> {
    config.validate()?;
    let dims = config.dims();
    let regions = voronoi_labels(config);
    let signatures = class_signatures(config);

    let correlated: Vec<Vec<f64>> = (0..config.bands)
        .into_par_iter()
        .map(|b| correlated_field(config, b))
        .collect();

    let mut iid_rng = seed::rng(config.seed, &[stream::SYNTH_IID]);
    let mut values = Vec::with_capacity(dims.pixel_count() * config.bands);
    for i in 0..dims.pixel_count() {
        let sig = &signatures[regions[i] as usize - 1];
        for b in 0..config.bands {
            let white: f64 = iid_rng.sample(StandardNormal);
            values.push(sig[b] + correlated[b][i] + config.iid_noise_sigma * white);
        }
    }

    let mut labels = regions;
    let unlabeled = (config.unlabeled_fraction * labels.len() as f64).round() as usize;
    if unlabeled > 0 {
        let mut rng = seed::rng(config.seed, &[stream::SYNTH_UNLABELED]);
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        for i in 0..unlabeled {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
            labels[idx[i]] = 0;
        }
    }

    let cube = SpectralCube::new(config.height, config.width, config.bands, values)?;
    let labels = LabelMap::with_class_count(config.height, config.width, labels, config.class_count)?;
    Ok((cube, labels))
}

/// Index of the nearest Voronoi site for every pixel, by squared Euclidean
/// distance with ties to the lower site index.
fn voronoi_cells(config: &SynthConfig) -> Vec<usize> {
    let dims = config.dims();
    let mut rng = seed::rng(config.seed, &[stream::SYNTH_SITES]);
    let site_count = config.class_count as usize * config.region_seeds_per_class;
    let mut sites: Vec<(i64, i64)> = Vec::with_capacity(site_count);
    while sites.len() < site_count {
        let s = (
            rng.random_range(0..dims.height) as i64,
            rng.random_range(0..dims.width) as i64,
        );
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    dims.coords()
        .map(|c| {
            let (r, col) = (c.row as i64, c.col as i64);
            sites
                .iter()
                .enumerate()
                .min_by_key(|(i, (sr, sc))| ((sr - r).pow(2) + (sc - col).pow(2), *i))
                .map(|(i, _)| i)
                .expect("at least one site")
        })
        .collect()
}

/// Sites are assigned to classes round-robin.
fn voronoi_labels(config: &SynthConfig) -> Vec<u16> {
    let k = config.class_count as usize;
    voronoi_cells(config)
        .into_iter()
        .map(|site| (site % k) as u16 + 1)
        .collect()
}

/// Smooth class spectra: a common baseline plus a class-specific sum of
/// low-frequency cosines, scaled to the requested mean pairwise separation.
fn class_signatures(config: &SynthConfig) -> Vec<Vec<f64>> {
    const COMPONENTS: usize = 3;
    let mut rng = seed::rng(config.seed, &[stream::SYNTH_SIGNATURES]);
    let bands = config.bands;
    let position = |b: usize| b as f64 / (bands - 1) as f64;

    let shapes: Vec<Vec<f64>> = (0..config.class_count)
        .map(|_| {
            let terms: Vec<(f64, f64)> = (0..COMPONENTS)
                .map(|_| {
                    (
                        rng.sample::<f64, _>(StandardNormal),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            (0..bands)
                .map(|b| {
                    terms
                        .iter()
                        .enumerate()
                        .map(|(m, (a, phase))| a * (std::f64::consts::PI * (m + 1) as f64 * position(b) + phase).cos())
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..shapes.len() {
        for j in i + 1..shapes.len() {
            total += shapes[i]
                .iter()
                .zip(&shapes[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            pairs += 1;
        }
    }
    let mean = total / pairs as f64;
    let scale = if mean > 0.0 { config.signature_separation / mean } else { 0.0 };
    shapes
        .into_iter()
        .map(|s| {
            s.into_iter()
                .enumerate()
                .map(|(b, v)| 0.5 + 0.2 * position(b) + scale * v)
                .collect()
        })
        .collect()
}

/// White noise blurred `correlation_radius` times with a clamped 3x3 box,
/// rescaled to standard deviation `correlated_noise_sigma`.
fn correlated_field(config: &SynthConfig, band: usize) -> Vec<f64> {
    let dims = config.dims();
    let n = dims.pixel_count();
    if config.correlated_noise_sigma == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = seed::rng(config.seed, &[stream::SYNTH_CORRELATED, band as u64]);
    let mut field: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    for _ in 0..config.correlation_radius {
        field = box_blur(&field, dims);
    }
    let mean = field.iter().sum::<f64>() / n as f64;
    let sd = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = if sd > 0.0 { config.correlated_noise_sigma / sd } else { 0.0 };
    field.iter().map(|v| (v - mean) * scale).collect()
}

fn box_blur(field: &[f64], dims: Dims) -> Vec<f64> {
    let (h, w) = (dims.height, dims.width);
    let mut out = vec![0.0; field.len()];
    for r in 0..h {
        for c in 0..w {
            let mut sum = 0.0;
            let mut count = 0.0;
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    sum += field[rr * w + cc];
                    count += 1.0;
                }
            }
            out[r * w + c] = sum / count;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    /// Pearson r per band; 0 for constant bands.
    pub per_band: Vec<f64>,
    pub mean: f64,
    pub degenerate_bands: Vec<usize>,
}

/// Pearson correlation between each pixel and its neighbour `lag` pixels to
/// the right and `lag` pixels below (both pairings pooled), averaged over
/// bands.
pub fn scene_autocorrelation(cube: &SpectralCube, lag: usize) -> Result<Autocorrelation> {
    let dims = cube.dims();
    if lag >= dims.height.min(dims.width) {
        return Err(Error::invalid(format!(
            "lag {lag} must be smaller than both dimensions of the {dims} cube"
        )));
    }
    let mut pairs: Vec<(Coord, Coord)> = Vec::new();
    for r in 0..dims.height {
        for c in 0..dims.width - lag {
            pairs.push((Coord::new(r, c), Coord::new(r, c + lag)));
        }
    }
    for r in 0..dims.height - lag {
        for c in 0..dims.width {
            pairs.push((Coord::new(r, c), Coord::new(r + lag, c)));
        }
    }

    let mut per_band = Vec::with_capacity(cube.bands());
    let mut degenerate_bands = Vec::new();
    for b in 0..cube.bands() {
        let first = cube.get(Coord::new(0, 0), b);
        if (0..dims.pixel_count()).all(|i| cube.get(dims.coord(i), b) == first) {
            degenerate_bands.push(b);
            per_band.push(0.0);
            continue;
        }
        let n = pairs.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (p, q) in &pairs {
            sx += cube.get(*p, b);
            sy += cube.get(*q, b);
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (p, q) in &pairs {
            let (dx, dy) = (cube.get(*p, b) - mx, cube.get(*q, b) - my);
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        if sxx <= 0.0 || syy <= 0.0 {
            degenerate_bands.push(b);
            per_band.push(0.0);
        } else {
            per_band.push(sxy / (sxx * syy).sqrt());
        }
    }
    let mean = per_band.iter().sum::<f64>() / per_band.len() as f64;
    Ok(Autocorrelation {
        per_band,
        mean,
        degenerate_bands,
    })
}
