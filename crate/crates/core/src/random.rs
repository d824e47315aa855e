//! Random pixel splits as used throughout the literature: balanced (equal count
//! per class) or imbalanced (uniform over the pooled labeled pixels), repeated
//! in a Monte-Carlo fashion, plus validation carving.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Coord, LabelMap};
use crate::seed::{self, stream, Rng};
use crate::split::{class_histogram, ClassHistogram, TrainTestSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    /// `per_class` training pixels from every class present in the scene.
    Balanced { per_class: usize },
    /// `total` training pixels drawn from all labeled pixels together.
    Imbalanced { total: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSplitConfig {
    #[serde(flatten)]
    pub sampling: SamplingMode,
    pub runs: usize,
    pub seed: u64,
}

impl RandomSplitConfig {
    pub fn balanced(per_class: usize, runs: usize, seed: u64) -> Self {
        Self {
            sampling: SamplingMode::Balanced { per_class },
            runs,
            seed,
        }
    }

    pub fn imbalanced(total: usize, runs: usize, seed: u64) -> Self {
        Self {
            sampling: SamplingMode::Imbalanced { total },
            runs,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = match self.sampling {
            SamplingMode::Balanced { per_class } => per_class,
            SamplingMode::Imbalanced { total } => total,
        };
        if n == 0 {
            return Err(Error::invalid("requested training count must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("run count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub run: usize,
    pub training_pixels: Vec<Coord>,
    pub test_pixels: Vec<Coord>,
    pub train_counts: ClassHistogram,
    pub test_counts: ClassHistogram,
}

impl SplitAssignment {
    /// Completes an assignment from its training pixels: the test set is every
    /// other labeled pixel.
    pub fn from_training(run: usize, mut training_pixels: Vec<Coord>, labels: &LabelMap) -> Result<Self> {
        let dims = labels.dims();
        training_pixels.sort_unstable();
        let mut is_train = vec![false; dims.pixel_count()];
        for &c in &training_pixels {
            dims.check(c)?;
            if !labels.is_labeled(c) {
                return Err(Error::Validation(format!(
                    "run {run}: training pixel ({}, {}) is unlabeled",
                    c.row, c.col
                )));
            }
            let i = dims.index(c);
            if is_train[i] {
                return Err(Error::Validation(format!(
                    "run {run}: training pixel ({}, {}) listed twice",
                    c.row, c.col
                )));
            }
            is_train[i] = true;
        }
        let test_pixels: Vec<Coord> = labels
            .labeled_pixels()
            .into_iter()
            .filter(|&c| !is_train[dims.index(c)])
            .collect();
        Ok(Self {
            run,
            train_counts: class_histogram(labels, &training_pixels),
            test_counts: class_histogram(labels, &test_pixels),
            training_pixels,
            test_pixels,
        })
    }
}

impl TrainTestSplit for SplitAssignment {
    fn training_pixels(&self) -> &[Coord] {
        &self.training_pixels
    }

    fn test_pixels(&self) -> &[Coord] {
        &self.test_pixels
    }
}

/// Moves `k` uniformly chosen elements to the front of `items` (partial
/// Fisher-Yates) and returns them.
fn choose_prefix<'a, T>(items: &'a mut [T], k: usize, rng: &mut Rng) -> &'a [T] {
    debug_assert!(k <= items.len());
    for i in 0..k {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    &items[..k]
}

/// One Monte-Carlo run, seeded by `(config.seed, run)`.
pub fn generate_random_split(
    labels: &LabelMap,
    config: &RandomSplitConfig,
    run: usize,
) -> Result<SplitAssignment> {
    config.validate()?;
    let mut rng = seed::rng(config.seed, &[stream::RANDOM, run as u64]);
    let mut training = Vec::new();
    match config.sampling {
        SamplingMode::Balanced { per_class } => {
            let mut by_class: Vec<Vec<Coord>> = vec![Vec::new(); labels.class_count() as usize];
            for c in labels.labeled_pixels() {
                by_class[labels.get(c) as usize - 1].push(c);
            }
            for (i, pool) in by_class.iter_mut().enumerate() {
                if pool.is_empty() {
                    continue;
                }
                if pool.len() < per_class {
                    return Err(Error::InsufficientClassSupport {
                        class: i as u16 + 1,
                        available: pool.len(),
                        requested: per_class,
                    });
                }
                training.extend_from_slice(choose_prefix(pool, per_class, &mut rng));
            }
        }
        SamplingMode::Imbalanced { total } => {
            let mut pool = labels.labeled_pixels();
            if pool.len() < total {
                return Err(Error::invalid(format!(
                    "{total} training pixels requested but the scene has only {} labeled",
                    pool.len()
                )));
            }
            training.extend_from_slice(choose_prefix(&mut pool, total, &mut rng));
        }
    }
    SplitAssignment::from_training(run, training, labels)
}

/// `config.runs` independent runs.
pub fn monte_carlo_splits(labels: &LabelMap, config: &RandomSplitConfig) -> Result<Vec<SplitAssignment>> {
    config.validate()?;
    (0..config.runs)
        .map(|run| generate_random_split(labels, config, run))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationCarve {
    pub training: Vec<Coord>,
    pub validation: Vec<Coord>,
}

/// Splits a validation subset off the training pixels. The subset size is
/// `round(fraction * |T|)` clamped so both parts stay non-empty.
pub fn carve_validation(training: &[Coord], fraction: f64, seed: u64) -> Result<ValidationCarve> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = training.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 training pixels to carve a validation set, got {n}"
        )));
    }
    let size = ((fraction * n as f64 + 0.5).floor() as usize).clamp(1, n - 1);
    let mut pool = training.to_vec();
    pool.sort_unstable();
    let mut rng = seed::rng(seed, &[stream::VALIDATION]);
    choose_prefix(&mut pool, size, &mut rng);
    let mut validation = pool[..size].to_vec();
    let mut rest = pool[size..].to_vec();
    validation.sort_unstable();
    rest.sort_unstable();
    Ok(ValidationCarve {
        training: rest,
        validation,
    })
}
