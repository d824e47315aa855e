//! Patch-based fold generation.
//!
//! Random rectangles are drawn from the scene until the labeled pixels they
//! cover reach the training budget. Those pixels are the fold's training set;
//! every other labeled pixel is tested. Patches never overlap, neither within a
//! fold nor across folds, so folds are generated in order against one shared
//! occupancy grid.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{fractions_from_dims, patch_dims_from_fractions, Coord, Dims, LabelMap, PatchRect};
use crate::seed::{self, stream};
use crate::split::{class_histogram, ClassHistogram, TrainTestSplit};
use crate::leakage::{Visibility, VisibilityMask};

pub const DEFAULT_MAX_DRAW_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSplitConfig {
    pub patch_width: usize,
    pub patch_height: usize,
    /// Minimum number of labeled training pixels per fold.
    pub target_training_pixels: usize,
    pub fold_count: usize,
    /// When false, a fold is redrawn until every class present in the scene has
    /// at least one training pixel.
    pub allow_class_absence: bool,
    /// Consecutive rejected draws (or whole-fold redraws) tolerated before
    /// giving up.
    pub max_draw_attempts: usize,
    pub seed: u64,
}

impl PatchSplitConfig {
    pub fn new(
        patch_width: usize,
        patch_height: usize,
        target_training_pixels: usize,
        fold_count: usize,
        seed: u64,
    ) -> Self {
        Self {
            patch_width,
            patch_height,
            target_training_pixels,
            fold_count,
            allow_class_absence: true,
            max_draw_attempts: DEFAULT_MAX_DRAW_ATTEMPTS,
            seed,
        }
    }

    /// Resolves patch dims from fractions of the scene size.
    pub fn from_fractions(
        width_fraction: f64,
        height_fraction: f64,
        dims: Dims,
        target_training_pixels: usize,
        fold_count: usize,
        seed: u64,
    ) -> Result<Self> {
        let (w, h) = patch_dims_from_fractions(width_fraction, height_fraction, dims.width, dims.height)?;
        Ok(Self::new(w, h, target_training_pixels, fold_count, seed))
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        if self.patch_width == 0 || self.patch_height == 0 {
            return Err(Error::invalid("patch dimensions must be positive"));
        }
        if self.patch_width > dims.width || self.patch_height > dims.height {
            return Err(Error::invalid(format!(
                "{}x{} patch (width x height) does not fit the {dims} scene",
                self.patch_width, self.patch_height
            )));
        }
        if self.target_training_pixels == 0 {
            return Err(Error::invalid("training budget must be at least one pixel"));
        }
        if self.fold_count == 0 {
            return Err(Error::invalid("fold count must be at least one"));
        }
        if self.max_draw_attempts == 0 {
            return Err(Error::invalid("max_draw_attempts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub patches: Vec<PatchRect>,
    pub training_pixels: Vec<Coord>,
    pub test_pixels: Vec<Coord>,
    pub train_counts: ClassHistogram,
    pub test_counts: ClassHistogram,
}

impl Fold {
    /// Rebuilds a fold from its patches: training pixels are the labeled pixels
    /// inside the patches, test pixels every other labeled pixel.
    pub fn from_patches(index: usize, patches: Vec<PatchRect>, labels: &LabelMap) -> Result<Self> {
        let dims = labels.dims();
        let mut inside = vec![false; dims.pixel_count()];
        for p in &patches {
            p.check_within(dims)?;
            for c in p.coords() {
                let i = dims.index(c);
                if inside[i] {
                    return Err(Error::Validation(format!(
                        "fold {index}: patches overlap at ({}, {})",
                        c.row, c.col
                    )));
                }
                inside[i] = true;
            }
        }
        let (training_pixels, test_pixels): (Vec<_>, Vec<_>) = labels
            .labeled_pixels()
            .into_iter()
            .partition(|&c| inside[dims.index(c)]);
        Ok(Self {
            index,
            train_counts: class_histogram(labels, &training_pixels),
            test_counts: class_histogram(labels, &test_pixels),
            patches,
            training_pixels,
            test_pixels,
        })
    }

    pub fn patch_area(&self) -> usize {
        self.patches.iter().map(PatchRect::area).sum()
    }
}

impl TrainTestSplit for Fold {
    fn training_pixels(&self) -> &[Coord] {
        &self.training_pixels
    }

    fn test_pixels(&self) -> &[Coord] {
        &self.test_pixels
    }

    /// Everything inside a patch is removed from the test image, labeled or not.
    fn visibility(&self, dims: Dims) -> VisibilityMask {
        let mut mask = VisibilityMask::filled(dims, Visibility::TestVisible);
        for p in &self.patches {
            for c in p.coords() {
                mask.set(c, Visibility::TrainVisible);
            }
        }
        mask
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSet {
    pub dims: Dims,
    pub class_count: u16,
    pub config: PatchSplitConfig,
    pub folds: Vec<Fold>,
}

impl FoldSet {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn all_patches(&self) -> impl Iterator<Item = (usize, &PatchRect)> {
        self.folds
            .iter()
            .flat_map(|f| f.patches.iter().map(move |p| (f.index, p)))
    }
}

/// Draws `config.fold_count` folds of non-overlapping patches.
pub fn generate_patch_folds(labels: &LabelMap, config: &PatchSplitConfig) -> Result<FoldSet> {
    let dims = labels.dims();
    config.validate(dims)?;
    let labeled = labels.labeled_count();
    let needed = config.fold_count * config.target_training_pixels;
    if labeled < needed {
        return Err(Error::invalid(format!(
            "scene has {labeled} labeled pixels, {} folds of {} need {needed}",
            config.fold_count, config.target_training_pixels
        )));
    }

    let scene_classes: BTreeSet<u16> = labels.labels().iter().copied().filter(|&l| l != 0).collect();
    let mut occupied = vec![false; dims.pixel_count()];
    let mut folds = Vec::with_capacity(config.fold_count);

    for fold_index in 0..config.fold_count {
        let attempts = if config.allow_class_absence {
            1
        } else {
            config.max_draw_attempts
        };
        let mut accepted = None;
        for attempt in 0..attempts {
            let patches = draw_fold(labels, config, fold_index, attempt, &occupied)?;
            let fold = Fold::from_patches(fold_index, patches, labels)?;
            let covers_all = scene_classes.iter().all(|&k| fold.train_counts.get(k) > 0);
            if config.allow_class_absence || covers_all {
                accepted = Some(fold);
                break;
            }
        }
        let fold = accepted.ok_or(Error::ClassCoverageUnreachable {
            fold: fold_index,
            attempts,
        })?;
        for p in &fold.patches {
            for c in p.coords() {
                occupied[dims.index(c)] = true;
            }
        }
        folds.push(fold);
    }

    Ok(FoldSet {
        dims,
        class_count: labels.class_count(),
        config: config.clone(),
        folds,
    })
}

fn draw_fold(
    labels: &LabelMap,
    config: &PatchSplitConfig,
    fold_index: usize,
    attempt: usize,
    occupied: &[bool],
) -> Result<Vec<PatchRect>> {
    let dims = labels.dims();
    let (pw, ph) = (config.patch_width, config.patch_height);
    let mut rng = seed::rng(
        config.seed,
        &[stream::PATCH, fold_index as u64, attempt as u64],
    );
    let mut local = occupied.to_vec();
    let mut patches = Vec::new();
    let mut covered = 0usize;
    let mut rejections = 0usize;

    while covered < config.target_training_pixels {
        let rect = PatchRect {
            row: rng.random_range(0..=dims.height - ph),
            col: rng.random_range(0..=dims.width - pw),
            width: pw,
            height: ph,
        };
        if rect.coords().any(|c| local[dims.index(c)]) {
            rejections += 1;
            if rejections >= config.max_draw_attempts {
                return Err(Error::BudgetUnreachable {
                    fold: fold_index,
                    still_needed: config.target_training_pixels - covered,
                    attempts: rejections,
                });
            }
            continue;
        }
        rejections = 0;
        for c in rect.coords() {
            local[dims.index(c)] = true;
            if labels.is_labeled(c) {
                covered += 1;
            }
        }
        patches.push(rect);
    }
    Ok(patches)
}

/// Classes with test support but no training pixels in `fold`.
pub fn missing_classes(fold: &Fold, class_count: u16) -> BTreeSet<u16> {
    (1..=class_count)
        .filter(|&k| fold.train_counts.get(k) == 0 && fold.test_counts.get(k) > 0)
        .collect()
}

/// Fold layouts of the three public benchmark scenes. Scene sizes are given as
/// `width x height` in the order they are usually quoted; patch sizes in
/// pixels are authoritative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetPreset {
    IndianPines,
    SalinasValley,
    PaviaUniversity,
}

impl DatasetPreset {
    pub const ALL: [DatasetPreset; 3] = [
        DatasetPreset::IndianPines,
        DatasetPreset::SalinasValley,
        DatasetPreset::PaviaUniversity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetPreset::IndianPines => "indian-pines",
            DatasetPreset::SalinasValley => "salinas-valley",
            DatasetPreset::PaviaUniversity => "pavia-university",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name || (name == "salinas" && *p == DatasetPreset::SalinasValley)
                || (name == "pavia" && *p == DatasetPreset::PaviaUniversity))
    }

    /// Nominal scene size as `(width, height)`.
    pub fn scene_size(&self) -> (usize, usize) {
        match self {
            DatasetPreset::IndianPines => (145, 145),
            DatasetPreset::SalinasValley => (512, 217),
            DatasetPreset::PaviaUniversity => (610, 340),
        }
    }

    /// Patch size as `(width, height)` in pixels.
    pub fn patch_size(&self) -> (usize, usize) {
        match self {
            DatasetPreset::IndianPines => (7, 7),
            DatasetPreset::SalinasValley => (22, 10),
            DatasetPreset::PaviaUniversity => (30, 17),
        }
    }

    pub fn fold_count(&self) -> usize {
        match self {
            DatasetPreset::IndianPines => 4,
            DatasetPreset::SalinasValley | DatasetPreset::PaviaUniversity => 5,
        }
    }

    pub fn class_count(&self) -> u16 {
        match self {
            DatasetPreset::IndianPines | DatasetPreset::SalinasValley => 16,
            DatasetPreset::PaviaUniversity => 9,
        }
    }

    /// Patch size relative to the nominal scene, `(width_fraction, height_fraction)`.
    pub fn fractions(&self) -> (f64, f64) {
        let (pw, ph) = self.patch_size();
        let (w, h) = self.scene_size();
        fractions_from_dims(pw, ph, w, h).expect("preset patch fits its scene")
    }

    pub fn config(&self, target_training_pixels: usize, seed: u64) -> PatchSplitConfig {
        let (pw, ph) = self.patch_size();
        PatchSplitConfig::new(pw, ph, target_training_pixels, self.fold_count(), seed)
    }
}
