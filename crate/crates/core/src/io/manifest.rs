//! JSON split manifests.
//!
//! A manifest records everything needed to reproduce a set of splits: the
//! scene shape, the generating configuration, and either the patches of every
//! fold or the training pixels of every run, along with per-class counts.
//! Test sets are implicit (every other labeled pixel), so resolving a manifest
//! needs the label map, and the recorded counts are checked against it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::{Fold, FoldSet, PatchSplitConfig};
use crate::random::{RandomSplitConfig, SplitAssignment};
use crate::raster::{Coord, Dims, LabelMap, PatchRect};
use crate::split::{ClassHistogram, TrainTestSplit};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub height: usize,
    pub width: usize,
    pub class_count: u16,
    pub labeled_pixels: usize,
}

impl SceneInfo {
    pub fn of(labels: &LabelMap) -> Self {
        Self {
            height: labels.height(),
            width: labels.width(),
            class_count: labels.class_count(),
            labeled_pixels: labels.labeled_count(),
        }
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub index: usize,
    pub patches: Vec<PatchRect>,
    pub train_counts: ClassHistogram,
    pub test_counts: ClassHistogram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEntry {
    pub index: usize,
    /// Sorted row-major.
    pub training_pixels: Vec<Coord>,
    pub train_counts: ClassHistogram,
    pub test_counts: ClassHistogram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ManifestBody {
    Patch {
        config: PatchSplitConfig,
        folds: Vec<FoldEntry>,
    },
    Random {
        config: RandomSplitConfig,
        runs: Vec<RunEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub dataset: String,
    pub scene: SceneInfo,
    #[serde(flatten)]
    pub body: ManifestBody,
}

/// Splits rebuilt from a manifest against a label map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolvedSplits {
    Patch(FoldSet),
    Random {
        config: RandomSplitConfig,
        runs: Vec<SplitAssignment>,
    },
}

impl ResolvedSplits {
    pub fn is_patch(&self) -> bool {
        matches!(self, ResolvedSplits::Patch(_))
    }

    pub fn len(&self) -> usize {
        match self {
            ResolvedSplits::Patch(set) => set.folds.len(),
            ResolvedSplits::Random { runs, .. } => runs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn splits(&self) -> Vec<&(dyn TrainTestSplit + Sync)> {
        match self {
            ResolvedSplits::Patch(set) => set
                .folds
                .iter()
                .map(|f| f as &(dyn TrainTestSplit + Sync))
                .collect(),
            ResolvedSplits::Random { runs, .. } => runs
                .iter()
                .map(|r| r as &(dyn TrainTestSplit + Sync))
                .collect(),
        }
    }
}

impl Manifest {
    pub fn from_fold_set(dataset: impl Into<String>, set: &FoldSet, labels: &LabelMap) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.into(),
            scene: SceneInfo::of(labels),
            body: ManifestBody::Patch {
                config: set.config.clone(),
                folds: set
                    .folds
                    .iter()
                    .map(|f| FoldEntry {
                        index: f.index,
                        patches: f.patches.clone(),
                        train_counts: f.train_counts.clone(),
                        test_counts: f.test_counts.clone(),
                    })
                    .collect(),
            },
        }
    }

    pub fn from_random(
        dataset: impl Into<String>,
        config: &RandomSplitConfig,
        runs: &[SplitAssignment],
        labels: &LabelMap,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.into(),
            scene: SceneInfo::of(labels),
            body: ManifestBody::Random {
                config: config.clone(),
                runs: runs
                    .iter()
                    .map(|r| RunEntry {
                        index: r.run,
                        training_pixels: r.training_pixels.clone(),
                        train_counts: r.train_counts.clone(),
                        test_counts: r.test_counts.clone(),
                    })
                    .collect(),
            },
        }
    }

    /// Parses and structurally validates a manifest.
    pub fn from_json_str(text: &str) -> Result<Self> {
        // check the version before the typed parse so old or foreign files get
        // a clear message rather than a missing-field error
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("schema_version") {
            None => return Err(Error::Validation("manifest has no schema_version".into())),
            Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
                return Err(Error::Validation(format!(
                    "unsupported manifest schema_version {v}, expected {SCHEMA_VERSION}"
                )))
            }
            Some(_) => {}
        }
        let manifest: Manifest = serde_json::from_value(raw)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Checks that need no label map.
    pub fn validate(&self) -> Result<()> {
        let dims = self.scene.dims()?;
        let k = self.scene.class_count as usize;
        let check_counts = |what: &str, i: usize, train: &ClassHistogram, test: &ClassHistogram| {
            if train.counts().len() != k || test.counts().len() != k {
                return Err(Error::Validation(format!(
                    "{what} {i}: count arrays must have {k} entries"
                )));
            }
            if train.total() + test.total() != self.scene.labeled_pixels {
                return Err(Error::Validation(format!(
                    "{what} {i}: train + test counts ({} + {}) differ from the {} labeled pixels",
                    train.total(),
                    test.total(),
                    self.scene.labeled_pixels
                )));
            }
            Ok(())
        };
        match &self.body {
            ManifestBody::Patch { config, folds } => {
                if folds.len() != config.fold_count {
                    return Err(Error::Validation(format!(
                        "config asks for {} folds, manifest has {}",
                        config.fold_count,
                        folds.len()
                    )));
                }
                let mut all: Vec<(usize, PatchRect)> = Vec::new();
                for (i, f) in folds.iter().enumerate() {
                    if f.index != i {
                        return Err(Error::Validation(format!("fold {i} is recorded with index {}", f.index)));
                    }
                    check_counts("fold", i, &f.train_counts, &f.test_counts)?;
                    for p in &f.patches {
                        p.check_within(dims)
                            .map_err(|e| Error::Validation(format!("fold {i}: {e}")))?;
                        if (p.width, p.height) != (config.patch_width, config.patch_height) {
                            return Err(Error::Validation(format!(
                                "fold {i}: patch at ({}, {}) is {}x{}, config says {}x{} (width x height)",
                                p.row, p.col, p.width, p.height, config.patch_width, config.patch_height
                            )));
                        }
                        if let Some((j, q)) = all.iter().find(|(_, q)| q.intersects(p)) {
                            return Err(Error::Validation(format!(
                                "patch at ({}, {}) in fold {i} overlaps patch at ({}, {}) in fold {j}",
                                p.row, p.col, q.row, q.col
                            )));
                        }
                        all.push((i, *p));
                    }
                }
            }
            ManifestBody::Random { config, runs } => {
                if runs.len() != config.runs {
                    return Err(Error::Validation(format!(
                        "config asks for {} runs, manifest has {}",
                        config.runs,
                        runs.len()
                    )));
                }
                for (i, r) in runs.iter().enumerate() {
                    if r.index != i {
                        return Err(Error::Validation(format!("run {i} is recorded with index {}", r.index)));
                    }
                    check_counts("run", i, &r.train_counts, &r.test_counts)?;
                    if r.train_counts.total() != r.training_pixels.len() {
                        return Err(Error::Validation(format!(
                            "run {i}: {} training pixels listed, counts sum to {}",
                            r.training_pixels.len(),
                            r.train_counts.total()
                        )));
                    }
                    if r.training_pixels.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Validation(format!(
                            "run {i}: training pixels must be sorted row-major without duplicates"
                        )));
                    }
                    for &c in &r.training_pixels {
                        dims.check(c)
                            .map_err(|e| Error::Validation(format!("run {i}: {e}")))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Rebuilds the splits on `labels`, failing if the scene or any recorded
    /// count disagrees.
    pub fn resolve(&self, labels: &LabelMap) -> Result<ResolvedSplits> {
        self.validate()?;
        let scene = SceneInfo::of(labels);
        if scene != self.scene {
            return Err(Error::Validation(format!(
                "manifest scene {}x{} with {} classes and {} labeled pixels does not match the label map ({}x{}, {} classes, {} labeled)",
                self.scene.height,
                self.scene.width,
                self.scene.class_count,
                self.scene.labeled_pixels,
                scene.height,
                scene.width,
                scene.class_count,
                scene.labeled_pixels
            )));
        }
        let mismatch = |what: &str, i: usize| {
            Error::Validation(format!(
                "{what} {i}: recorded class counts do not match the label map"
            ))
        };
        match &self.body {
            ManifestBody::Patch { config, folds } => {
                let mut rebuilt = Vec::with_capacity(folds.len());
                for f in folds {
                    let fold = Fold::from_patches(f.index, f.patches.clone(), labels)?;
                    if fold.train_counts != f.train_counts || fold.test_counts != f.test_counts {
                        return Err(mismatch("fold", f.index));
                    }
                    rebuilt.push(fold);
                }
                Ok(ResolvedSplits::Patch(FoldSet {
                    dims: labels.dims(),
                    class_count: labels.class_count(),
                    config: config.clone(),
                    folds: rebuilt,
                }))
            }
            ManifestBody::Random { config, runs } => {
                let mut rebuilt = Vec::with_capacity(runs.len());
                for r in runs {
                    let run = SplitAssignment::from_training(r.index, r.training_pixels.clone(), labels)?;
                    if run.train_counts != r.train_counts || run.test_counts != r.test_counts {
                        return Err(mismatch("run", r.index));
                    }
                    rebuilt.push(run);
                }
                Ok(ResolvedSplits::Random {
                    config: config.clone(),
                    runs: rebuilt,
                })
            }
        }
    }
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(Error::invalid("empty output path"));
    }
    std::fs::write(path, manifest.to_json_string())?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    Manifest::from_json_str(&std::fs::read_to_string(path)?)
}

/// Loads a manifest and resolves it against `labels`.
pub fn read_manifest(path: impl AsRef<Path>, labels: &LabelMap) -> Result<(Manifest, ResolvedSplits)> {
    let manifest = load_manifest(path)?;
    let splits = manifest.resolve(labels)?;
    Ok((manifest, splits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::generate_patch_folds;
    use crate::random::monte_carlo_splits;

    fn labels() -> LabelMap {
        let v: Vec<u16> = (0..20 * 20).map(|i| ((i % 20) / 5 + 1) as u16).collect();
        LabelMap::new(20, 20, v).unwrap()
    }

    #[test]
    fn patch_round_trip() {
        let labels = labels();
        let set = generate_patch_folds(&labels, &PatchSplitConfig::new(3, 3, 20, 3, 9)).unwrap();
        let m = Manifest::from_fold_set("toy", &set, &labels);
        let text = m.to_json_string();
        let back = Manifest::from_json_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json_string(), text);
        assert_eq!(back.resolve(&labels).unwrap(), ResolvedSplits::Patch(set));
        assert!(text.contains("\"mode\": \"patch\""));
    }

    #[test]
    fn random_round_trip() {
        let labels = labels();
        let cfg = RandomSplitConfig::balanced(5, 3, 4);
        let runs = monte_carlo_splits(&labels, &cfg).unwrap();
        let m = Manifest::from_random("toy", &cfg, &runs, &labels);
        let text = m.to_json_string();
        let back = Manifest::from_json_str(&text).unwrap();
        assert_eq!(back.to_json_string(), text);
        match back.resolve(&labels).unwrap() {
            ResolvedSplits::Random { config, runs: r } => {
                assert_eq!(config, cfg);
                assert_eq!(r, runs);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_or_wrong_schema_version() {
        let labels = labels();
        let set = generate_patch_folds(&labels, &PatchSplitConfig::new(3, 3, 20, 2, 1)).unwrap();
        let mut value = serde_json::to_value(Manifest::from_fold_set("toy", &set, &labels)).unwrap();
        value["schema_version"] = serde_json::json!(2);
        assert!(Manifest::from_json_str(&value.to_string()).is_err());
        value.as_object_mut().unwrap().remove("schema_version");
        let err = Manifest::from_json_str(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn tampered_counts_rejected() {
        let labels = labels();
        let set = generate_patch_folds(&labels, &PatchSplitConfig::new(3, 3, 20, 2, 1)).unwrap();
        let mut m = Manifest::from_fold_set("toy", &set, &labels);
        if let ManifestBody::Patch { folds, .. } = &mut m.body {
            let mut train = folds[0].train_counts.counts().to_vec();
            let test = folds[0].test_counts.counts().to_vec();
            // move one training pixel to another class; totals stay consistent
            let from = train.iter().position(|&c| c > 0).unwrap();
            let to = (from + 1) % train.len();
            train[from] -= 1;
            train[to] += 1;
            folds[0].train_counts = ClassHistogram::from_counts(train);
            folds[0].test_counts = ClassHistogram::from_counts(test);
        }
        assert!(m.validate().is_ok());
        assert!(m.resolve(&labels).is_err());
    }

    #[test]
    fn overlapping_patches_across_folds_rejected() {
        let labels = labels();
        let set = generate_patch_folds(&labels, &PatchSplitConfig::new(3, 3, 20, 2, 1)).unwrap();
        let mut m = Manifest::from_fold_set("toy", &set, &labels);
        if let ManifestBody::Patch { folds, .. } = &mut m.body {
            let p = folds[0].patches[0];
            folds[1].patches.push(p);
        }
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("overlaps"));
    }

    #[test]
    fn wrong_scene_rejected() {
        let labels = labels();
        let cfg = RandomSplitConfig::imbalanced(10, 1, 0);
        let runs = monte_carlo_splits(&labels, &cfg).unwrap();
        let m = Manifest::from_random("toy", &cfg, &runs, &labels);
        let other = LabelMap::new(20, 20, vec![1; 400]).unwrap();
        assert!(m.resolve(&other).is_err());
    }

    #[test]
    fn unsorted_training_pixels_rejected() {
        let labels = labels();
        let cfg = RandomSplitConfig::imbalanced(10, 1, 0);
        let runs = monte_carlo_splits(&labels, &cfg).unwrap();
        let mut m = Manifest::from_random("toy", &cfg, &runs, &labels);
        if let ManifestBody::Random { runs, .. } = &mut m.body {
            runs[0].training_pixels.reverse();
        }
        assert!(m.validate().is_err());
    }
}
