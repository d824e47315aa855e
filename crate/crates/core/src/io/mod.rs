//! File formats: NPY arrays, JSON manifests and PPM images.

pub mod manifest;
pub mod npy;
pub mod ppm;

pub use manifest::{load_manifest, read_manifest, write_manifest, Manifest, ManifestBody, ResolvedSplits};
pub use npy::{read_cube, read_labels, read_npy, write_npy, NpyArray, NpyError};
pub use ppm::{render_fold_map, render_labels, render_leak_map, PpmImage, RenderStyle};
