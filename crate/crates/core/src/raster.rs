//! Raster data model: spectral cubes, label maps, coordinates, feature windows
//! and patch-size arithmetic.
//!
//! Axis convention: `width` is the column count, `height` the row count, rows
//! scan top to bottom. Label `0` is reserved for unlabeled pixels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raster extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "raster dimensions must be positive, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn check(&self, c: Coord) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                row: c.row,
                col: c.col,
                height: self.height,
                width: self.width,
            })
        }
    }

    /// Row-major linear index.
    pub fn index(&self, c: Coord) -> usize {
        c.row * self.width + c.col
    }

    pub fn coord(&self, index: usize) -> Coord {
        Coord::new(index / self.width, index % self.width)
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.pixel_count()).map(|i| self.coord(i))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Pixel position. Orders row-major, which is the canonical order for every
/// pixel list the crate produces. Serializes as `[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl From<(usize, usize)> for Coord {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

impl From<Coord> for (usize, usize) {
    fn from(c: Coord) -> Self {
        (c.row, c.col)
    }
}

/// H×W×B reflectance cube stored row-major with bands innermost, the same
/// layout as a C-order `(row, col, band)` array.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    dims: Dims,
    bands: usize,
    values: Vec<f64>,
}

impl SpectralCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(height, width)?;
        if bands == 0 {
            return Err(Error::invalid("a cube needs at least one band"));
        }
        let expected = dims.pixel_count() * bands;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x{bands} cube needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite reflectance at flat index {i}"
            )));
        }
        Ok(Self { dims, bands, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectrum(&self, c: Coord) -> &[f64] {
        let start = self.dims.index(c) * self.bands;
        &self.values[start..start + self.bands]
    }

    pub(crate) fn spectrum_mut(&mut self, c: Coord) -> &mut [f64] {
        let start = self.dims.index(c) * self.bands;
        &mut self.values[start..start + self.bands]
    }

    pub fn get(&self, c: Coord, band: usize) -> f64 {
        self.values[self.dims.index(c) * self.bands + band]
    }
}

/// Per-pixel class ids; `0` is unlabeled and `1..=class_count` are classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: Dims,
    labels: Vec<u16>,
    class_count: u16,
}

impl LabelMap {
    /// Builds a label map whose class count is the largest label present.
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        let class_count = labels.iter().copied().max().unwrap_or(0);
        Self::with_class_count(height, width, labels, class_count)
    }

    /// Builds a label map with an explicit class count, for scenes where the
    /// highest classes happen to be absent.
    pub fn with_class_count(
        height: usize,
        width: usize,
        labels: Vec<u16>,
        class_count: u16,
    ) -> Result<Self> {
        let dims = Dims::new(height, width)?;
        if labels.len() != dims.pixel_count() {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width} label map needs {} labels, got {}",
                dims.pixel_count(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > class_count) {
            return Err(Error::Validation(format!(
                "label {bad} exceeds class count {class_count}"
            )));
        }
        Ok(Self {
            dims,
            labels,
            class_count,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, c: Coord) -> u16 {
        self.labels[self.dims.index(c)]
    }

    pub fn is_labeled(&self, c: Coord) -> bool {
        self.get(c) != 0
    }

    /// All labeled pixels in row-major order.
    pub fn labeled_pixels(&self) -> Vec<Coord> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(i, _)| self.dims.coord(i))
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn check_matches(&self, cube: &SpectralCube) -> Result<()> {
        if self.dims != cube.dims() {
            return Err(Error::DimensionMismatch(format!(
                "labels are {}, cube is {}",
                self.dims,
                cube.dims()
            )));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle of pixels anchored at its top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchRect {
    pub row: usize,
    pub col: usize,
    pub width: usize,
    pub height: usize,
}

impl PatchRect {
    pub fn new(origin: Coord, width: usize, height: usize, dims: Dims) -> Result<Self> {
        let rect = Self {
            row: origin.row,
            col: origin.col,
            width,
            height,
        };
        rect.check_within(dims)?;
        Ok(rect)
    }

    pub fn origin(&self) -> Coord {
        Coord::new(self.row, self.col)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn check_within(&self, dims: Dims) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("patch dimensions must be positive"));
        }
        if self.col + self.width > dims.width || self.row + self.height > dims.height {
            return Err(Error::invalid(format!(
                "patch {}x{} at ({}, {}) exceeds the {dims} raster",
                self.height, self.width, self.row, self.col
            )));
        }
        Ok(())
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row >= self.row
            && c.row < self.row + self.height
            && c.col >= self.col
            && c.col < self.col + self.width
    }

    pub fn intersects(&self, other: &PatchRect) -> bool {
        self.row < other.row + other.height
            && other.row < self.row + self.height
            && self.col < other.col + other.width
            && other.col < self.col + self.width
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (self.row..self.row + self.height)
            .flat_map(move |r| (self.col..self.col + self.width).map(move |c| Coord::new(r, c)))
    }
}

/// Odd-sized rectangular feature window centered on a pixel. `1x1` means
/// spectral-only features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct NeighborhoodSpec {
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    width: usize,
    height: usize,
}

impl TryFrom<WindowRepr> for NeighborhoodSpec {
    type Error = Error;

    fn try_from(r: WindowRepr) -> Result<Self> {
        Self::new(r.width, r.height)
    }
}

impl From<NeighborhoodSpec> for WindowRepr {
    fn from(s: NeighborhoodSpec) -> Self {
        Self {
            width: s.width,
            height: s.height,
        }
    }
}

impl NeighborhoodSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "window dimensions must be odd and positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn square(size: usize) -> Result<Self> {
        Self::new(size, size)
    }

    pub const fn single_pixel() -> Self {
        Self {
            width: 1,
            height: 1,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn row_radius(&self) -> usize {
        (self.height - 1) / 2
    }

    pub fn col_radius(&self) -> usize {
        (self.width - 1) / 2
    }

    pub fn is_single_pixel(&self) -> bool {
        self.width == 1 && self.height == 1
    }

    /// Errors if the window exceeds the raster in either dimension.
    pub fn check_fits(&self, dims: Dims) -> Result<()> {
        if self.width > dims.width || self.height > dims.height {
            return Err(Error::invalid(format!(
                "{}x{} window is larger than the {dims} raster",
                self.height, self.width
            )));
        }
        Ok(())
    }

    /// Inclusive row and column ranges of the window around `center`, clipped
    /// to the raster.
    pub(crate) fn clipped_bounds(
        &self,
        center: Coord,
        dims: Dims,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (rr, cr) = (self.row_radius(), self.col_radius());
        let rows = center.row.saturating_sub(rr)..(center.row + rr + 1).min(dims.height);
        let cols = center.col.saturating_sub(cr)..(center.col + cr + 1).min(dims.width);
        (rows, cols)
    }
}

impl fmt::Display for NeighborhoodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// All in-bounds pixels within the window centered on `center`, row-major.
pub fn neighborhood(center: Coord, spec: NeighborhoodSpec, dims: Dims) -> Result<Vec<Coord>> {
    dims.check(center)?;
    let (rows, cols) = spec.clipped_bounds(center, dims);
    Ok(rows
        .flat_map(|r| cols.clone().map(move |c| Coord::new(r, c)))
        .collect())
}

/// Patch size in pixels from fractions of the image size, rounded half-up with
/// a floor of one pixel. Returns `(patch_width, patch_height)`.
pub fn patch_dims_from_fractions(
    width_fraction: f64,
    height_fraction: f64,
    image_width: usize,
    image_height: usize,
) -> Result<(usize, usize)> {
    for (name, t) in [("width", width_fraction), ("height", height_fraction)] {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(format!(
                "patch {name} fraction must lie in (0, 1], got {t}"
            )));
        }
    }
    if image_width == 0 || image_height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let round = |t: f64, n: usize| ((t * n as f64 + 0.5).floor() as usize).clamp(1, n);
    Ok((
        round(width_fraction, image_width),
        round(height_fraction, image_height),
    ))
}

/// Patch size relative to the image, as `(width_fraction, height_fraction)`.
pub fn fractions_from_dims(
    patch_width: usize,
    patch_height: usize,
    image_width: usize,
    image_height: usize,
) -> Result<(f64, f64)> {
    if patch_width == 0 || patch_height == 0 || image_width == 0 || image_height == 0 {
        return Err(Error::invalid("patch and image dimensions must be positive"));
    }
    if patch_width > image_width || patch_height > image_height {
        return Err(Error::invalid(format!(
            "{patch_width}x{patch_height} patch exceeds the {image_width}x{image_height} image"
        )));
    }
    Ok((
        patch_width as f64 / image_width as f64,
        patch_height as f64 / image_height as f64,
    ))
}
