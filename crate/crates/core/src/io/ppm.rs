//! Binary PPM (P6) rendering of label maps, split layouts and leak maps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::{LeakageReport, Visibility, VisibilityMask};
use crate::raster::{Coord, LabelMap};
use crate::split::TrainTestSplit;

pub type Rgb = [u8; 3];

/// Class colors; class `k` uses entry `(k - 1) % 16`.
pub const PALETTE: [Rgb; 16] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [188, 189, 34],
    [23, 190, 207],
    [174, 199, 232],
    [255, 187, 120],
    [152, 223, 138],
    [255, 152, 150],
    [197, 176, 213],
    [219, 219, 141],
    [158, 218, 229],
];

pub const UNLABELED: Rgb = [128, 128, 128];
pub const LEAKED: Rgb = [255, 0, 0];

pub fn class_color(class: u16) -> Rgb {
    if class == 0 {
        UNLABELED
    } else {
        PALETTE[(class as usize - 1) % PALETTE.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderStyle {
    /// Fill for training-visible pixels.
    pub overlay: Rgb,
}

impl RenderStyle {
    pub const BLACK: Self = Self { overlay: [0, 0, 0] };
    pub const WHITE: Self = Self {
        overlay: [255, 255, 255],
    };
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self::BLACK
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpmImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl PpmImage {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, c: Coord) -> Rgb {
        self.pixels[c.row * self.width + c.col]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    /// Parses a P6 image with maxval 255. Comments in the header are skipped.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Validation(format!("ppm: {msg}"));
        if !bytes.starts_with(b"P6") {
            return Err(bad("missing P6 magic"));
        }
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in &mut fields {
            loop {
                match bytes.get(pos) {
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    _ => break,
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            *field = std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("malformed header"))?;
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(bad("malformed header"));
        }
        pos += 1;
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(bad("only maxval 255 is supported"));
        }
        let data = &bytes[pos..];
        if data.len() != width * height * 3 {
            return Err(bad("pixel data length does not match the header"));
        }
        let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, pixels)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.as_os_str().is_empty() {
            return Err(Error::invalid("empty output path"));
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

pub fn render_labels(labels: &LabelMap) -> PpmImage {
    let pixels = labels.labels().iter().map(|&l| class_color(l)).collect();
    PpmImage::new(labels.width(), labels.height(), pixels).expect("label map is non-empty")
}

/// Class colors with training-visible pixels painted in the overlay color.
pub fn render_visibility(labels: &LabelMap, mask: &VisibilityMask, style: RenderStyle) -> Result<PpmImage> {
    mask.check_dims(labels.dims())?;
    let mut image = render_labels(labels);
    for c in mask.coords_with(Visibility::TrainVisible) {
        image.pixels[c.row * image.width + c.col] = style.overlay;
    }
    Ok(image)
}

/// Class map with the split's training region (whole patches for patch folds)
/// overlaid.
pub fn render_fold_map<S: TrainTestSplit + ?Sized>(
    labels: &LabelMap,
    split: &S,
    style: RenderStyle,
) -> Result<PpmImage> {
    render_visibility(labels, &split.visibility(labels.dims()), style)
}

/// Fold map with leaked test pixels in red.
pub fn render_leak_map<S: TrainTestSplit + ?Sized>(
    labels: &LabelMap,
    split: &S,
    report: &LeakageReport,
    style: RenderStyle,
) -> Result<PpmImage> {
    let mut image = render_fold_map(labels, split, style)?;
    for &c in &report.leaked_test_pixels {
        labels.dims().check(c)?;
        image.pixels[c.row * image.width + c.col] = LEAKED;
    }
    Ok(image)
}
