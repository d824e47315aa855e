//! Reading and writing the NumPy `.npy` format (versions 1.0 and 2.0).
//!
//! Only what scene interchange needs is supported: little-endian `f4`/`f8`
//! cubes of shape `(rows, cols, bands)` and `u1`/`u2`/`i4` label maps of
//! shape `(rows, cols)`, all in C order. Files are written as version 1.0 with
//! the header padded to a multiple of 64 bytes, as NumPy does.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::raster::{LabelMap, SpectralCube};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NpyErrorKind {
    NotNpy,
    UnsupportedVersion(u8, u8),
    Truncated,
    BadHeader(String),
    UnsupportedDtype(String),
    FortranOrder,
    UnsupportedRank { descr: String, rank: usize },
    DataLength { expected: usize, got: usize },
    NonFinite,
    LabelOutOfRange(i64),
}

impl fmt::Display for NpyErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NpyErrorKind::NotNpy => write!(f, "not an NPY file"),
            NpyErrorKind::UnsupportedVersion(major, minor) => {
                write!(f, "unsupported NPY version {major}.{minor}")
            }
            NpyErrorKind::Truncated => write!(f, "unexpected end of file"),
            NpyErrorKind::BadHeader(msg) => write!(f, "malformed header: {msg}"),
            NpyErrorKind::UnsupportedDtype(d) => write!(f, "unsupported dtype '{d}'"),
            NpyErrorKind::FortranOrder => write!(f, "fortran_order arrays are not supported"),
            NpyErrorKind::UnsupportedRank { descr, rank } => write!(
                f,
                "unsupported rank {rank} for dtype '{descr}' (cubes are 3-D floats, labels 2-D integers)"
            ),
            NpyErrorKind::DataLength { expected, got } => {
                write!(f, "data section holds {got} bytes, shape needs {expected}")
            }
            NpyErrorKind::NonFinite => write!(f, "non-finite value in cube"),
            NpyErrorKind::LabelOutOfRange(v) => write!(f, "label {v} outside 0..=65535"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("npy: {kind} (byte {offset})")]
pub struct NpyError {
    pub offset: usize,
    pub kind: NpyErrorKind,
}

impl NpyError {
    fn at(offset: usize, kind: NpyErrorKind) -> Self {
        Self { offset, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NpyArray {
    Cube(SpectralCube),
    Labels(LabelMap),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
    U1,
    U2,
    I4,
}

impl Dtype {
    fn parse(descr: &str) -> Option<Self> {
        match descr {
            "<f4" => Some(Dtype::F4),
            "<f8" => Some(Dtype::F8),
            "|u1" | "<u1" | "u1" => Some(Dtype::U1),
            "<u2" => Some(Dtype::U2),
            "<i4" => Some(Dtype::I4),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::U1 => 1,
            Dtype::U2 => 2,
            Dtype::F4 | Dtype::I4 => 4,
            Dtype::F8 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Dtype::F4 | Dtype::F8)
    }
}

#[derive(Debug)]
struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Python-literal subset used by NPY headers: a dict with string keys whose
/// values are strings, booleans or tuples of integers.
struct HeaderParser<'a> {
    text: &'a [u8],
    pos: usize,
    base: usize,
}

enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

impl<'a> HeaderParser<'a> {
    fn err(&self, msg: impl Into<String>) -> NpyError {
        NpyError::at(self.base + self.pos, NpyErrorKind::BadHeader(msg.into()))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), NpyError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", b as char)))
        }
    }

    fn string(&mut self) -> Result<String, NpyError> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(self.err("expected a quoted string")),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.text.len() {
            return Err(self.err("unterminated string"));
        }
        let s = std::str::from_utf8(&self.text[start..self.pos])
            .map_err(|_| self.err("non-UTF-8 string"))?
            .to_string();
        self.pos += 1;
        Ok(s)
    }

    fn integer(&mut self) -> Result<usize, NpyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        // trailing L from Python 2 writers
        let digits = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        if self.text.get(self.pos) == Some(&b'L') {
            self.pos += 1;
        }
        digits.parse().map_err(|_| self.err("integer overflow"))
    }

    fn value(&mut self) -> Result<Value, NpyError> {
        match self.peek() {
            Some(b'\'' | b'"') => Ok(Value::Str(self.string()?)),
            Some(b'(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => {
                            items.push(self.integer()?);
                            match self.peek() {
                                Some(b',') => self.pos += 1,
                                Some(b')') => {}
                                _ => return Err(self.err("expected ',' or ')' in shape")),
                            }
                        }
                        None => return Err(self.err("unterminated tuple")),
                    }
                }
                Ok(Value::Tuple(items))
            }
            _ => {
                let rest = &self.text[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Value::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Value::Bool(false))
                } else {
                    Err(self.err("unsupported header value"))
                }
            }
        }
    }

    fn parse(mut self) -> Result<Header, NpyError> {
        self.expect(b'{')?;
        let (mut descr, mut fortran, mut shape) = (None, None, None);
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key_pos = self.base + self.pos;
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.value()?;
            match (key.as_str(), value) {
                ("descr", Value::Str(s)) => descr = Some(s),
                ("fortran_order", Value::Bool(b)) => fortran = Some(b),
                ("shape", Value::Tuple(t)) => shape = Some(t),
                (k, _) => {
                    return Err(NpyError::at(
                        key_pos,
                        NpyErrorKind::BadHeader(format!("unexpected key or value type for '{k}'")),
                    ))
                }
            }
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        let missing = |k: &str| NpyError::at(self.base, NpyErrorKind::BadHeader(format!("missing '{k}'")));
        Ok(Header {
            descr: descr.ok_or_else(|| missing("descr"))?,
            fortran_order: fortran.ok_or_else(|| missing("fortran_order"))?,
            shape: shape.ok_or_else(|| missing("shape"))?,
        })
    }
}

/// Parses an in-memory NPY file into a cube (3-D float) or label map (2-D
/// integer).
pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray, NpyError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(NpyError::at(0, NpyErrorKind::NotNpy));
    }
    let version = bytes.get(6..8).ok_or(NpyError::at(6, NpyErrorKind::Truncated))?;
    let (len_bytes, header_start) = match (version[0], version[1]) {
        (1, 0) => (2, 10),
        (2, 0) => (4, 12),
        (major, minor) => return Err(NpyError::at(6, NpyErrorKind::UnsupportedVersion(major, minor))),
    };
    let raw_len = bytes
        .get(8..8 + len_bytes)
        .ok_or(NpyError::at(8, NpyErrorKind::Truncated))?;
    let header_len = raw_len
        .iter()
        .rev()
        .fold(0usize, |acc, &b| (acc << 8) | b as usize);
    let data_start = header_start + header_len;
    let text = bytes
        .get(header_start..data_start)
        .ok_or(NpyError::at(bytes.len(), NpyErrorKind::Truncated))?;

    let header = HeaderParser {
        text,
        pos: 0,
        base: header_start,
    }
    .parse()?;

    let dtype = Dtype::parse(&header.descr)
        .ok_or_else(|| NpyError::at(header_start, NpyErrorKind::UnsupportedDtype(header.descr.clone())))?;
    if header.fortran_order {
        return Err(NpyError::at(header_start, NpyErrorKind::FortranOrder));
    }
    let rank_ok = match header.shape.len() {
        3 => dtype.is_float(),
        2 => !dtype.is_float(),
        _ => false,
    };
    if !rank_ok {
        return Err(NpyError::at(
            header_start,
            NpyErrorKind::UnsupportedRank {
                descr: header.descr.clone(),
                rank: header.shape.len(),
            },
        ));
    }

    let count: usize = header.shape.iter().product();
    let data = &bytes[data_start..];
    let expected = count * dtype.size();
    if data.len() != expected {
        return Err(NpyError::at(
            data_start,
            NpyErrorKind::DataLength {
                expected,
                got: data.len(),
            },
        ));
    }
    let shape_err = |e: crate::Error| NpyError::at(header_start, NpyErrorKind::BadHeader(e.to_string()));

    match dtype {
        Dtype::F4 | Dtype::F8 => {
            let values: Vec<f64> = match dtype {
                Dtype::F4 => data
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
                _ => data
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            };
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(NpyError::at(data_start + i * dtype.size(), NpyErrorKind::NonFinite));
            }
            let (h, w, b) = (header.shape[0], header.shape[1], header.shape[2]);
            SpectralCube::new(h, w, b, values)
                .map(NpyArray::Cube)
                .map_err(shape_err)
        }
        _ => {
            let raw: Vec<i64> = match dtype {
                Dtype::U1 => data.iter().map(|&b| b as i64).collect(),
                Dtype::U2 => data
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes(c.try_into().unwrap()) as i64)
                    .collect(),
                _ => data
                    .chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as i64)
                    .collect(),
            };
            let mut labels = Vec::with_capacity(raw.len());
            for (i, v) in raw.into_iter().enumerate() {
                let l = u16::try_from(v).map_err(|_| {
                    NpyError::at(data_start + i * dtype.size(), NpyErrorKind::LabelOutOfRange(v))
                })?;
                labels.push(l);
            }
            LabelMap::new(header.shape[0], header.shape[1], labels)
                .map(NpyArray::Labels)
                .map_err(shape_err)
        }
    }
}

fn encode(descr: &str, shape: &[usize], data: Vec<u8>) -> Vec<u8> {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    let mut dict = format!(
        "{{'descr': '{descr}', 'fortran_order': False, 'shape': ({}), }}",
        dims.join(", ")
    );
    // magic + version + u16 length + dict + '\n' must be a multiple of 64
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    dict.extend(std::iter::repeat_n(' ', (64 - unpadded % 64) % 64));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(data);
    out
}

/// Encodes a cube as little-endian `f8`, shape `(rows, cols, bands)`.
pub fn encode_cube(cube: &SpectralCube) -> Vec<u8> {
    let data = cube.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    encode("<f8", &[cube.height(), cube.width(), cube.bands()], data)
}

/// Encodes labels as little-endian `u2`, shape `(rows, cols)`.
pub fn encode_labels(labels: &LabelMap) -> Vec<u8> {
    let data = labels.labels().iter().flat_map(|v| v.to_le_bytes()).collect();
    encode("<u2", &[labels.height(), labels.width()], data)
}

pub fn encode_npy(array: &NpyArray) -> Vec<u8> {
    match array {
        NpyArray::Cube(c) => encode_cube(c),
        NpyArray::Labels(l) => encode_labels(l),
    }
}

fn check_path(path: &Path) -> crate::Result<()> {
    if path.as_os_str().is_empty() {
        return Err(crate::Error::invalid("empty output path"));
    }
    Ok(())
}

pub fn read_npy(path: impl AsRef<Path>) -> crate::Result<NpyArray> {
    let path = path.as_ref();
    check_path(path)?;
    Ok(parse_npy(&std::fs::read(path)?)?)
}

pub fn write_npy(array: &NpyArray, path: impl AsRef<Path>) -> crate::Result<()> {
    let path = path.as_ref();
    check_path(path)?;
    std::fs::write(path, encode_npy(array))?;
    Ok(())
}

pub fn read_cube(path: impl AsRef<Path>) -> crate::Result<SpectralCube> {
    match read_npy(path)? {
        NpyArray::Cube(c) => Ok(c),
        NpyArray::Labels(_) => Err(crate::Error::Validation(
            "expected a 3-D float cube, found a 2-D label map".into(),
        )),
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> crate::Result<LabelMap> {
    match read_npy(path)? {
        NpyArray::Labels(l) => Ok(l),
        NpyArray::Cube(_) => Err(crate::Error::Validation(
            "expected a 2-D integer label map, found a 3-D cube".into(),
        )),
    }
}
