//! Raster containers and binary PGM (P5) encoding.
//!
//! Only 8-bit P5 is supported. Binary images are written with foreground as
//! 255 and background as 0 so they can be opened with any image viewer.

use thiserror::Error;

/// Errors produced while decoding a PGM byte stream.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PgmError {
    #[error("bad magic number: expected \"P5\"")]
    BadMagic,
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("non-positive image dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("unsupported maxval {0}: only 1..=255 is supported")]
    BadMaxval(u32),
    #[error("truncated pixel payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Error for constructing an image from mismatched parts.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {len} values but {width}x{height} needs {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        len: usize,
        expected: usize,
    },
    #[error("binary image value {0} is not 0 or 1")]
    NotBinary(u8),
}

/// An 8-bit grayscale raster stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Creates an image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        check_len(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Reads with coordinates clamped into the image (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }
}

/// A two-level raster: 0 is background, 1 is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    /// An all-background image.
    pub fn empty(width: usize, height: usize) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![0; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        check_len(width, height, data.len())?;
        if let Some(&bad) = data.iter().find(|&&v| v > 1) {
            return Err(ImageError::NotBinary(bad));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = on as u8;
    }

    /// Foreground lookup where everything outside the raster is background.
    #[inline]
    pub fn get_or_background(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            false
        } else {
            self.data[y as usize * self.width + x as usize] != 0
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Iterates `(x, y)` of every foreground pixel in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Renders foreground as 255 and background as 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        Err(ImageError::EmptyDimensions { width, height })
    } else {
        Ok(())
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<(), ImageError> {
    let expected = width * height;
    if len != expected {
        Err(ImageError::LengthMismatch {
            width,
            height,
            len,
            expected,
        })
    } else {
        Ok(())
    }
}

/// Encodes an image as canonical P5: `P5\n<w> <h>\n255\n` then raw bytes.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

/// Decodes a binary PGM. Comments may appear between header tokens.
///
/// Files with a maxval below 255 are accepted and their samples are returned
/// unscaled.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };

    // the magic must be followed by whitespace
    if !cursor.peek().is_some_and(|b| b.is_ascii_whitespace() || b == b'#') {
        return Err(PgmError::BadMagic);
    }

    let width = cursor.next_number("width")?;
    let height = cursor.next_number("height")?;
    let maxval = cursor.next_number("maxval")?;

    if width == 0 || height == 0 {
        return Err(PgmError::BadDimensions {
            width: width as usize,
            height: height as usize,
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::BadMaxval(maxval.min(u32::MAX as u64) as u32));
    }

    // exactly one whitespace byte separates maxval from the raster
    match cursor.peek() {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        Some(_) => return Err(PgmError::MalformedHeader("missing separator after maxval")),
        None => {}
    }

    let width = width as usize;
    let height = height as usize;
    let expected = width
        .checked_mul(height)
        .ok_or(PgmError::MalformedHeader("dimensions overflow"))?;
    let payload = &bytes[cursor.pos.min(bytes.len())..];
    if payload.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: payload.len(),
        });
    }

    Ok(GrayImage {
        width,
        height,
        data: payload[..expected].to_vec(),
    })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(b) = self.peek() {
            if b == b'#' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self, what: &'static str) -> Result<u64, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(b) = self.peek().filter(u8::is_ascii_digit) {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or(PgmError::MalformedHeader("number overflow"))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(match self.peek() {
                None => PgmError::MalformedHeader(match what {
                    "width" => "missing width",
                    "height" => "missing height",
                    _ => "missing maxval",
                }),
                Some(b'-') if what != "maxval" => PgmError::BadDimensions { width: 0, height: 0 },
                Some(_) => PgmError::MalformedHeader("expected a decimal number"),
            });
        }
        Ok(value)
    }
}
