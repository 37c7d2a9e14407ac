//! Raster types shared by every stage: 8-bit grayscale scans and boolean
//! ink masks, plus their on-disk encodings.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Luminance weights applied to color rasters.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Converts one RGB pixel with the fixed luminance weights.
    pub fn luminance(rgb: [u8; 3]) -> u8 {
        let l = LUMA_WEIGHTS[0] * rgb[0] as f64
            + LUMA_WEIGHTS[1] * rgb[1] as f64
            + LUMA_WEIGHTS[2] * rgb[2] as f64;
        l.round().clamp(0.0, 255.0) as u8
    }

    /// Reads any raster the `image` crate understands; color input is reduced
    /// with [`GrayImage::luminance`], 8-bit gray passes through untouched.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = match img {
            image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
            image::DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
            other => other
                .to_rgb8()
                .pixels()
                .map(|p| Self::luminance(p.0))
                .collect(),
        };
        Self::new(w, h, data).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
        writer
            .write_image_data(&self.data)
            .map_err(|e| png_err(path, e))?;
        writer.finish().map_err(|e| png_err(path, e))
    }
}

/// Boolean ink mask; `true` marks foreground ink.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    ink: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, ink: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if ink.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: ink.len(),
            });
        }
        Ok(Self { width, height, ink })
    }

    pub fn blank(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut ink = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                ink.push(f(x, y));
            }
        }
        Self::new(width, height, ink)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ink(&self) -> &[bool] {
        &self.ink
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.ink[y * self.width + x]
    }

    /// Out-of-bounds reads are background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.ink[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.ink[y * self.width + x] = value;
    }

    pub fn ink_count(&self) -> usize {
        self.ink.iter().filter(|&&b| b).count()
    }

    /// Copies the rectangle `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidParameter(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Places this mask at an offset inside a larger background canvas.
    pub fn pad(&self, left: usize, top: usize, right: usize, bottom: usize) -> Self {
        let w = self.width + left + right;
        let h = self.height + top + bottom;
        let mut out = vec![false; w * h];
        for y in 0..self.height {
            let src = &self.ink[y * self.width..(y + 1) * self.width];
            let start = (y + top) * w + left;
            out[start..start + self.width].copy_from_slice(src);
        }
        Self {
            width: w,
            height: h,
            ink: out,
        }
    }

    /// Renders ink as black (0) on white (255).
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.ink.iter().map(|&b| if b { 0 } else { 255 }).collect(),
        }
    }

    /// Writes a 1-bit grayscale PNG, ink as 0 and background as 1.
    pub fn save_mask(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let stride = self.width.div_ceil(8);
        let mut packed = vec![0u8; stride * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    packed[y * stride + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
        writer
            .write_image_data(&packed)
            .map_err(|e| png_err(path, e))?;
        writer.finish().map_err(|e| png_err(path, e))
    }

    /// Reads a mask written by [`BinaryImage::save_mask`]. Any other raster
    /// is accepted too: pixels darker than mid-gray count as ink.
    pub fn load_mask(path: &Path) -> Result<Self> {
        if let Some(mask) = Self::load_one_bit(path)? {
            return Ok(mask);
        }
        let gray = GrayImage::load(path)?;
        Self::new(
            gray.width,
            gray.height,
            gray.data.iter().map(|&v| v < 128).collect(),
        )
    }

    fn load_one_bit(path: &Path) -> Result<Option<Self>> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let Ok(mut reader) = decoder.read_info() else {
            return Ok(None);
        };
        let info = reader.info();
        if info.bit_depth != png::BitDepth::One || info.color_type != png::ColorType::Grayscale {
            return Ok(None);
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
        let out = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
        let stride = out.line_size;
        let ink = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| buf[y * stride + x / 8] & (0x80 >> (x % 8)) == 0)
            .collect();
        Self::new(w, h, ink).map(Some)
    }
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// RGB raster used by the overlay renderer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![color; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.width && y < self.height {
            self.data[y * self.width + x] = c;
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let flat: Vec<u8> = self.data.iter().flatten().copied().collect();
        let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
        writer
            .write_image_data(&flat)
            .map_err(|e| png_err(path, e))?;
        writer.finish().map_err(|e| png_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn red_maps_through_luminance() {
        assert_eq!(GrayImage::luminance([255, 0, 0]), 76);
        assert_eq!(GrayImage::luminance([255, 255, 255]), 255);
        assert_eq!(GrayImage::luminance([0, 0, 0]), 0);
    }

    #[test]
    fn zero_sized_rejected() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(BinaryImage::new(3, 0, vec![]).is_err());
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mask.png");
        let img = BinaryImage::from_fn(13, 7, |x, y| (x * 3 + y) % 5 == 0).unwrap();
        img.save_mask(&path).unwrap();
        assert_eq!(BinaryImage::load_mask(&path).unwrap(), img);
    }

    #[test]
    fn pad_keeps_ink() {
        let img = BinaryImage::from_fn(4, 4, |x, y| x == y).unwrap();
        let padded = img.pad(2, 3, 1, 0);
        assert_eq!(padded.width(), 7);
        assert_eq!(padded.height(), 7);
        assert_eq!(padded.ink_count(), 4);
        assert!(padded.get(2, 3));
    }
}
