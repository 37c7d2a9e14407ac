//! Column image preparation: binarization, removal of ink bleeding in from
//! neighbouring columns, rotation correction and splitting into halves.

use serde::{Deserialize, Serialize};

use crate::contour::connected_components;
use crate::error::{Error, Result};
use crate::image::{BinaryImage, GrayImage};

/// Dynamic range constant of the Sauvola rule for 8-bit images.
pub const SAUVOLA_R: f64 = 128.0;

/// Angular resolution of the rotation search, degrees.
pub const DESKEW_STEP_DEG: f64 = 0.1;

/// Binarization stage selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Binarizer {
    Otsu,
    Sauvola {
        window: usize,
        k: f64,
    },
    /// Masks produced elsewhere (for example by a neural binarizer), read
    /// from `<dir>/<scan_id>.mask.png`.
    External {
        dir: std::path::PathBuf,
    },
}

impl Default for Binarizer {
    fn default() -> Self {
        Binarizer::Otsu
    }
}

/// Otsu threshold: the `t` maximizing between-class variance when pixels
/// `< t` form the ink class. The lowest maximizing `t` wins.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    otsu_threshold_from_histogram(&hist)
}

pub fn otsu_threshold_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::NoContrast);
    }
    let total: u64 = hist.iter().sum();
    let sum: u64 = hist.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
    let (n, s) = (total as f64, sum as f64);
    let mut best = (0u8, f64::NEG_INFINITY);
    let (mut below, mut below_sum) = (0u64, 0u64);
    for t in 1..=255usize {
        below += hist[t - 1];
        below_sum += (t as u64 - 1) * hist[t - 1];
        let above = total - below;
        if below == 0 || above == 0 {
            continue;
        }
        // proportional to w0 * w1 * (mu0 - mu1)^2
        let d = n * below_sum as f64 - below as f64 * s;
        let var = d * d / (below as f64 * above as f64);
        if var > best.1 {
            best = (t as u8, var);
        }
    }
    Ok(best.0)
}

pub fn binarize_otsu(img: &GrayImage) -> Result<BinaryImage> {
    let t = otsu_threshold(img)?;
    BinaryImage::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| v < t).collect(),
    )
}

/// Sauvola local thresholding over a square window clipped at the borders.
pub fn binarize_sauvola(img: &GrayImage, window: usize, k: f64) -> Result<BinaryImage> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "sauvola window must be odd and >= 3, got {window}"
        )));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sauvola k must be in (0, 1), got {k}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    if window > w && window > h {
        return Err(Error::InvalidParameter(format!(
            "sauvola window {window} exceeds image {w}x{h}"
        )));
    }
    // integral images with a zero first row/column
    let iw = w + 1;
    let mut sum = vec![0u64; iw * (h + 1)];
    let mut sq = vec![0u64; iw * (h + 1)];
    for y in 0..h {
        let (mut rs, mut rq) = (0u64, 0u64);
        for x in 0..w {
            let v = img.get(x, y) as u64;
            rs += v;
            rq += v * v;
            sum[(y + 1) * iw + x + 1] = sum[y * iw + x + 1] + rs;
            sq[(y + 1) * iw + x + 1] = sq[y * iw + x + 1] + rq;
        }
    }
    let r = window / 2;
    let rect = |t: &[u64], x0: usize, y0: usize, x1: usize, y1: usize| {
        t[y1 * iw + x1] + t[y0 * iw + x0] - t[y0 * iw + x1] - t[y1 * iw + x0]
    };
    let mut ink = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let m = rect(&sum, x0, y0, x1, y1) as f64 / n;
            let var = (rect(&sq, x0, y0, x1, y1) as f64 / n - m * m).max(0.0);
            let t = m * (1.0 + k * (var.sqrt() / SAUVOLA_R - 1.0));
            ink.push((img.get(x, y) as f64) < t);
        }
    }
    BinaryImage::new(w, h, ink)
}

/// Erases connected components whose centroid falls in the left or right
/// margin band (fractions of the image width).
pub fn clean_margins(img: &BinaryImage, left_frac: f64, right_frac: f64) -> Result<BinaryImage> {
    if left_frac < 0.0 || right_frac < 0.0 || left_frac + right_frac >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "margins must be non-negative with sum < 1, got {left_frac} + {right_frac}"
        )));
    }
    let w = img.width() as f64;
    let (lo, hi) = (left_frac * w, w - right_frac * w);
    let mut out = img.clone();
    for comp in connected_components(img) {
        let cx = comp.centroid().0 + 0.5;
        if cx < lo || cx > hi {
            for &(x, y) in &comp.pixels {
                out.set(x, y, false);
            }
        }
    }
    Ok(out)
}

fn rotation_center(img: &BinaryImage) -> (f64, f64) {
    (
        (img.width() as f64 - 1.0) / 2.0,
        (img.height() as f64 - 1.0) / 2.0,
    )
}

/// Rotates counter-clockwise (as displayed) by `angle_deg` about the image
/// center with nearest-neighbour resampling. Dimensions are preserved; ink
/// rotated outside the frame is lost.
pub fn rotate(img: &BinaryImage, angle_deg: f64) -> BinaryImage {
    if angle_deg == 0.0 {
        return img.clone();
    }
    let (cx, cy) = rotation_center(img);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        // inverse mapping: rotate the destination point back by -angle
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = cx + cos * dx - sin * dy;
        let sy = cy + sin * dx + cos * dy;
        img.get_signed(sx.round() as i64, sy.round() as i64)
    })
    .expect("same dimensions as a valid image")
}

/// Sum of squared row counts of the ink projection after rotating by
/// `angle_deg`; with a fixed bin range this orders angles exactly like the
/// profile variance.
fn profile_energy(points: &[(f64, f64)], angle_deg: f64, offset: f64, bins: usize) -> f64 {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    // linear splatting between the two nearest rows keeps the energy smooth
    // in the angle
    let mut counts = vec![0f64; bins];
    for &(dx, dy) in points {
        let pos = (-sin * dx + cos * dy + offset).clamp(0.0, (bins - 2) as f64);
        let row = pos.floor();
        let frac = pos - row;
        counts[row as usize] += 1.0 - frac;
        counts[row as usize + 1] += frac;
    }
    counts.iter().map(|c| c * c).sum()
}

/// Finds the rotation in `[-max, +max]` (0.1 degree grid) that maximizes the
/// variance of the horizontal projection profile, and applies it. Returns the
/// corrected image and the applied angle. Ties prefer the smaller rotation.
pub fn deskew(img: &BinaryImage, max_angle_deg: f64) -> Result<(BinaryImage, f64)> {
    if !(max_angle_deg > 0.0 && max_angle_deg <= 15.0) {
        return Err(Error::InvalidParameter(format!(
            "max deskew angle must be in (0, 15], got {max_angle_deg}"
        )));
    }
    let (cx, cy) = rotation_center(img);
    let mut points = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) {
                points.push((x as f64 - cx, y as f64 - cy));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::BlankImage);
    }
    let diag = ((img.width().pow(2) + img.height().pow(2)) as f64).sqrt();
    // rows of the unrotated image land on integer bins
    let margin = (diag / 2.0).ceil() + 2.0;
    let offset = cy + margin;
    let bins = img.height() + 2 * margin as usize + 2;

    let steps = (max_angle_deg / DESKEW_STEP_DEG).round() as i64;
    let mut best = (0.0, profile_energy(&points, 0.0, offset, bins));
    for k in 1..=steps {
        for signed in [k, -k] {
            let angle = signed as f64 * DESKEW_STEP_DEG;
            let e = profile_energy(&points, angle, offset, bins);
            if e > best.1 {
                best = (angle, e);
            }
        }
    }
    Ok((rotate(img, best.0), best.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitAxis {
    /// Top rows become `a`, bottom rows `b`.
    #[default]
    HorizontalCut,
    /// Left columns become `a`, right columns `b`.
    VerticalCut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub half_a: BinaryImage,
    pub half_b: BinaryImage,
    pub axis: SplitAxis,
}

/// Cuts an image in two; with an odd extent `a` receives the smaller half.
pub fn split_column(img: &BinaryImage, axis: SplitAxis) -> Result<SplitPair> {
    let (w, h) = (img.width(), img.height());
    let (half_a, half_b) = match axis {
        SplitAxis::HorizontalCut => {
            if h < 2 {
                return Err(Error::InvalidParameter(format!("cannot split {h} rows")));
            }
            let cut = h / 2;
            (img.crop(0, 0, w, cut)?, img.crop(0, cut, w, h - cut)?)
        }
        SplitAxis::VerticalCut => {
            if w < 2 {
                return Err(Error::InvalidParameter(format!("cannot split {w} columns")));
            }
            let cut = w / 2;
            (img.crop(0, 0, cut, h)?, img.crop(cut, 0, w - cut, h)?)
        }
    };
    Ok(SplitPair {
        half_a,
        half_b,
        axis,
    })
}
