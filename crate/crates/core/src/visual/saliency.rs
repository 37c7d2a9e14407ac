//! Discriminative fraglet cells, group prediction and colored overlays.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::feature::{FeatureKind, FeatureVector};
use crate::fraglet::{extract_fraglets_detailed, FragmentParams};
use crate::image::{BinaryImage, RgbImage};

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_TOPK: usize = 50;

pub const GREEN: [u8; 3] = [0, 160, 0];
pub const RED: [u8; 3] = [210, 0, 0];
pub const GRAY: [u8; 3] = [150, 150, 150];
const INK_SHADE: [u8; 3] = [215, 215, 215];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
    Neutral,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Neutral => "neutral",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragletSaliency {
    pub rows: usize,
    pub cols: usize,
    pub tau: f64,
    pub scores: Vec<f64>,
    pub sides: Vec<Side>,
}

fn side_of(score: f64, tau: f64) -> Side {
    if score > tau {
        Side::Left
    } else if score < -tau {
        Side::Right
    } else {
        Side::Neutral
    }
}

/// Standardized mean difference per cell, left minus right over the pooled
/// standard deviation. Cells with zero pooled spread score 0.
pub fn rank_discriminative_fraglets(
    hists: &[FeatureVector],
    left: &[bool],
    rows: usize,
    cols: usize,
    tau: f64,
) -> Result<FragletSaliency> {
    if hists.len() != left.len() {
        return Err(Error::DimensionMismatch {
            expected: hists.len(),
            actual: left.len(),
        });
    }
    let n_left = left.iter().filter(|&&l| l).count();
    let n_right = left.len() - n_left;
    if n_left < 2 || n_right < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n_left.min(n_right),
        });
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be >= 0, got {tau}"
        )));
    }
    let dim = rows * cols;
    for h in hists {
        if !matches!(h.kind(), FeatureKind::Fraglet | FeatureKind::FragletCos) {
            return Err(Error::KindMismatch {
                expected: "fraglet".into(),
                actual: h.kind().as_str().into(),
            });
        }
        if h.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: h.dim(),
            });
        }
    }
    let mut scores = Vec::with_capacity(dim);
    for c in 0..dim {
        let pick = |side: bool| {
            hists
                .iter()
                .zip(left)
                .filter(move |(_, &l)| l == side)
                .map(move |(h, _)| h.values()[c])
        };
        let ml = pick(true).sum::<f64>() / n_left as f64;
        let mr = pick(false).sum::<f64>() / n_right as f64;
        let ssl: f64 = pick(true).map(|v| (v - ml).powi(2)).sum();
        let ssr: f64 = pick(false).map(|v| (v - mr).powi(2)).sum();
        let sd = ((ssl + ssr) / (n_left + n_right - 2) as f64).sqrt();
        scores.push(if sd > 0.0 { (ml - mr) / sd } else { 0.0 });
    }
    let sides = scores.iter().map(|&s| side_of(s, tau)).collect();
    Ok(FragletSaliency {
        rows,
        cols,
        tau,
        scores,
        sides,
    })
}

impl FragletSaliency {
    /// Cell indices ordered by |score|, largest first; ties go to the lower
    /// index.
    pub fn top_cells(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .abs()
                .total_cmp(&self.scores[a].abs())
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }

    /// Same cells with every score negated, as if the labels were swapped.
    pub fn mirrored(&self) -> Self {
        let scores: Vec<f64> = self.scores.iter().map(|s| -s).collect();
        let sides = scores.iter().map(|&s| side_of(s, self.tau)).collect();
        Self {
            scores,
            sides,
            ..self.clone()
        }
    }

    /// `cell_row,cell_col,score,side` rows for every cell.
    pub fn to_table(&self) -> String {
        let mut out = String::from("cell_row,cell_col,score,side\n");
        for (i, (s, side)) in self.scores.iter().zip(&self.sides).enumerate() {
            out.push_str(&format!(
                "{},{},{s:e},{}\n",
                i / self.cols,
                i % self.cols,
                side.as_str()
            ));
        }
        out
    }

    pub fn save_table(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupLabel {
    Left,
    Right,
    Undecided,
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: GroupLabel,
    pub margin: f64,
}

/// Sign of the score-weighted usage of the `k` most discriminative cells.
pub fn predict_group(h: &FeatureVector, s: &FragletSaliency, k: usize) -> Result<Prediction> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if h.dim() != s.scores.len() {
        return Err(Error::DimensionMismatch {
            expected: s.scores.len(),
            actual: h.dim(),
        });
    }
    let sum: f64 = s
        .top_cells(k)
        .iter()
        .map(|&c| s.scores[c] * h.values()[c])
        .sum();
    let label = if sum > 0.0 {
        GroupLabel::Left
    } else if sum < 0.0 {
        GroupLabel::Right
    } else {
        GroupLabel::Undecided
    };
    Ok(Prediction {
        label,
        margin: sum.abs(),
    })
}

#[derive(Clone, Debug)]
pub struct Overlay {
    pub image: RgbImage,
    pub green: usize,
    pub red: usize,
    pub gray: usize,
}

impl Overlay {
    /// Share of colored (non-gray) fragments that are green.
    pub fn green_share(&self) -> Option<f64> {
        let colored = self.green + self.red;
        (colored > 0).then(|| self.green as f64 / colored as f64)
    }
}

/// Paints every fragment by its best-matching cell: green for a top-`k` left
/// cell, red for a top-`k` right cell, gray otherwise. Ink is drawn light
/// underneath; fragment contours are thickened by one pixel onto the ink.
pub fn render_overlay(
    img: &BinaryImage,
    cb: &Codebook,
    s: &FragletSaliency,
    k: usize,
    params: &FragmentParams,
) -> Result<Overlay> {
    if cb.rows() != s.rows || cb.cols() != s.cols {
        return Err(Error::DimensionMismatch {
            expected: s.rows * s.cols,
            actual: cb.len(),
        });
    }
    let top = s.top_cells(k);
    let mut class = vec![GRAY; cb.len()];
    for &c in &top {
        class[c] = match s.sides[c] {
            Side::Left => GREEN,
            Side::Right => RED,
            Side::Neutral => GRAY,
        };
    }
    let mut out = RgbImage::filled(img.width(), img.height(), [255, 255, 255]);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) {
                out.set(x, y, INK_SHADE);
            }
        }
    }
    let (mut green, mut red, mut gray) = (0, 0, 0);
    for e in extract_fraglets_detailed(img, params) {
        let color = class[cb.bmu(e.fraglet.values())];
        match color {
            GREEN => green += 1,
            RED => red += 1,
            _ => gray += 1,
        }
        for &(px, py) in &e.pixels {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (px + dx, py + dy);
                    if img.get_signed(x, y) {
                        out.set(x as usize, y as usize, color);
                    }
                }
            }
        }
    }
    Ok(Overlay {
        image: out,
        green,
        red,
        gray,
    })
}

#[derive(Clone, Debug)]
pub struct SheetColumn {
    pub column_index: u32,
    pub thumbnail: RgbImage,
    pub truth: GroupLabel,
    pub predicted: GroupLabel,
}

fn blob_color(l: GroupLabel) -> [u8; 3] {
    match l {
        GroupLabel::Left => GREEN,
        GroupLabel::Right => RED,
        GroupLabel::Undecided => GRAY,
    }
}

pub const BLOB_RADIUS: usize = 6;

/// Thumbnails side by side, each scaled to `height` rows, with two blobs
/// underneath: ground truth on the left, prediction on the right.
pub fn render_overlay_sheet(columns: &[SheetColumn], height: usize) -> Result<RgbImage> {
    if columns.is_empty() || height == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let gap = 8;
    let widths: Vec<usize> = columns
        .iter()
        .map(|c| {
            ((c.thumbnail.width * height) as f64 / c.thumbnail.height.max(1) as f64)
                .ceil()
                .max(4.0 * BLOB_RADIUS as f64) as usize
        })
        .collect();
    let total_w = widths.iter().sum::<usize>() + gap * (columns.len() + 1);
    let total_h = height + 4 * BLOB_RADIUS + 2 * gap;
    let mut sheet = RgbImage::filled(total_w, total_h, [255, 255, 255]);
    let mut x0 = gap;
    for (c, &w) in columns.iter().zip(&widths) {
        let t = &c.thumbnail;
        for y in 0..height {
            for x in 0..w {
                let sx = (x * t.width / w).min(t.width.saturating_sub(1));
                let sy = (y * t.height / height).min(t.height.saturating_sub(1));
                if t.width > 0 && t.height > 0 {
                    sheet.set(x0 + x, gap + y, t.get(sx, sy));
                }
            }
        }
        let cy = (gap + height + BLOB_RADIUS + gap / 2) as f64;
        for (k, label) in [c.truth, c.predicted].into_iter().enumerate() {
            let cx = x0 as f64 + w as f64 * (1.0 + 2.0 * k as f64) / 4.0;
            let r = BLOB_RADIUS as f64;
            for y in (cy - r) as usize..=(cy + r) as usize {
                for x in (cx - r).max(0.0) as usize..=(cx + r) as usize {
                    if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                        sheet.set(x, y, blob_color(label));
                    }
                }
            }
        }
        x0 += w + gap;
    }
    Ok(sheet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_counts(FeatureKind::Fraglet, v).unwrap()
    }

    #[test]
    fn identical_sides_are_neutral() {
        let h = vec![fv(&[1.0, 2.0, 3.0, 4.0]); 6];
        let s = rank_discriminative_fraglets(
            &h,
            &[true, true, true, false, false, false],
            2,
            2,
            DEFAULT_TAU,
        )
        .unwrap();
        assert!(s.scores.iter().all(|&x| x == 0.0));
        assert!(s.sides.iter().all(|&x| x == Side::Neutral));
        let p = predict_group(&h[0], &s, 4).unwrap();
        assert_eq!(p.label, GroupLabel::Undecided);
    }

    #[test]
    fn left_only_cell_scores_highest() {
        let h = vec![
            fv(&[3.0, 5.0, 5.0, 5.0]),
            fv(&[2.0, 5.0, 6.0, 5.0]),
            fv(&[4.0, 6.0, 5.0, 5.0]),
            fv(&[0.0, 5.0, 5.0, 6.0]),
            fv(&[0.0, 6.0, 5.0, 5.0]),
            fv(&[0.0, 5.0, 6.0, 5.0]),
        ];
        let labels = [true, true, true, false, false, false];
        let s = rank_discriminative_fraglets(&h, &labels, 2, 2, DEFAULT_TAU).unwrap();
        let best = s.top_cells(1)[0];
        assert_eq!(best, 0);
        assert!(s.scores[0] > 0.0);
        assert!(s.scores.iter().all(|&x| x <= s.scores[0]));
        assert_eq!(s.sides[0], Side::Left);
        // label swap negates every score
        let swapped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let t = rank_discriminative_fraglets(&h, &swapped, 2, 2, DEFAULT_TAU).unwrap();
        for (a, b) in s.scores.iter().zip(&t.scores) {
            assert!((a + b).abs() < 1e-12);
        }
        let table = s.to_table();
        assert!(table.starts_with("cell_row,cell_col,score,side\n0,0,"));
        assert_eq!(table.lines().count(), 5);
    }

    #[test]
    fn prototype_and_mirror() {
        let h = vec![
            fv(&[6.0, 1.0, 3.0, 0.0]),
            fv(&[5.0, 2.0, 3.0, 0.0]),
            fv(&[1.0, 6.0, 3.0, 0.0]),
            fv(&[2.0, 5.0, 3.0, 0.0]),
        ];
        let s = rank_discriminative_fraglets(&h, &[true, true, false, false], 2, 2, DEFAULT_TAU)
            .unwrap();
        let mean_left = fv(&[5.5, 1.5, 3.0, 0.0]);
        let p = predict_group(&mean_left, &s, 2).unwrap();
        assert_eq!(p.label, GroupLabel::Left);
        let m = predict_group(&mean_left, &s.mirrored(), 2).unwrap();
        assert_eq!(m.label, GroupLabel::Right);
        assert!((p.margin - m.margin).abs() < 1e-12);
        assert!(predict_group(&mean_left, &s, 0).is_err());
    }

    #[test]
    fn neutral_saliency_gives_gray_overlay() {
        let mut img = BinaryImage::blank(40, 40).unwrap();
        for y in 8..30 {
            for x in 10..14 {
                img.set(x, y, true);
            }
        }
        let params = FragmentParams::default();
        let samples: Vec<Vec<f64>> = crate::fraglet::extract_fraglets(&img, &params)
            .into_iter()
            .map(|f| f.values().to_vec())
            .collect();
        let cb = crate::codebook::train_sofm(
            &samples,
            &crate::codebook::SofmParams::new(2, 2, 1).with_epochs(2),
        )
        .unwrap();
        let s = FragletSaliency {
            rows: 2,
            cols: 2,
            tau: DEFAULT_TAU,
            scores: vec![0.0; 4],
            sides: vec![Side::Neutral; 4],
        };
        let o = render_overlay(&img, &cb, &s, 4, &params).unwrap();
        assert_eq!((o.green, o.red), (0, 0));
        assert!(o.gray >= 1);
        assert!(o.image.data.iter().all(|&c| c != GREEN && c != RED));
        assert_eq!(o.green_share(), None);
    }

    #[test]
    fn sheet_has_blob_pair_under_each_column() {
        let cols: Vec<SheetColumn> = (0..3)
            .map(|i| SheetColumn {
                column_index: i + 1,
                thumbnail: RgbImage::filled(30, 60, [0, 0, 0]),
                truth: GroupLabel::Left,
                predicted: if i == 1 {
                    GroupLabel::Right
                } else {
                    GroupLabel::Left
                },
            })
            .collect();
        let sheet = render_overlay_sheet(&cols, 60).unwrap();
        let blob_row = 8 + 60 + BLOB_RADIUS + 4;
        let row: Vec<[u8; 3]> = (0..sheet.width).map(|x| sheet.get(x, blob_row)).collect();
        let runs = row
            .windows(2)
            .filter(|w| w[0] != w[1] && w[1] != [255, 255, 255])
            .count();
        assert_eq!(runs, 6);
        assert_eq!(row.iter().filter(|&&c| c == RED).count() > 0, true);
    }
}
