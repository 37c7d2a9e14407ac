//! Hinge texture feature: joint histogram of the orientations of two contour
//! legs hinged at every contour point.

use serde::{Deserialize, Serialize};

use crate::contour::{connected_components, trace_outer};
use crate::error::{Error, Result};
use crate::feature::{FeatureKind, FeatureVector};
use crate::image::BinaryImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HingeConfig {
    /// Orientation bins over [0, 180) degrees.
    pub nbins: usize,
    /// Leg length in contour steps.
    pub nvec: usize,
}

impl Default for HingeConfig {
    fn default() -> Self {
        Self {
            nbins: 31,
            nvec: 13,
        }
    }
}

impl HingeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nbins < 2 || self.nvec < 2 {
            return Err(Error::InvalidParameter(format!(
                "hinge needs nbins >= 2 and nvec >= 2, got {} and {}",
                self.nbins, self.nvec
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nbins * (self.nbins - 1) / 2
    }

    /// Flat index of the bin pair `(i, j)` with `i < j`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.nbins);
        i * self.nbins - i * (i + 1) / 2 + (j - i - 1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HingeDiagnostics {
    pub contours: usize,
    /// Contours shorter than `2 * nvec + 1` points.
    pub skipped_short: usize,
    pub points: usize,
    /// Hinges whose legs fell into the same bin, or had zero length.
    pub discarded_pairs: usize,
}

/// Orientation of the vector `(dx, dy)` in image coordinates, measured
/// counter-clockwise from the horizontal and folded into [0, 180).
pub fn leg_angle(dx: i64, dy: i64) -> f64 {
    let mut deg = (-(dy as f64)).atan2(dx as f64).to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

pub fn angle_bin(deg: f64, nbins: usize) -> usize {
    ((deg / 180.0 * nbins as f64).floor() as usize).min(nbins - 1)
}

/// Unnormalized pair counts, in [`HingeConfig::pair_index`] order.
pub fn hinge_counts(img: &BinaryImage, cfg: &HingeConfig) -> Result<(Vec<u64>, HingeDiagnostics)> {
    cfg.validate()?;
    let mut counts = vec![0u64; cfg.dim()];
    let mut diag = HingeDiagnostics::default();
    for comp in connected_components(img) {
        let contour = trace_outer(img, comp.start());
        diag.contours += 1;
        let n = contour.len();
        if n < 2 * cfg.nvec + 1 {
            diag.skipped_short += 1;
            continue;
        }
        for p in 0..n {
            let c = contour[p];
            let fwd = contour[(p + cfg.nvec) % n];
            let back = contour[(p + n - cfg.nvec) % n];
            diag.points += 1;
            let (ax, ay) = (fwd.0 - c.0, fwd.1 - c.1);
            let (bx, by) = (back.0 - c.0, back.1 - c.1);
            if (ax, ay) == (0, 0) || (bx, by) == (0, 0) {
                diag.discarded_pairs += 1;
                continue;
            }
            let i = angle_bin(leg_angle(ax, ay), cfg.nbins);
            let j = angle_bin(leg_angle(bx, by), cfg.nbins);
            if i == j {
                diag.discarded_pairs += 1;
                continue;
            }
            counts[cfg.pair_index(i.min(j), i.max(j))] += 1;
        }
    }
    if diag.contours == diag.skipped_short || counts.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientInk);
    }
    Ok((counts, diag))
}

pub fn hinge_feature_with_diagnostics(
    img: &BinaryImage,
    cfg: &HingeConfig,
) -> Result<(FeatureVector, HingeDiagnostics)> {
    let (counts, diag) = hinge_counts(img, cfg)?;
    let counts: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
    Ok((
        FeatureVector::from_counts(FeatureKind::Hinge, &counts)?,
        diag,
    ))
}

pub fn hinge_feature(img: &BinaryImage, cfg: &HingeConfig) -> Result<FeatureVector> {
    hinge_feature_with_diagnostics(img, cfg).map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Chain-code boundary follower, written independently of `contour`.
    /// Freeman codes: 0 = east, counter-clockwise on screen, y grows down.
    fn oracle_trace(img: &BinaryImage, s: (i64, i64)) -> Vec<(i64, i64)> {
        const CODE: [(i64, i64); 8] = [
            (1, 0),
            (1, -1),
            (0, -1),
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        let ink = |p: (i64, i64)| img.get_signed(p.0, p.1);
        let mut out = vec![s];
        let mut p = s;
        let mut d = 2usize;
        let mut first: Option<usize> = None;
        loop {
            let start = if d % 2 == 0 { d + 1 } else { d + 2 };
            let found = (0..8)
                .map(|k| (start + 8 - k) % 8)
                .find(|&c| ink((p.0 + CODE[c].0, p.1 + CODE[c].1)));
            let Some(c) = found else { return out };
            if p == s && first == Some(c) {
                out.pop();
                return out;
            }
            first.get_or_insert(c);
            p = (p.0 + CODE[c].0, p.1 + CODE[c].1);
            d = c;
            out.push(p);
        }
    }

    fn oracle_counts(img: &BinaryImage, nbins: usize, nvec: usize) -> Vec<u64> {
        let (w, h) = (img.width(), img.height());
        let mut label = vec![false; w * h];
        let mut joint = vec![vec![0u64; nbins]; nbins];
        for y in 0..h {
            for x in 0..w {
                if !img.get(x, y) || label[y * w + x] {
                    continue;
                }
                // mark the whole component
                let mut todo = vec![(x, y)];
                label[y * w + x] = true;
                while let Some((px, py)) = todo.pop() {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                            if img.get_signed(nx, ny) && !label[ny as usize * w + nx as usize] {
                                label[ny as usize * w + nx as usize] = true;
                                todo.push((nx as usize, ny as usize));
                            }
                        }
                    }
                }
                let c = oracle_trace(img, (x as i64, y as i64));
                let n = c.len();
                if n <= 2 * nvec {
                    continue;
                }
                for p in 0..n {
                    let a = c[(p + nvec) % n];
                    let b = c[(p + n - nvec) % n];
                    if a == c[p] || b == c[p] {
                        continue;
                    }
                    let ang = |q: (i64, i64)| {
                        let t = ((c[p].1 - q.1) as f64)
                            .atan2((q.0 - c[p].0) as f64)
                            .to_degrees();
                        t.rem_euclid(180.0)
                    };
                    let bin = |t: f64| ((t * nbins as f64 / 180.0) as usize).min(nbins - 1);
                    let (i, j) = (bin(ang(a)), bin(ang(b)));
                    if i != j {
                        joint[i.min(j)][i.max(j)] += 1;
                    }
                }
            }
        }
        let mut flat = Vec::new();
        for (i, row) in joint.iter().enumerate() {
            flat.extend_from_slice(&row[i + 1..]);
        }
        flat
    }

    fn disc(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryImage {
        BinaryImage::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            dx * dx + dy * dy <= r * r
        })
        .unwrap()
    }

    #[test]
    fn default_dimensionality() {
        let img = disc(60, 60, 30.0, 30.0, 20.0);
        let f = hinge_feature(&img, &HingeConfig::default()).unwrap();
        assert_eq!(f.dim(), 465);
        assert!((f.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_index_is_dense() {
        let cfg = HingeConfig { nbins: 7, nvec: 2 };
        let mut seen = vec![false; cfg.dim()];
        for i in 0..7 {
            for j in i + 1..7 {
                let k = cfg.pair_index(i, j);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn blank_and_tiny_inputs_are_insufficient() {
        let cfg = HingeConfig::default();
        let blank = BinaryImage::blank(20, 20).unwrap();
        assert!(matches!(
            hinge_feature(&blank, &cfg),
            Err(Error::InsufficientInk)
        ));
        let dot = disc(20, 20, 10.0, 10.0, 2.0);
        let err = hinge_feature(&dot, &cfg).unwrap_err();
        assert_eq!(err.to_string(), "insufficient ink");
    }

    #[test]
    fn short_contours_are_counted_not_fatal() {
        let mut img = disc(80, 80, 40.0, 40.0, 20.0);
        img.set(2, 2, true);
        let (_, diag) = hinge_feature_with_diagnostics(&img, &HingeConfig::default()).unwrap();
        assert_eq!(diag.contours, 2);
        assert_eq!(diag.skipped_short, 1);
    }

    #[test]
    fn diagonal_stroke_hits_the_45_degree_bin() {
        let img = BinaryImage::from_fn(20, 20, |x, y| {
            let d = x as i64 + y as i64 - 19;
            (2..18).contains(&x) && (0..=1).contains(&d)
        })
        .unwrap();
        let cfg = HingeConfig { nbins: 4, nvec: 3 };
        let (counts, _) = hinge_counts(&img, &cfg).unwrap();
        // 45 degrees is bin 1 of 4; pairs touching it are (0,1), (1,2), (1,3)
        let touching = counts[cfg.pair_index(0, 1)]
            + counts[cfg.pair_index(1, 2)]
            + counts[cfg.pair_index(1, 3)];
        let total: u64 = counts.iter().sum();
        assert!(touching * 2 > total, "{counts:?}");
        assert_eq!(counts, oracle_counts(&img, 4, 3));
    }

    #[test]
    fn translation_padding_and_duplication() {
        let cfg = HingeConfig::default();
        let base = BinaryImage::from_fn(50, 50, |x, y| {
            let (dx, dy) = (x as f64 - 25.0, y as f64 - 25.0);
            let r = (dx * dx + dy * dy).sqrt();
            (12.0..17.0).contains(&r) && !(dx > 0.0 && dy.abs() < 4.0)
        })
        .unwrap();
        let f = hinge_feature(&base, &cfg).unwrap();
        let shifted = base.pad(10, 7, 0, 0);
        assert_eq!(hinge_feature(&shifted, &cfg).unwrap(), f);
        let padded = base.pad(3, 9, 40, 11);
        assert_eq!(hinge_feature(&padded, &cfg).unwrap(), f);
        let twice = BinaryImage::from_fn(110, 50, |x, y| {
            let x = if x >= 55 { x - 55 } else { x };
            x < 50 && base.get(x, y)
        })
        .unwrap();
        assert_eq!(hinge_feature(&twice, &cfg).unwrap(), f);
    }

    #[test]
    fn matches_oracle_on_handmade_cards() {
        let cards = [
            disc(32, 32, 15.5, 15.5, 12.0),
            BinaryImage::from_fn(32, 32, |x, y| (x / 4 + y / 6) % 3 == 0).unwrap(),
            BinaryImage::from_fn(32, 32, |x, y| x == y || x + y == 31 || y == 16).unwrap(),
            BinaryImage::from_fn(32, 32, |x, y| (x * 7 + y * 13) % 11 < 6).unwrap(),
        ];
        for (k, card) in cards.iter().enumerate() {
            for cfg in [
                HingeConfig { nbins: 4, nvec: 3 },
                HingeConfig {
                    nbins: 31,
                    nvec: 13,
                },
                HingeConfig { nbins: 9, nvec: 2 },
            ] {
                let mine = hinge_counts(card, &cfg)
                    .map(|(c, _)| c)
                    .unwrap_or_else(|_| vec![0; cfg.dim()]);
                assert_eq!(
                    mine,
                    oracle_counts(card, cfg.nbins, cfg.nvec),
                    "card {k} {cfg:?}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn random_cards_match_oracle(
            w in 3usize..=32,
            h in 3usize..=32,
            bits in proptest::collection::vec(0u8..100, 32 * 32),
            density in 20u8..80,
            nbins in 2usize..12,
            nvec in 2usize..6,
        ) {
            let img = BinaryImage::from_fn(w, h, |x, y| bits[y * 32 + x] < density).unwrap();
            let cfg = HingeConfig { nbins, nvec };
            let expected = oracle_counts(&img, nbins, nvec);
            match hinge_counts(&img, &cfg) {
                Ok((c, _)) => prop_assert_eq!(c, expected),
                Err(_) => prop_assert!(expected.iter().all(|&c| c == 0)),
            }
        }

        #[test]
        fn normalized_and_translation_invariant(
            bits in proptest::collection::vec(any::<bool>(), 24 * 24),
            dx in 0usize..12,
            dy in 0usize..12,
        ) {
            let img = BinaryImage::from_fn(24, 24, |x, y| bits[y * 24 + x] && (x + y) % 3 != 0).unwrap();
            let cfg = HingeConfig { nbins: 8, nvec: 3 };
            if let Ok(f) = hinge_feature(&img, &cfg) {
                prop_assert!((f.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert_eq!(f.dim(), 28);
                prop_assert_eq!(hinge_feature(&img.pad(dx, dy, 0, 0), &cfg).unwrap(), f);
            }
        }
    }
}
