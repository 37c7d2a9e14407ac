//! Fragmented contour shapes ("fraglets"), their normalization, and the
//! bag-of-patterns histograms built from them against a [`Codebook`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::contour::{connected_components, signed_area2, trace_outer, BBox};
use crate::error::{Error, Result};
use crate::feature::{FeatureKind, FeatureVector};
use crate::image::BinaryImage;

pub const FRAGLET_POINTS: usize = 200;
pub const FRAGLET_DIM: usize = 2 * FRAGLET_POINTS;

/// Contour steps on either side of a point used to measure turning angle.
const CURVATURE_SUPPORT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FragmentParams {
    pub enabled: bool,
    /// Desired arc length of one fragment, in pixels.
    pub target_arc_length: f64,
    /// Contours with a shorter perimeter are ignored.
    pub min_contour_length: f64,
}

impl Default for FragmentParams {
    fn default() -> Self {
        Self {
            enabled: true,
            target_arc_length: 60.0,
            min_contour_length: 8.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FragletConfig {
    /// Ink needed before a plate is admitted to codebook training.
    pub min_ink_pixels: usize,
    pub spread_k: usize,
    pub fragments: FragmentParams,
}

impl Default for FragletConfig {
    fn default() -> Self {
        Self {
            min_ink_pixels: 100_000,
            spread_k: 30,
            fragments: FragmentParams::default(),
        }
    }
}

/// 200 contour points, counter-clockwise, centered on the origin with mean
/// radius 1. Stored interleaved as `x0 y0 x1 y1 ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fraglet {
    values: Vec<f64>,
}

impl Fraglet {
    /// Normalizes 200 raw points (centroid to the origin, mean radius to 1).
    /// Returns `None` when all points coincide.
    pub fn normalize(points: &[(f64, f64)]) -> Option<Self> {
        assert_eq!(
            points.len(),
            FRAGLET_POINTS,
            "fraglets hold {FRAGLET_POINTS} points"
        );
        let n = points.len() as f64;
        let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
        let centered: Vec<(f64, f64)> = points.iter().map(|p| (p.0 - cx, p.1 - cy)).collect();
        let r = centered.iter().map(|p| p.0.hypot(p.1)).sum::<f64>() / n;
        if !(r > 1e-12) {
            return None;
        }
        let values = centered.iter().flat_map(|p| [p.0 / r, p.1 / r]).collect();
        Some(Self { values })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != FRAGLET_DIM {
            return Err(Error::DimensionMismatch {
                expected: FRAGLET_DIM,
                actual: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.values[2 * i], self.values[2 * i + 1])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = FRAGLET_POINTS as f64;
        let (sx, sy) = self
            .points()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        (sx / n, sy / n)
    }

    pub fn mean_radius(&self) -> f64 {
        self.points().map(|(x, y)| x.hypot(y)).sum::<f64>() / FRAGLET_POINTS as f64
    }
}

impl AsRef<[f64]> for Fraglet {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Direction of each fraglet point seen from the centroid, as unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineFraglet {
    values: Vec<f64>,
    /// Set when some point sat exactly on the origin and got angle 0.
    pub origin_flagged: bool,
}

impl CosineFraglet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn to_cosine(f: &Fraglet) -> CosineFraglet {
    let mut flagged = false;
    let values = f
        .points()
        .flat_map(|(x, y)| {
            let phi = if x == 0.0 && y == 0.0 {
                flagged = true;
                0.0
            } else {
                y.atan2(x)
            };
            [phi.cos(), phi.sin()]
        })
        .collect();
    CosineFraglet {
        values,
        origin_flagged: flagged,
    }
}

/// A fraglet plus where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedFraglet {
    pub fraglet: Fraglet,
    /// Index into the connected components of the source image.
    pub component: usize,
    pub bbox: BBox,
    /// Contour pixels (image coordinates) covered by this fragment.
    pub pixels: Vec<(i64, i64)>,
}

fn seg_len(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.0).hypot(b.1 - a.1)
}

/// Resamples a polyline to `n` points equidistant in arc length. A closed
/// polyline includes the segment back to its first point.
pub fn resample(points: &[(f64, f64)], closed: bool, n: usize) -> Vec<(f64, f64)> {
    let mut poly = points.to_vec();
    if closed {
        poly.push(points[0]);
    }
    let total: f64 = poly.windows(2).map(|w| seg_len(w[0], w[1])).sum();
    if poly.len() < 2 || total == 0.0 {
        return vec![points[0]; n];
    }
    let step = if closed {
        total / n as f64
    } else {
        total / (n - 1) as f64
    };
    let mut out = Vec::with_capacity(n);
    let (mut seg, mut seg_start) = (0usize, 0.0f64);
    for k in 0..n {
        let s = (k as f64 * step).min(total);
        loop {
            let l = seg_len(poly[seg], poly[seg + 1]);
            if s <= seg_start + l || seg + 2 == poly.len() {
                let t = if l > 0.0 {
                    ((s - seg_start) / l).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (a, b) = (poly[seg], poly[seg + 1]);
                out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
                break;
            }
            seg_start += l;
            seg += 1;
        }
    }
    out
}

/// Absolute turning angle at each point of a closed contour.
fn turning_angles(p: &[(f64, f64)]) -> Vec<f64> {
    let n = p.len();
    let s = CURVATURE_SUPPORT.min(n / 3).max(1);
    (0..n)
        .map(|k| {
            let a = p[(k + n - s) % n];
            let b = p[k];
            let c = p[(k + s) % n];
            let (ux, uy) = (b.0 - a.0, b.1 - a.1);
            let (vx, vy) = (c.0 - b.0, c.1 - b.1);
            if (ux == 0.0 && uy == 0.0) || (vx == 0.0 && vy == 0.0) {
                0.0
            } else {
                (ux * vy - uy * vx).atan2(ux * vx + uy * vy).abs()
            }
        })
        .collect()
}

/// Indices where a closed contour of arc length `total` is cut. Empty when
/// the contour stays whole.
fn cut_points(p: &[(f64, f64)], cum: &[f64], total: f64, params: &FragmentParams) -> Vec<usize> {
    let t = params.target_arc_length;
    if !params.enabled || total <= 1.5 * t {
        return Vec::new();
    }
    let n_frag = (total / t).round() as usize;
    let theta = turning_angles(p);
    let start = (0..p.len()).fold(0, |best, k| if theta[k] > theta[best] { k } else { best });
    let cyc = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(total);
        d.min(total - d)
    };
    let mut cuts: Vec<usize> = (0..n_frag)
        .map(|m| {
            let target = (cum[start] + m as f64 * total / n_frag as f64).rem_euclid(total);
            let mut best: Option<usize> = None;
            for k in 0..p.len() {
                if cyc(cum[k], target) > t / 4.0 {
                    continue;
                }
                best = match best {
                    None => Some(k),
                    Some(b)
                        if theta[k] > theta[b]
                            || (theta[k] == theta[b]
                                && cyc(cum[k], target) < cyc(cum[b], target)) =>
                    {
                        Some(k)
                    }
                    keep => keep,
                };
            }
            best.unwrap_or_else(|| {
                (0..p.len())
                    .min_by(|&a, &b| cyc(cum[a], target).total_cmp(&cyc(cum[b], target)))
                    .expect("non-empty contour")
            })
        })
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    if cuts.len() < 2 {
        Vec::new()
    } else {
        cuts
    }
}

/// Fraglets with provenance, in component order then contour order.
pub fn extract_fraglets_detailed(
    img: &BinaryImage,
    params: &FragmentParams,
) -> Vec<ExtractedFraglet> {
    let comps = connected_components(img);
    comps
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ci, comp)| {
            let mut pix = trace_outer(img, comp.start());
            // math orientation, y up
            let mut pts: Vec<(f64, f64)> =
                pix.iter().map(|&(x, y)| (x as f64, -(y as f64))).collect();
            if signed_area2(&pts) < 0.0 {
                pts.reverse();
                pix.reverse();
            }
            let n = pts.len();
            let mut cum = vec![0.0; n];
            for k in 1..n {
                cum[k] = cum[k - 1] + seg_len(pts[k - 1], pts[k]);
            }
            let total = cum[n - 1] + seg_len(pts[n - 1], pts[0]);
            let mut out = Vec::new();
            if total < params.min_contour_length.max(f64::MIN_POSITIVE) {
                return out.into_iter();
            }
            let cuts = cut_points(&pts, &cum, total, params);
            let mut push = |sampled: Vec<(f64, f64)>, pixels: Vec<(i64, i64)>| {
                if let Some(fraglet) = Fraglet::normalize(&sampled) {
                    out.push(ExtractedFraglet {
                        fraglet,
                        component: ci,
                        bbox: comp.bbox,
                        pixels,
                    });
                }
            };
            if cuts.is_empty() {
                push(resample(&pts, true, FRAGLET_POINTS), pix.clone());
            } else {
                for (i, &a) in cuts.iter().enumerate() {
                    let b = cuts[(i + 1) % cuts.len()];
                    let len = if b > a { b - a } else { b + n - a };
                    let idx: Vec<usize> = (0..=len).map(|k| (a + k) % n).collect();
                    let arc: Vec<(f64, f64)> = idx.iter().map(|&k| pts[k]).collect();
                    push(
                        resample(&arc, false, FRAGLET_POINTS),
                        idx.iter().map(|&k| pix[k]).collect(),
                    );
                }
            }
            out.into_iter()
        })
        .collect()
}

pub fn extract_fraglets(img: &BinaryImage, params: &FragmentParams) -> Vec<Fraglet> {
    extract_fraglets_detailed(img, params)
        .into_iter()
        .map(|e| e.fraglet)
        .collect()
}

/// Indices of the `k` nearest centroids, nearest first; ties go to the lower
/// index.
pub fn nearest_cells(cb: &Codebook, v: &[f64], k: usize) -> Vec<usize> {
    cb.nearest(v, k)
}

/// Spread-vote histogram over codebook cells for pre-extracted vectors.
pub fn encode_histogram<V: AsRef<[f64]> + Sync>(
    vectors: &[V],
    cb: &Codebook,
    spread_k: usize,
    kind: FeatureKind,
) -> Result<FeatureVector> {
    if spread_k == 0 || spread_k > cb.len() {
        return Err(Error::InvalidParameter(format!(
            "spread_k must be in [1, {}], got {spread_k}",
            cb.len()
        )));
    }
    if vectors.is_empty() {
        return Err(Error::InsufficientInk);
    }
    if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != cb.dim()) {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            actual: v.as_ref().len(),
        });
    }
    let votes: Vec<Vec<usize>> = vectors
        .par_iter()
        .map(|v| nearest_cells(cb, v.as_ref(), spread_k))
        .collect();
    let mut counts = vec![0.0; cb.len()];
    let w = 1.0 / spread_k as f64;
    for cells in &votes {
        for &c in cells {
            counts[c] += w;
        }
    }
    FeatureVector::from_counts(kind, &counts)
}

/// Positional fraglet histogram of one image.
pub fn fraglet_histogram(
    img: &BinaryImage,
    cb: &Codebook,
    spread_k: usize,
    params: &FragmentParams,
) -> Result<FeatureVector> {
    let fr = extract_fraglets(img, params);
    let vecs: Vec<&[f64]> = fr.iter().map(|f| f.values()).collect();
    encode_histogram(&vecs, cb, spread_k, FeatureKind::Fraglet)
}

/// Cosine-variant histogram; `cb` must be trained on cosine fraglets.
pub fn fraglet_cos_histogram(
    img: &BinaryImage,
    cb: &Codebook,
    spread_k: usize,
    params: &FragmentParams,
) -> Result<FeatureVector> {
    let fr: Vec<CosineFraglet> = extract_fraglets(img, params)
        .iter()
        .map(to_cosine)
        .collect();
    let vecs: Vec<&[f64]> = fr.iter().map(|f| f.values()).collect();
    encode_histogram(&vecs, cb, spread_k, FeatureKind::FragletCos)
}

/// Weighted concatenation `[w_h * h, w_f * f]`.
pub fn adjoin(h: &FeatureVector, f: &FeatureVector, w_h: f64, w_f: f64) -> Result<FeatureVector> {
    if h.kind() != FeatureKind::Hinge {
        return Err(Error::KindMismatch {
            expected: FeatureKind::Hinge.to_string(),
            actual: h.kind().to_string(),
        });
    }
    if !matches!(f.kind(), FeatureKind::Fraglet | FeatureKind::FragletCos) {
        return Err(Error::KindMismatch {
            expected: FeatureKind::Fraglet.to_string(),
            actual: f.kind().to_string(),
        });
    }
    if !(w_h > 0.0 && w_f > 0.0) || (w_h + w_f - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "adjoin weights must be positive and sum to 1, got {w_h} and {w_f}"
        )));
    }
    let values = h
        .values()
        .iter()
        .map(|v| w_h * v)
        .chain(f.values().iter().map(|v| w_f * v))
        .collect();
    FeatureVector::new(FeatureKind::Adjoined, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disc(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryImage {
        BinaryImage::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            dx * dx + dy * dy <= r * r
        })
        .unwrap()
    }

    fn check_normalized(f: &Fraglet) {
        let (cx, cy) = f.centroid();
        assert!(cx.abs() < 1e-9 && cy.abs() < 1e-9);
        assert!((f.mean_radius() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn circle_normalizes_to_unit_radii() {
        let img = disc(100, 100, 50.0, 50.0, 40.0);
        let params = FragmentParams {
            enabled: false,
            ..Default::default()
        };
        let fr = extract_fraglets(&img, &params);
        assert_eq!(fr.len(), 1);
        check_normalized(&fr[0]);
        for (x, y) in fr[0].points() {
            assert!((x.hypot(y) - 1.0).abs() < 0.02, "radius {}", x.hypot(y));
        }
        // counter-clockwise: positive signed area
        let pts: Vec<_> = fr[0].points().collect();
        assert!(signed_area2(&pts) > 0.0);
    }

    #[test]
    fn blank_gives_nothing() {
        let img = BinaryImage::blank(30, 30).unwrap();
        assert!(extract_fraglets(&img, &FragmentParams::default()).is_empty());
    }

    #[test]
    fn identical_blobs_identical_fraglets() {
        let blob = |x: usize, y: usize| {
            let (dx, dy) = (x as f64 - 12.0, y as f64 - 10.0);
            dx * dx / 100.0 + dy * dy / 36.0 <= 1.0 || (x == 20 && y < 14)
        };
        let img = BinaryImage::from_fn(80, 30, |x, y| blob(x % 40, y)).unwrap();
        let fr = extract_fraglets(&img, &FragmentParams::default());
        assert_eq!(fr.len() % 2, 0);
        let half = fr.len() / 2;
        for i in 0..half {
            let d: f64 = fr[i]
                .values()
                .iter()
                .zip(fr[i + half].values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-6);
        }
    }

    #[test]
    fn long_contours_are_cut() {
        let img = disc(140, 140, 70.0, 70.0, 60.0);
        let params = FragmentParams {
            target_arc_length: 100.0,
            ..Default::default()
        };
        let det = extract_fraglets_detailed(&img, &params);
        // perimeter about 2 pi 60 = 377 -> 4 pieces
        assert_eq!(det.len(), 4);
        for e in &det {
            check_normalized(&e.fraglet);
            assert!(!e.pixels.is_empty());
        }
        let short = FragmentParams {
            target_arc_length: 300.0,
            ..Default::default()
        };
        assert_eq!(extract_fraglets(&img, &short).len(), 1);
    }

    #[test]
    fn resample_spacing() {
        let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let closed = resample(&square, true, 8);
        assert_eq!(closed[1], (0.5, 0.0));
        assert_eq!(closed[2], (1.0, 0.0));
        let open = resample(&[(0.0, 0.0), (3.0, 0.0)], false, 4);
        assert_eq!(open, vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
    }

    #[test]
    fn cosine_variant() {
        let mut pts = vec![(1.0, 0.0); FRAGLET_POINTS];
        pts[1] = (0.0, 2.0);
        let f = Fraglet::from_values(pts.iter().flat_map(|p| [p.0, p.1]).collect()).unwrap();
        let c = to_cosine(&f);
        assert_eq!(&c.values()[..2], &[1.0, 0.0]);
        assert!((c.values()[2]).abs() < 1e-15 && (c.values()[3] - 1.0).abs() < 1e-15);
        assert!(!c.origin_flagged);

        let ring: Vec<f64> = (0..FRAGLET_POINTS)
            .flat_map(|i| {
                let t = i as f64 * std::f64::consts::TAU / FRAGLET_POINTS as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let c = to_cosine(&Fraglet::from_values(ring.clone()).unwrap());
        for (a, b) in c.values().iter().zip(&ring) {
            assert!((a - b).abs() < 1e-9);
        }

        let mut at_origin = ring;
        at_origin[0] = 0.0;
        at_origin[1] = 0.0;
        let c = to_cosine(&Fraglet::from_values(at_origin).unwrap());
        assert!(c.origin_flagged);
        assert_eq!(&c.values()[..2], &[1.0, 0.0]);
    }

    #[test]
    fn adjoin_rules() {
        let h = FeatureVector::from_counts(FeatureKind::Hinge, &vec![1.0; 465]).unwrap();
        let f = FeatureVector::from_counts(FeatureKind::Fraglet, &vec![2.0; 4900]).unwrap();
        let a = adjoin(&h, &f, 0.5, 0.5).unwrap();
        assert_eq!(a.dim(), 5365);
        assert_eq!(a.kind(), FeatureKind::Adjoined);
        assert!(adjoin(&h, &f, 1.0, 0.0).is_err());
        assert!(adjoin(&f, &h, 0.5, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn adjoin_sums_to_one(
            hv in proptest::collection::vec(0.0f64..5.0, 10),
            fv in proptest::collection::vec(0.0f64..5.0, 7),
            w in 0.01f64..0.99,
        ) {
            let mut hv = hv; hv[0] += 0.1;
            let mut fv = fv; fv[0] += 0.1;
            let h = FeatureVector::from_counts(FeatureKind::Hinge, &hv).unwrap();
            let f = FeatureVector::from_counts(FeatureKind::Fraglet, &fv).unwrap();
            let a = adjoin(&h, &f, w, 1.0 - w).unwrap();
            prop_assert!((a.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn every_fraglet_is_normalized(
            bits in proptest::collection::vec(any::<bool>(), 40 * 40),
            t in 10.0f64..80.0,
        ) {
            let img = BinaryImage::from_fn(40, 40, |x, y| bits[y * 40 + x] || (x / 5 + y / 7) % 2 == 0).unwrap();
            let params = FragmentParams { target_arc_length: t, ..Default::default() };
            for f in extract_fraglets(&img, &params) {
                let (cx, cy) = f.centroid();
                prop_assert!(cx.abs() < 1e-9 && cy.abs() < 1e-9);
                prop_assert!((f.mean_radius() - 1.0).abs() < 1e-9);
            }
        }
    }
}
