//! Template glyph recognition, centroid-aligned heatmaps and character charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{connected_components, BBox};
use crate::error::{Error, Result};
use crate::fraglet::{extract_fraglets_detailed, Fraglet, FragmentParams, FRAGLET_POINTS};
use crate::image::BinaryImage;
use crate::visual::svg::{esc, Svg};

pub const HEATMAP_GRID: usize = 64;
/// Half-width of the heatmap window in mean radii.
pub const HEATMAP_EXTENT: f64 = 2.5;
pub const DEFAULT_THETA: f64 = 0.12;
/// Mid-intensity band used by the bootstrap stability check.
pub const MID_BAND: (f64, f64) = (0.46, 0.54);

/// Where an image came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scan_id: String,
    pub column_index: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphTemplate {
    pub letter: String,
    pub exemplars: Vec<Fraglet>,
}

fn whole_contours(img: &BinaryImage) -> Vec<crate::fraglet::ExtractedFraglet> {
    let params = FragmentParams {
        enabled: false,
        ..FragmentParams::default()
    };
    extract_fraglets_detailed(img, &params)
}

impl GlyphTemplate {
    /// Template from one clean glyph image; its largest component is the
    /// exemplar.
    pub fn from_image(letter: &str, img: &BinaryImage) -> Result<Self> {
        let comps = connected_components(img);
        let shapes = whole_contours(img);
        let best = shapes
            .into_iter()
            .max_by_key(|e| (comps[e.component].pixels.len(), usize::MAX - e.component))
            .ok_or(Error::BlankImage)?;
        Ok(Self {
            letter: letter.to_string(),
            exemplars: vec![best.fraglet],
        })
    }
}

/// Templates for every glyph of a style, drawn at the style's base parameters.
pub fn templates_for_style(
    style: &crate::synth::StyleParams,
    width_px: f64,
    height_px: f64,
) -> Result<Vec<GlyphTemplate>> {
    let gs = crate::synth::GlyphStyle {
        slant_deg: style.slant_deg,
        curvature: style.curvature,
        stroke_width: style.stroke_width,
        width_px,
        height_px,
    };
    style
        .glyph_set
        .iter()
        .map(|def| GlyphTemplate::from_image(&def.letter, &crate::synth::render_glyph(def, &gs)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlyphInstance {
    pub letter: String,
    pub source: Provenance,
    pub bbox: BBox,
    /// Outer contour pixels in image coordinates.
    pub contour: Vec<(i64, i64)>,
    /// Component ink cropped to `bbox`.
    pub raster: BinaryImage,
    pub shape: Fraglet,
    pub distance: f64,
}

/// Mean pointwise distance between two normalized contours, minimized over
/// cyclic shifts of the start point.
pub fn contour_distance(a: &Fraglet, b: &Fraglet) -> f64 {
    Shape::new(a).distance_bounded(&Shape::new(b), f64::INFINITY)
}

struct Shape {
    pts: Vec<(f64, f64)>,
    radii: Vec<f64>,
}

impl Shape {
    fn new(f: &Fraglet) -> Self {
        let pts: Vec<(f64, f64)> = f.points().collect();
        let mut radii: Vec<f64> = pts.iter().map(|p| p.0.hypot(p.1)).collect();
        radii.sort_by(f64::total_cmp);
        Self { pts, radii }
    }

    /// Shift-free lower bound: |p - q| >= ||p| - |q||, and sorted radii give
    /// the cheapest pairing of the radius values.
    fn lower_bound(&self, other: &Shape) -> f64 {
        self.radii
            .iter()
            .zip(&other.radii)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.radii.len() as f64
    }

    /// Exact distance when it is below `bound`; otherwise some value
    /// `>= bound`.
    fn distance_bounded(&self, other: &Shape, bound: f64) -> f64 {
        if self.lower_bound(other) >= bound {
            return bound;
        }
        let n = FRAGLET_POINTS;
        let (pa, pb) = (&self.pts, &other.pts);
        // coarse pass orders the shifts, the exact pass abandons hopeless ones
        let coarse = |s: usize| -> f64 {
            (0..n)
                .step_by(10)
                .map(|i| {
                    let (p, q) = (pa[i], pb[(i + s) % n]);
                    (p.0 - q.0).abs() + (p.1 - q.1).abs()
                })
                .sum()
        };
        let mut order: Vec<(f64, usize)> = (0..n).map(|s| (coarse(s), s)).collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut best = bound * n as f64;
        for (_, s) in order {
            let mut sum = 0.0;
            for i in 0..n {
                let (p, q) = (pa[i], pb[(i + s) % n]);
                sum += (p.0 - q.0).hypot(p.1 - q.1);
                if sum >= best {
                    break;
                }
            }
            if sum < best {
                best = sum;
            }
        }
        best / n as f64
    }
}

/// Matches every connected component against the templates and keeps those
/// whose nearest exemplar is closer than `theta`.
pub fn recognize_glyphs(
    img: &BinaryImage,
    templates: &[GlyphTemplate],
    theta: f64,
    source: &Provenance,
) -> Result<Vec<GlyphInstance>> {
    if templates.is_empty() || templates.iter().any(|t| t.exemplars.is_empty()) {
        return Err(Error::InvalidParameter("templates must be nonempty".into()));
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    if theta == 0.0 {
        return Ok(Vec::new());
    }
    let exemplars: Vec<(usize, Shape)> = templates
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| t.exemplars.iter().map(move |ex| (ti, Shape::new(ex))))
        .collect();
    let comps = connected_components(img);
    let shapes = whole_contours(img);
    Ok(shapes
        .into_par_iter()
        .filter_map(|e| {
            let shape = Shape::new(&e.fraglet);
            let mut best: Option<(f64, usize)> = None;
            for (ti, ex) in &exemplars {
                let bound = best.map_or(theta, |b| b.0.min(theta));
                let d = shape.distance_bounded(ex, bound);
                if d < bound {
                    best = Some((d, *ti));
                }
            }
            let (d, ti) = best?;
            (d < theta).then(|| GlyphInstance {
                letter: templates[ti].letter.clone(),
                source: source.clone(),
                bbox: e.bbox,
                contour: e.pixels,
                raster: comps[e.component].mask(),
                shape: e.fraglet,
                distance: d,
            })
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatmapGroup {
    All,
    FirstHalf,
    SecondHalf,
}

impl HeatmapGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::All => "all",
            Self::FirstHalf => "first-half",
            Self::SecondHalf => "second-half",
        }
    }

    /// Whether a column belongs to the group, with `split` the last column of
    /// the first half.
    pub fn contains(&self, column: u32, split: u32) -> bool {
        match self {
            Self::All => true,
            Self::FirstHalf => column <= split,
            Self::SecondHalf => column > split,
        }
    }
}

impl FromStr for HeatmapGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "left" | "first-half" => Ok(Self::FirstHalf),
            "right" | "second-half" => Ok(Self::SecondHalf),
            other => Err(Error::parse(
                "heatmap group",
                format!("unknown group `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub letter: String,
    pub group: HeatmapGroup,
    pub grid: usize,
    pub n_instances: usize,
    /// Row-major, `grid * grid` values in [0, 1].
    pub values: Vec<f64>,
}

/// Centroid-aligned, mean-radius-scaled binary raster of one glyph on a
/// `grid` × `grid` window spanning ±[`HEATMAP_EXTENT`] mean radii.
pub fn normalized_raster(raster: &BinaryImage, grid: usize) -> Vec<bool> {
    let mut ink = Vec::new();
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if raster.get(x, y) {
                ink.push((x as f64, y as f64));
            }
        }
    }
    if ink.is_empty() {
        return vec![false; grid * grid];
    }
    let n = ink.len() as f64;
    let cx = ink.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = ink.iter().map(|p| p.1).sum::<f64>() / n;
    let r = ink.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    let r = if r > 0.0 { r } else { 1.0 };
    let mut out = vec![false; grid * grid];
    for v in 0..grid {
        let y = cy + ((v as f64 + 0.5) / grid as f64 * 2.0 - 1.0) * HEATMAP_EXTENT * r;
        for u in 0..grid {
            let x = cx + ((u as f64 + 0.5) / grid as f64 * 2.0 - 1.0) * HEATMAP_EXTENT * r;
            let (px, py) = (x.round(), y.round());
            out[v * grid + u] = px >= 0.0 && py >= 0.0 && raster.get_signed(px as i64, py as i64);
        }
    }
    out
}

fn mean_of(rasters: &[Vec<bool>], grid: usize) -> Vec<f64> {
    let mut sum = vec![0u64; grid * grid];
    for r in rasters {
        for (s, &b) in sum.iter_mut().zip(r) {
            *s += u64::from(b);
        }
    }
    sum.iter()
        .map(|&s| s as f64 / rasters.len() as f64)
        .collect()
}

/// Per-pixel mean of the normalized rasters of all instances.
pub fn heatmap(instances: &[GlyphInstance], grid: usize, group: HeatmapGroup) -> Result<Heatmap> {
    if instances.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if grid == 0 {
        return Err(Error::InvalidParameter("grid must be positive".into()));
    }
    let rasters: Vec<Vec<bool>> = instances
        .par_iter()
        .map(|g| normalized_raster(&g.raster, grid))
        .collect();
    let mut letters: Vec<&str> = instances.iter().map(|g| g.letter.as_str()).collect();
    letters.sort_unstable();
    letters.dedup();
    Ok(Heatmap {
        letter: letters.join("+"),
        group,
        grid,
        n_instances: instances.len(),
        values: mean_of(&rasters, grid),
    })
}

impl Heatmap {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.grid + u]
    }

    /// Header line `letter=.. group=.. n=.. grid=..`, then `grid` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "letter={} group={} n={} grid={}\n",
            self.letter,
            self.group.as_str(),
            self.n_instances,
            self.grid
        );
        for row in self.values.chunks(self.grid) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("heatmap", "empty file"))?;
        let mut fields = BTreeMap::new();
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::parse("heatmap", format!("bad header field `{kv}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse("heatmap", format!("missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse("heatmap", format!("bad `{k}`")))
        };
        let grid = num("grid")?;
        let values: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse("heatmap", format!("bad value `{v}`")))
            })
            .collect::<Result<_>>()?;
        if values.len() != grid * grid {
            return Err(Error::DimensionMismatch {
                expected: grid * grid,
                actual: values.len(),
            });
        }
        Ok(Self {
            letter: get("letter")?.to_string(),
            group: get("group")?.parse()?,
            grid,
            n_instances: num("n")?,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Grayscale SVG rendering, dark = frequent ink.
    pub fn to_svg(&self, cell: f64) -> String {
        let side = cell * self.grid as f64;
        let mut svg = Svg::new(side, side + 24.0);
        for v in 0..self.grid {
            for u in 0..self.grid {
                let g = (255.0 * (1.0 - self.get(u, v))).round() as u8;
                if g < 255 {
                    svg.rect(
                        u as f64 * cell,
                        v as f64 * cell,
                        cell,
                        cell,
                        &format!("rgb({g},{g},{g})"),
                    );
                }
            }
        }
        svg.text(
            side / 2.0,
            side + 16.0,
            12.0,
            "middle",
            &format!(
                "{} ({}, n={})",
                self.letter,
                self.group.as_str(),
                self.n_instances
            ),
        );
        svg.finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub band: (f64, f64),
    pub band_pixels: usize,
    pub draws: usize,
    /// Fraction of (band pixel, draw) pairs that flipped.
    pub flip_probability: f64,
    /// Largest per-pixel flip rate among band pixels.
    pub max_pixel_flip: f64,
}

/// Bootstrap stability of mid-intensity heatmap pixels. Instances are
/// resampled with replacement `draws` times; a band pixel flips in a draw
/// when its intensity moves by more than half the band width, enough to
/// carry a pixel from the band centre out of the band.
pub fn bootstrap_flip_probability(
    instances: &[GlyphInstance],
    grid: usize,
    band: (f64, f64),
    draws: usize,
    seed: u64,
) -> Result<FlipReport> {
    if instances.is_empty() || draws == 0 {
        return Err(Error::TooFewSamples {
            needed: 1,
            got: instances.len().min(draws),
        });
    }
    let rasters: Vec<Vec<bool>> = instances
        .par_iter()
        .map(|g| normalized_raster(&g.raster, grid))
        .collect();
    let orig = mean_of(&rasters, grid);
    let pixels: Vec<usize> = (0..orig.len())
        .filter(|&i| orig[i] >= band.0 && orig[i] <= band.1)
        .collect();
    let tol = (band.1 - band.0) / 2.0;
    let n = rasters.len();
    let mut flips = vec![0usize; pixels.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        let mut counts = vec![0u32; pixels.len()];
        for _ in 0..n {
            let r = &rasters[rng.random_range(0..n)];
            for (c, &p) in counts.iter_mut().zip(&pixels) {
                *c += u32::from(r[p]);
            }
        }
        for ((f, &c), &p) in flips.iter_mut().zip(&counts).zip(&pixels) {
            if (c as f64 / n as f64 - orig[p]).abs() > tol {
                *f += 1;
            }
        }
    }
    let total: usize = flips.iter().sum();
    let denom = (pixels.len() * draws).max(1) as f64;
    Ok(FlipReport {
        band,
        band_pixels: pixels.len(),
        draws,
        flip_probability: total as f64 / denom,
        max_pixel_flip: flips
            .iter()
            .map(|&f| f as f64 / draws as f64)
            .fold(0.0, f64::max),
    })
}

/// Glyph chart: one row per column (ascending), one cell per instance, each
/// cell tagged with its column, scan and bounding box.
pub fn render_chart(letter: &str, instances: &[GlyphInstance]) -> Result<String> {
    if instances.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut by_col: BTreeMap<u32, Vec<&GlyphInstance>> = BTreeMap::new();
    for g in instances {
        by_col.entry(g.source.column_index).or_default().push(g);
    }
    const CELL: f64 = 36.0;
    const LABEL: f64 = 56.0;
    let widest = by_col.values().map(Vec::len).max().unwrap_or(1);
    let mut svg = Svg::new(
        LABEL + CELL * widest as f64 + 8.0,
        28.0 + CELL * by_col.len() as f64,
    );
    svg.text(
        8.0,
        18.0,
        14.0,
        "start",
        &format!("{letter}: {} instances", instances.len()),
    );
    for (row, (col, glyphs)) in by_col.iter().enumerate() {
        let y0 = 28.0 + row as f64 * CELL;
        let _ = writeln!(&mut svg.body, r#"<g class="column" data-column="{col}">"#);
        svg.text(
            LABEL - 6.0,
            y0 + CELL / 2.0 + 4.0,
            11.0,
            "end",
            &format!("col {col}"),
        );
        for (k, g) in glyphs.iter().enumerate() {
            let x0 = LABEL + k as f64 * CELL;
            let b = g.bbox;
            let _ = writeln!(
                &mut svg.body,
                r#"<g class="glyph" data-column="{}" data-scan="{}" data-bbox="{},{},{},{}"><title>{} col {} bbox {},{},{},{}</title>"#,
                col,
                esc(&g.source.scan_id),
                b.x,
                b.y,
                b.w,
                b.h,
                esc(&g.letter),
                col,
                b.x,
                b.y,
                b.w,
                b.h
            );
            let scale = (CELL - 4.0) / g.raster.width().max(g.raster.height()) as f64;
            for y in 0..g.raster.height() {
                let mut x = 0;
                while x < g.raster.width() {
                    if !g.raster.get(x, y) {
                        x += 1;
                        continue;
                    }
                    let start = x;
                    while x < g.raster.width() && g.raster.get(x, y) {
                        x += 1;
                    }
                    svg.rect(
                        x0 + 2.0 + start as f64 * scale,
                        y0 + 2.0 + y as f64 * scale,
                        (x - start) as f64 * scale,
                        scale,
                        "black",
                    );
                }
            }
            svg.raw("</g>");
        }
        svg.raw("</g>");
    }
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_glyphs, render_glyph, GlyphStyle};

    fn style() -> GlyphStyle {
        GlyphStyle {
            slant_deg: 0.0,
            curvature: 0.1,
            stroke_width: 2.6,
            width_px: 22.0,
            height_px: 28.0,
        }
    }

    fn instance(img: &BinaryImage, column: u32) -> GlyphInstance {
        let comps = connected_components(img);
        let e = whole_contours(img).into_iter().next().unwrap();
        GlyphInstance {
            letter: "x".into(),
            source: Provenance {
                scan_id: format!("s{column}"),
                column_index: column,
            },
            bbox: e.bbox,
            contour: e.pixels,
            raster: comps[e.component].mask(),
            shape: e.fraglet,
            distance: 0.0,
        }
    }

    #[test]
    fn identical_component_matches_at_zero() {
        let g = &default_glyphs()[2];
        let img = render_glyph(g, &style());
        let t = GlyphTemplate::from_image(&g.letter, &img).unwrap();
        let found =
            recognize_glyphs(&img, &[t.clone()], DEFAULT_THETA, &Provenance::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].letter, g.letter);
        assert!(found[0].distance < 1e-12);
        assert!(recognize_glyphs(&img, &[t], 0.0, &Provenance::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn contour_distance_is_shift_invariant() {
        let g = &default_glyphs()[12];
        let img = render_glyph(g, &style());
        let a = whole_contours(&img)[0].fraglet.clone();
        let pts: Vec<(f64, f64)> = a.points().collect();
        let rotated: Vec<(f64, f64)> = (0..FRAGLET_POINTS)
            .map(|i| pts[(i + 37) % FRAGLET_POINTS])
            .collect();
        let b = Fraglet::normalize(&rotated).unwrap();
        assert!(contour_distance(&a, &b) < 1e-9);
        let other = whole_contours(&render_glyph(&default_glyphs()[3], &style()))[0]
            .fraglet
            .clone();
        assert!(contour_distance(&a, &other) > 0.1);
    }

    #[test]
    fn radius_bound_never_exceeds_distance() {
        let shapes: Vec<Shape> = default_glyphs()
            .iter()
            .map(|g| Shape::new(&whole_contours(&render_glyph(g, &style()))[0].fraglet))
            .collect();
        for a in &shapes {
            for b in &shapes {
                let exact = a.distance_bounded(b, f64::INFINITY);
                assert!(a.lower_bound(b) <= exact + 1e-12);
                assert_eq!(a.distance_bounded(b, exact * 1.001 + 1e-9), exact);
            }
        }
    }

    #[test]
    fn heatmap_of_copies_is_binary_and_shift_free() {
        let img = render_glyph(&default_glyphs()[0], &style());
        let one = instance(&img, 1);
        let copies = vec![one.clone(); 5];
        let h = heatmap(&copies, HEATMAP_GRID, HeatmapGroup::All).unwrap();
        assert!(h.values.iter().all(|&v| v == 0.0 || v == 1.0));
        let single = heatmap(&[one.clone()], HEATMAP_GRID, HeatmapGroup::All).unwrap();
        assert_eq!(h.values, single.values);
        let shifted = img.pad(7, 3, 0, 0);
        let pair = heatmap(
            &[one, instance(&shifted, 2)],
            HEATMAP_GRID,
            HeatmapGroup::All,
        )
        .unwrap();
        assert_eq!(pair.values, single.values);
        assert!(heatmap(&[], HEATMAP_GRID, HeatmapGroup::All).is_err());
    }

    #[test]
    fn heatmap_union_is_weighted_mean() {
        let gs = default_glyphs();
        let a: Vec<GlyphInstance> = gs[..3]
            .iter()
            .map(|g| instance(&render_glyph(g, &style()), 1))
            .collect();
        let b: Vec<GlyphInstance> = gs[3..8]
            .iter()
            .map(|g| instance(&render_glyph(g, &style()), 2))
            .collect();
        let ha = heatmap(&a, 32, HeatmapGroup::All).unwrap();
        let hb = heatmap(&b, 32, HeatmapGroup::All).unwrap();
        let all: Vec<GlyphInstance> = a.iter().chain(&b).cloned().collect();
        let h = heatmap(&all, 32, HeatmapGroup::All).unwrap();
        for i in 0..h.values.len() {
            let w = (3.0 * ha.values[i] + 5.0 * hb.values[i]) / 8.0;
            assert!((h.values[i] - w).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&h.values[i]));
        }
        let back = Heatmap::from_text(&h.to_text()).unwrap();
        assert_eq!(back.grid, 32);
        assert_eq!(back.n_instances, 8);
        assert!(back
            .values
            .iter()
            .zip(&h.values)
            .all(|(x, y)| (x - y).abs() < 1e-6));
    }

    #[test]
    fn chart_rows_follow_columns() {
        let img = render_glyph(&default_glyphs()[5], &style());
        let inst: Vec<GlyphInstance> = [9u32, 2, 9, 4].iter().map(|&c| instance(&img, c)).collect();
        let svg = render_chart("mem", &inst).unwrap();
        assert_eq!(svg.matches(r#"class="glyph""#).count(), 4);
        let cols: Vec<usize> = [2, 4, 9]
            .iter()
            .map(|c| {
                svg.find(&format!(r#"class="column" data-column="{c}""#))
                    .unwrap()
            })
            .collect();
        assert!(cols.windows(2).all(|w| w[0] < w[1]));
        let one = render_chart("mem", &inst[..1]).unwrap();
        assert_eq!(one.matches(r#"class="glyph""#).count(), 1);
    }

    #[test]
    fn group_parsing() {
        assert_eq!(
            "left".parse::<HeatmapGroup>().unwrap(),
            HeatmapGroup::FirstHalf
        );
        assert_eq!(
            "second-half".parse::<HeatmapGroup>().unwrap(),
            HeatmapGroup::SecondHalf
        );
        assert!("middle".parse::<HeatmapGroup>().is_err());
        assert!(HeatmapGroup::FirstHalf.contains(27, 27));
        assert!(!HeatmapGroup::FirstHalf.contains(28, 27));
    }
}
