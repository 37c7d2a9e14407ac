//! Synthetic column corpora with a known writer switch.
//!
//! Glyphs are stroke skeletons in a unit box (x right, y down). Each segment
//! is bowed sideways by `curvature` times its length, the whole glyph is
//! sheared by `slant`, and the result is drawn with a round brush of
//! diameter `stroke_width`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_manifest, ColumnRecord, SplitSide};
use crate::error::{Error, Result};
use crate::image::{BinaryImage, GrayImage};

/// Scales used by [`style_distance`].
pub const SLANT_SCALE_DEG: f64 = 45.0;
pub const CURVATURE_SCALE: f64 = 1.0;
pub const STROKE_WIDTH_SCALE_PX: f64 = 10.0;

const PAPER: u8 = 235;
const INK: u8 = 25;
const SEGMENT_STEPS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphDef {
    pub letter: String,
    /// Polylines in the unit box.
    pub strokes: Vec<Vec<(f64, f64)>>,
}

impl GlyphDef {
    fn new(letter: &str, strokes: &[&[(f64, f64)]]) -> Self {
        Self {
            letter: letter.to_string(),
            strokes: strokes.iter().map(|s| s.to_vec()).collect(),
        }
    }
}

/// A small square-script-like alphabet.
pub fn default_glyphs() -> Vec<GlyphDef> {
    vec![
        GlyphDef::new(
            "bet",
            &[
                &[(0.1, 0.1), (0.85, 0.1), (0.85, 0.88)],
                &[(0.0, 0.9), (1.0, 0.9)],
            ],
        ),
        GlyphDef::new(
            "he",
            &[
                &[(0.05, 0.1), (0.9, 0.1), (0.9, 0.95)],
                &[(0.18, 0.45), (0.18, 0.95)],
            ],
        ),
        GlyphDef::new("nun", &[&[(0.3, 0.1), (0.6, 0.1), (0.6, 0.9), (0.1, 0.9)]]),
        GlyphDef::new("waw", &[&[(0.3, 0.1), (0.55, 0.15), (0.55, 0.95)]]),
        GlyphDef::new(
            "resh",
            &[&[(0.05, 0.12), (0.7, 0.08), (0.85, 0.25), (0.85, 0.95)]],
        ),
        GlyphDef::new(
            "mem",
            &[&[
                (0.45, 0.4),
                (0.5, 0.1),
                (0.9, 0.1),
                (0.9, 0.9),
                (0.1, 0.9),
                (0.1, 0.1),
            ]],
        ),
        GlyphDef::new(
            "shin",
            &[
                &[(0.1, 0.1), (0.3, 0.9), (0.9, 0.9), (0.9, 0.1)],
                &[(0.5, 0.15), (0.55, 0.6)],
            ],
        ),
        GlyphDef::new(
            "aleph",
            &[
                &[(0.1, 0.1), (0.9, 0.9)],
                &[(0.78, 0.1), (0.7, 0.45)],
                &[(0.3, 0.55), (0.2, 0.92)],
            ],
        ),
        GlyphDef::new(
            "lamed",
            &[&[
                (0.15, 0.0),
                (0.15, 0.35),
                (0.85, 0.35),
                (0.85, 0.7),
                (0.45, 0.95),
            ]],
        ),
        GlyphDef::new(
            "dalet",
            &[&[(0.0, 0.1), (0.95, 0.1)], &[(0.75, 0.1), (0.75, 0.95)]],
        ),
        GlyphDef::new("yod", &[&[(0.35, 0.1), (0.65, 0.1), (0.55, 0.42)]]),
        GlyphDef::new(
            "tav",
            &[
                &[(0.1, 0.1), (0.9, 0.1), (0.9, 0.95)],
                &[(0.3, 0.1), (0.3, 0.88), (0.08, 0.95)],
            ],
        ),
        GlyphDef::new(
            "kaf",
            &[&[(0.1, 0.1), (0.85, 0.1), (0.9, 0.5), (0.85, 0.9), (0.1, 0.9)]],
        ),
        GlyphDef::new(
            "samekh",
            &[&[
                (0.1, 0.1),
                (0.9, 0.1),
                (0.9, 0.6),
                (0.5, 0.92),
                (0.1, 0.6),
                (0.1, 0.1),
            ]],
        ),
    ]
}

/// Standard deviations of random perturbations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Jitter {
    pub slant_deg: f64,
    pub curvature: f64,
    pub stroke_width: f64,
    /// Glyph offset inside its cell, pixels.
    pub position_px: f64,
    /// Relative glyph size.
    pub scale: f64,
}

impl Jitter {
    fn validate(&self) -> Result<()> {
        let all = [
            self.slant_deg,
            self.curvature,
            self.stroke_width,
            self.position_px,
            self.scale,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("jitter scales must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleParams {
    pub slant_deg: f64,
    pub curvature: f64,
    pub stroke_width: f64,
    #[serde(skip_serializing_if = "is_default_glyphs")]
    pub glyph_set: Vec<GlyphDef>,
    /// Drawn independently for every glyph.
    pub jitter: Jitter,
    /// Drawn once per column and shared by all of its glyphs.
    pub column_jitter: Jitter,
}

fn is_default_glyphs(g: &[GlyphDef]) -> bool {
    g == default_glyphs().as_slice()
}

impl Default for StyleParams {
    fn default() -> Self {
        Self {
            slant_deg: 0.0,
            curvature: 0.1,
            stroke_width: 2.6,
            glyph_set: default_glyphs(),
            jitter: Jitter {
                slant_deg: 1.5,
                curvature: 0.03,
                stroke_width: 0.15,
                position_px: 1.0,
                scale: 0.04,
            },
            column_jitter: Jitter {
                slant_deg: 1.0,
                curvature: 0.012,
                stroke_width: 1.0,
                position_px: 0.0,
                scale: 0.15,
            },
        }
    }
}

impl StyleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stroke_width >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stroke_width must be >= 1, got {}",
                self.stroke_width
            )));
        }
        if self.glyph_set.is_empty() {
            return Err(Error::InvalidParameter("glyph_set is empty".into()));
        }
        self.jitter.validate()?;
        self.column_jitter.validate()
    }
}

/// Normalized Euclidean distance over slant, curvature and stroke width.
pub fn style_distance(a: &StyleParams, b: &StyleParams) -> f64 {
    let ds = (a.slant_deg - b.slant_deg) / SLANT_SCALE_DEG;
    let dc = (a.curvature - b.curvature) / CURVATURE_SCALE;
    let dw = (a.stroke_width - b.stroke_width) / STROKE_WIDTH_SCALE_PX;
    (ds * ds + dc * dc + dw * dw).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusSpec {
    pub n_columns: u32,
    /// Last column written in the left style.
    pub switch_column: Option<u32>,
    pub style_left: StyleParams,
    pub style_right: StyleParams,
    pub lines_per_column: usize,
    pub glyphs_per_line: usize,
    pub seed: u64,
    pub glyph_width_px: f64,
    pub glyph_height_px: f64,
    pub glyph_gap_px: usize,
    pub line_gap_px: usize,
    pub margin_px: usize,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        preset("paper-like", 0).expect("built-in preset")
    }
}

pub const PRESETS: [&str; 3] = ["paper-like", "null", "hard"];

/// Named corpus specs: `paper-like` (54 columns, switch after 27, subtle
/// gap), `null` (one style, no switch) and `hard` (same layout, wide gap).
pub fn preset(name: &str, seed: u64) -> Result<SynthCorpusSpec> {
    let left = StyleParams::default();
    let subtle_right = StyleParams {
        slant_deg: 4.0,
        curvature: 0.18,
        ..StyleParams::default()
    };
    let base = SynthCorpusSpec {
        n_columns: 54,
        switch_column: Some(27),
        style_left: left.clone(),
        style_right: subtle_right,
        lines_per_column: 40,
        glyphs_per_line: 30,
        seed,
        glyph_width_px: 22.0,
        glyph_height_px: 28.0,
        glyph_gap_px: 8,
        line_gap_px: 14,
        margin_px: 16,
    };
    match name {
        "paper-like" => Ok(base),
        "null" => Ok(SynthCorpusSpec {
            switch_column: None,
            style_right: left,
            ..base
        }),
        "hard" => Ok(SynthCorpusSpec {
            style_right: StyleParams {
                slant_deg: 12.0,
                curvature: 0.35,
                stroke_width: 3.4,
                ..StyleParams::default()
            },
            ..base
        }),
        other => Err(Error::InvalidParameter(format!(
            "unknown preset `{other}`, expected one of {}",
            PRESETS.join(", ")
        ))),
    }
}

impl SynthCorpusSpec {
    pub fn validate(&self) -> Result<Vec<String>> {
        self.style_left.validate()?;
        self.style_right.validate()?;
        if self.n_columns == 0 || self.lines_per_column == 0 || self.glyphs_per_line == 0 {
            return Err(Error::InvalidParameter(
                "corpus layout sizes must be positive".into(),
            ));
        }
        if !(self.glyph_width_px >= 4.0 && self.glyph_height_px >= 4.0) {
            return Err(Error::InvalidParameter(
                "glyph cells must be at least 4 px".into(),
            ));
        }
        let mut warnings = Vec::new();
        if let Some(s) = self.switch_column {
            if s < 1 || s >= self.n_columns {
                return Err(Error::InvalidParameter(format!(
                    "switch_column must be in [1, {}), got {s}",
                    self.n_columns
                )));
            }
            if self.style_left == self.style_right {
                warnings.push("null transition".to_string());
            }
        }
        Ok(warnings)
    }

    pub fn style_for(&self, column: u32) -> &StyleParams {
        match self.switch_column {
            Some(s) if column > s => &self.style_right,
            _ => &self.style_left,
        }
    }

    pub fn image_size(&self) -> (usize, usize) {
        let cw = self.glyph_width_px.ceil() as usize;
        let ch = self.glyph_height_px.ceil() as usize;
        let w = 2 * self.margin_px
            + self.glyphs_per_line * cw
            + (self.glyphs_per_line - 1) * self.glyph_gap_px;
        let h = 2 * self.margin_px
            + self.lines_per_column * ch
            + (self.lines_per_column - 1) * self.line_gap_px;
        (w, h)
    }
}

/// Concrete drawing parameters of one glyph instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphStyle {
    pub slant_deg: f64,
    pub curvature: f64,
    pub stroke_width: f64,
    pub width_px: f64,
    pub height_px: f64,
}

/// Stroke polylines of a glyph in pixel units relative to its cell origin,
/// after bending and shearing.
pub fn glyph_outline(def: &GlyphDef, s: &GlyphStyle) -> Vec<Vec<(f64, f64)>> {
    let shear = s.slant_deg.to_radians().tan();
    def.strokes
        .iter()
        .map(|stroke| {
            let pts: Vec<(f64, f64)> = stroke
                .iter()
                .map(|&(x, y)| (x * s.width_px, y * s.height_px))
                .collect();
            let mut out = vec![pts[0]];
            for w in pts.windows(2) {
                let (p, q) = (w[0], w[1]);
                let (vx, vy) = (q.0 - p.0, q.1 - p.1);
                let len = vx.hypot(vy);
                let (nx, ny) = if len > 0.0 {
                    (-vy / len, vx / len)
                } else {
                    (0.0, 0.0)
                };
                for k in 1..=SEGMENT_STEPS {
                    let t = k as f64 / SEGMENT_STEPS as f64;
                    let bow = s.curvature * len * (std::f64::consts::PI * t).sin();
                    out.push((p.0 + t * vx + bow * nx, p.1 + t * vy + bow * ny));
                }
            }
            out.into_iter()
                .map(|(x, y)| (x + (s.height_px - y) * shear, y))
                .collect()
        })
        .collect()
}

fn seg_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let l2 = vx * vx + vy * vy;
    let t = if l2 > 0.0 {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (p.0 - a.0 - t * vx, p.1 - a.1 - t * vy);
    dx * dx + dy * dy
}

/// Draws polylines (already in image coordinates) with a round brush.
/// Returns the inked bounding box `(x, y, w, h)` if anything was drawn.
pub fn draw_strokes(
    img: &mut BinaryImage,
    strokes: &[Vec<(f64, f64)>],
    width: f64,
) -> Option<(usize, usize, usize, usize)> {
    let r = width / 2.0;
    let r2 = r * r;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for stroke in strokes {
        for seg in stroke.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let lx = (a.0.min(b.0) - r).floor().max(0.0) as usize;
            let ly = (a.1.min(b.1) - r).floor().max(0.0) as usize;
            let hx =
                ((a.0.max(b.0) + r).ceil().max(0.0) as usize).min(img.width().saturating_sub(1));
            let hy =
                ((a.1.max(b.1) + r).ceil().max(0.0) as usize).min(img.height().saturating_sub(1));
            for y in ly..=hy {
                for x in lx..=hx {
                    if seg_dist2((x as f64, y as f64), a, b) <= r2 {
                        img.set(x, y, true);
                        x0 = x0.min(x);
                        y0 = y0.min(y);
                        x1 = x1.max(x);
                        y1 = y1.max(y);
                    }
                }
            }
        }
    }
    (x0 != usize::MAX).then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// One glyph drawn alone on a tight canvas with a small border.
pub fn render_glyph(def: &GlyphDef, s: &GlyphStyle) -> BinaryImage {
    let outline = glyph_outline(def, s);
    let pad = s.stroke_width + 3.0;
    let (mut mx, mut my) = (f64::INFINITY, f64::INFINITY);
    let (mut ax, mut ay) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in outline.iter().flatten() {
        mx = mx.min(x);
        my = my.min(y);
        ax = ax.max(x);
        ay = ay.max(y);
    }
    let w = (ax - mx + 2.0 * pad).ceil() as usize;
    let h = (ay - my + 2.0 * pad).ceil() as usize;
    let shifted: Vec<Vec<(f64, f64)>> = outline
        .iter()
        .map(|s| {
            s.iter()
                .map(|&(x, y)| (x - mx + pad, y - my + pad))
                .collect()
        })
        .collect();
    let mut img = BinaryImage::blank(w.max(1), h.max(1)).expect("non-empty canvas");
    draw_strokes(&mut img, &shifted, s.stroke_width);
    img
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphBox {
    pub column: u32,
    pub letter: String,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub switch_column: Option<u32>,
    pub glyphs: Vec<GlyphBox>,
}

impl GroundTruth {
    /// `switch_column=<n|none>` line, then `column,letter,x,y,w,h` rows.
    pub fn to_text(&self) -> String {
        let mut out = match self.switch_column {
            Some(s) => format!("switch_column={s}\n"),
            None => "switch_column=none\n".to_string(),
        };
        out.push_str("column,letter,x,y,w,h\n");
        for g in &self.glyphs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                g.column, g.letter, g.x, g.y, g.w, g.h
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let first = lines
            .next()
            .ok_or_else(|| Error::parse("ground truth", "empty file"))?;
        let value = first
            .strip_prefix("switch_column=")
            .ok_or_else(|| Error::parse("ground truth", "first line must be switch_column=..."))?;
        let switch_column = match value {
            "none" => None,
            v => Some(
                v.parse()
                    .map_err(|_| Error::parse("ground truth", format!("bad switch `{v}`")))?,
            ),
        };
        let mut glyphs = Vec::new();
        for line in lines.filter(|l| *l != "column,letter,x,y,w,h") {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse("ground truth", format!("bad row `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse("ground truth", format!("bad number `{s}`")))
            };
            glyphs.push(GlyphBox {
                column: num(f[0])? as u32,
                letter: f[1].to_string(),
                x: num(f[2])?,
                y: num(f[3])?,
                w: num(f[4])?,
                h: num(f[5])?,
            });
        }
        Ok(Self {
            switch_column,
            glyphs,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SynthColumn {
    pub column_index: u32,
    pub ink: BinaryImage,
    pub glyphs: Vec<GlyphBox>,
}

impl SynthColumn {
    /// Dark ink on light paper.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.ink.width(), self.ink.height(), |x, y| {
            if self.ink.get(x, y) {
                INK
            } else {
                PAPER
            }
        })
        .expect("non-empty column")
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("positive sd").sample(rng)
    } else {
        0.0
    }
}

/// Renders one column; depends only on the spec and the column index.
pub fn render_column(spec: &SynthCorpusSpec, column: u32) -> SynthColumn {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(column as u64);
    let style = spec.style_for(column);
    let cj = &style.column_jitter;
    let col_slant = style.slant_deg + normal(&mut rng, cj.slant_deg);
    let col_curv = style.curvature + normal(&mut rng, cj.curvature);
    let col_width = style.stroke_width + normal(&mut rng, cj.stroke_width);
    let col_scale = 1.0 + normal(&mut rng, cj.scale);

    let (w, h) = spec.image_size();
    let mut ink = BinaryImage::blank(w, h).expect("non-empty column");
    let mut glyphs = Vec::new();
    let cw = spec.glyph_width_px.ceil() as usize;
    let ch = spec.glyph_height_px.ceil() as usize;
    let j = &style.jitter;
    for line in 0..spec.lines_per_column {
        for slot in 0..spec.glyphs_per_line {
            let def = &style.glyph_set[rng.random_range(0..style.glyph_set.len())];
            let scale = (col_scale + normal(&mut rng, j.scale)).max(0.5);
            let gs = GlyphStyle {
                slant_deg: col_slant + normal(&mut rng, j.slant_deg),
                curvature: col_curv + normal(&mut rng, j.curvature),
                stroke_width: (col_width + normal(&mut rng, j.stroke_width)).max(1.0),
                width_px: spec.glyph_width_px * scale,
                height_px: spec.glyph_height_px * scale,
            };
            let ox = (spec.margin_px + slot * (cw + spec.glyph_gap_px)) as f64
                + normal(&mut rng, j.position_px);
            let oy = (spec.margin_px + line * (ch + spec.line_gap_px)) as f64
                + normal(&mut rng, j.position_px)
                + spec.glyph_height_px * (1.0 - scale);
            let strokes: Vec<Vec<(f64, f64)>> = glyph_outline(def, &gs)
                .into_iter()
                .map(|s| s.into_iter().map(|(x, y)| (x + ox, y + oy)).collect())
                .collect();
            if let Some((x, y, bw, bh)) = draw_strokes(&mut ink, &strokes, gs.stroke_width) {
                glyphs.push(GlyphBox {
                    column,
                    letter: def.letter.clone(),
                    x,
                    y,
                    w: bw,
                    h: bh,
                });
            }
        }
    }
    SynthColumn {
        column_index: column,
        ink,
        glyphs,
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub columns: Vec<SynthColumn>,
    pub ground_truth: GroundTruth,
    pub warnings: Vec<String>,
}

pub fn generate_corpus(spec: &SynthCorpusSpec) -> Result<SynthCorpus> {
    let warnings = spec.validate()?;
    let columns: Vec<SynthColumn> = (1..=spec.n_columns)
        .into_par_iter()
        .map(|c| render_column(spec, c))
        .collect();
    let ground_truth = GroundTruth {
        switch_column: spec.switch_column,
        glyphs: columns
            .iter()
            .flat_map(|c| c.glyphs.iter().cloned())
            .collect(),
    };
    Ok(SynthCorpus {
        columns,
        ground_truth,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusFiles {
    pub manifest: PathBuf,
    pub ground_truth: PathBuf,
    pub images: Vec<PathBuf>,
    /// One `<letter>.png` per glyph, drawn in the left style.
    pub templates: PathBuf,
    pub warnings: Vec<String>,
}

/// Every glyph of `style` drawn once at its base parameters, saved as
/// `<letter>.png` masks.
pub fn write_templates(
    style: &StyleParams,
    width_px: f64,
    height_px: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let gs = GlyphStyle {
        slant_deg: style.slant_deg,
        curvature: style.curvature,
        stroke_width: style.stroke_width,
        width_px,
        height_px,
    };
    style
        .glyph_set
        .iter()
        .map(|def| {
            let path = dir.join(format!("{}.png", def.letter));
            render_glyph(def, &gs).save_mask(&path).map(|_| path)
        })
        .collect()
}

/// Writes `col_NN.png`, `manifest.csv`, `ground_truth.csv` and a
/// `templates/` directory into `dir`.
pub fn write_corpus(spec: &SynthCorpusSpec, dir: &Path) -> Result<CorpusFiles> {
    let corpus = generate_corpus(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let images: Vec<PathBuf> = corpus
        .columns
        .par_iter()
        .map(|c| {
            let path = dir.join(format!("col_{:02}.png", c.column_index));
            c.to_gray().save_png(&path).map(|_| path)
        })
        .collect::<Result<_>>()?;
    let records: Vec<ColumnRecord> = corpus
        .columns
        .iter()
        .zip(&images)
        .map(|(c, p)| ColumnRecord {
            scan_id: format!("synth-{:02}", c.column_index),
            column_index: c.column_index,
            split_side: SplitSide::Whole,
            image_path: p.clone(),
        })
        .collect();
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &records)?;
    let ground_truth = dir.join("ground_truth.csv");
    std::fs::write(&ground_truth, corpus.ground_truth.to_text())
        .map_err(|e| Error::io(&ground_truth, e))?;
    let templates = dir.join("templates");
    write_templates(
        &spec.style_left,
        spec.glyph_width_px,
        spec.glyph_height_px,
        &templates,
    )?;
    Ok(CorpusFiles {
        manifest,
        ground_truth,
        images,
        templates,
        warnings: corpus.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str, seed: u64) -> SynthCorpusSpec {
        SynthCorpusSpec {
            n_columns: 6,
            switch_column: preset(name, seed).unwrap().switch_column.map(|_| 3),
            lines_per_column: 3,
            glyphs_per_line: 5,
            ..preset(name, seed).unwrap()
        }
    }

    #[test]
    fn style_distance_axioms() {
        let a = StyleParams::default();
        assert_eq!(style_distance(&a, &a), 0.0);
        let mut prev = 0.0;
        for gap in [1.0, 5.0, 10.0] {
            let b = StyleParams {
                slant_deg: gap,
                ..a.clone()
            };
            let d = style_distance(&a, &b);
            assert!(d > prev);
            assert_eq!(d, style_distance(&b, &a));
            prev = d;
        }
        let p = preset("paper-like", 0).unwrap();
        let d = style_distance(&p.style_left, &p.style_right);
        assert!(d > 0.05 && d <= 0.15, "subtle gap {d}");
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = small("paper-like", 4);
        let a = generate_corpus(&spec).unwrap();
        let b = generate_corpus(&spec).unwrap();
        for (x, y) in a.columns.iter().zip(&b.columns) {
            assert_eq!(x.ink, y.ink);
        }
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = generate_corpus(&small("paper-like", 5)).unwrap();
        assert_ne!(a.columns[0].ink, c.columns[0].ink);
    }

    #[test]
    fn switch_and_warnings() {
        let null = small("null", 1);
        assert_eq!(null.switch_column, None);
        assert!(null.validate().unwrap().is_empty());
        let mut same = small("null", 1);
        same.switch_column = Some(2);
        assert_eq!(
            same.validate().unwrap(),
            vec!["null transition".to_string()]
        );
        same.switch_column = Some(6);
        assert!(same.validate().is_err());
        let spec = small("hard", 1);
        assert_eq!(spec.style_for(3).slant_deg, spec.style_left.slant_deg);
        assert_eq!(spec.style_for(4).slant_deg, spec.style_right.slant_deg);
    }

    #[test]
    fn ground_truth_boxes_hold_ink() {
        let spec = small("paper-like", 2);
        let corpus = generate_corpus(&spec).unwrap();
        assert_eq!(corpus.ground_truth.glyphs.len(), 6 * 3 * 5);
        for col in &corpus.columns {
            for g in &col.glyphs {
                let crop = col.ink.crop(g.x, g.y, g.w, g.h).unwrap();
                assert!(crop.ink_count() > 10);
            }
        }
        let text = corpus.ground_truth.to_text();
        assert!(text.starts_with("switch_column=3\ncolumn,letter,x,y,w,h\n"));
        assert_eq!(GroundTruth::from_text(&text).unwrap(), corpus.ground_truth);
    }

    #[test]
    fn writes_loadable_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_corpus(&small("null", 3), dir.path()).unwrap();
        let records = crate::corpus::load_manifest(&files.manifest).unwrap();
        assert_eq!(records.len(), 6);
        let img = crate::corpus::resolve_image(&records[0]).unwrap();
        let (w, h) = small("null", 3).image_size();
        assert_eq!((img.width(), img.height()), (w, h));
    }

    #[test]
    fn rejects_bad_styles() {
        let mut s = StyleParams::default();
        s.stroke_width = 0.5;
        assert!(s.validate().is_err());
        let mut s = StyleParams::default();
        s.jitter.scale = -1.0;
        assert!(s.validate().is_err());
        assert!(preset("nope", 0).is_err());
    }

    fn hinge_of(img: &BinaryImage) -> crate::feature::FeatureVector {
        crate::hinge::hinge_feature(img, &crate::hinge::HingeConfig::default()).unwrap()
    }

    #[test]
    fn zero_jitter_columns_are_identical() {
        // letter choice is text content, so a one-letter set isolates jitter
        let mut style = StyleParams {
            jitter: Jitter::default(),
            column_jitter: Jitter::default(),
            ..StyleParams::default()
        };
        style.glyph_set.truncate(1);
        let spec = SynthCorpusSpec {
            n_columns: 4,
            switch_column: None,
            style_left: style.clone(),
            style_right: style,
            lines_per_column: 4,
            glyphs_per_line: 6,
            ..preset("null", 9).unwrap()
        };
        let corpus = generate_corpus(&spec).unwrap();
        let h: Vec<_> = corpus.columns.iter().map(|c| hinge_of(&c.ink)).collect();
        for i in 0..h.len() {
            for j in 0..i {
                assert!(crate::space::chi_square_distance(&h[i], &h[j]).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn between_group_distance_grows_with_gap() {
        let mut means = Vec::new();
        for k in 0..5 {
            let mut total = 0.0;
            for seed in 0..5 {
                let base = preset("paper-like", seed).unwrap();
                let spec = SynthCorpusSpec {
                    n_columns: 6,
                    switch_column: Some(3),
                    style_right: StyleParams {
                        slant_deg: 3.0 * k as f64,
                        curvature: 0.1 + 0.06 * k as f64,
                        ..StyleParams::default()
                    },
                    lines_per_column: 6,
                    glyphs_per_line: 10,
                    ..base
                };
                let gap = style_distance(&spec.style_left, &spec.style_right);
                assert!(k == 0 || gap > 0.0);
                let corpus = generate_corpus(&spec).unwrap();
                let h: Vec<_> = corpus.columns.iter().map(|c| hinge_of(&c.ink)).collect();
                let mut sum = 0.0;
                for i in 0..3 {
                    for j in 3..6 {
                        sum += crate::space::chi_square_distance(&h[i], &h[j]).unwrap();
                    }
                }
                total += sum / 9.0;
            }
            means.push(total / 5.0);
        }
        for w in means.windows(2) {
            assert!(w[1] > w[0], "{means:?}");
        }
    }
}
