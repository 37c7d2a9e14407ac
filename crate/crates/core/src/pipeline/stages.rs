use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Ctx, Recorder, Stage};
use crate::codebook::{train_sofm, Codebook, SofmParams};
use crate::corpus::{
    load_manifest, validate_series, write_manifest, ColumnRecord, SampleLabel, SplitSide,
};
use crate::error::{Error, Result};
use crate::feature::FeatureVector;
use crate::fraglet::{
    adjoin, extract_fraglets, fraglet_cos_histogram, fraglet_histogram, to_cosine, Fraglet,
};
use crate::hinge::hinge_feature;
use crate::image::{BinaryImage, GrayImage};
use crate::preproc::{
    binarize_otsu, binarize_sauvola, clean_margins, deskew, split_column, Binarizer,
};
use crate::space::{distance_matrix, pca_embed, sibling_check, DistanceMatrix};
use crate::stats::{
    fit_logistic_ls, fit_logistic_mc, lr_vote_curve, nn_distance_groups, nn_position_series,
    one_way_anova_summary, smooth, FitMethod, FitReport, GroupSummary, Smoothing, StatReport,
    NO_TRANSITION,
};
use crate::visual::{
    bootstrap_flip_probability, heatmap, predict_group, rank_discriminative_fraglets,
    recognize_glyphs, render_chart, render_overlay, render_overlay_sheet, render_scatter,
    render_series, FlipReport, GlyphInstance, GlyphTemplate, GroupLabel, HeatmapGroup, Provenance,
    SheetColumn, MID_BAND,
};

const MASKS: &str = "masks.csv";

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

pub(crate) fn ingest(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let manifest = &ctx.cfg.paths.manifest;
    let records = load_manifest(manifest)?;
    rec.input(manifest.clone());
    for r in &records {
        rec.input(r.image_path.clone());
    }
    let layout = validate_series(&records);
    let out = ctx.dir(Stage::Ingest).join("manifest.csv");
    write_manifest(&out, &records)?;
    rec.wrote(out);
    Ok(json!({
        "records": records.len(),
        "split_samples": records.iter().any(|r| r.split_side != SplitSide::Whole),
        "layout": layout,
    }))
}

/// Binarization, margin cleaning and deskew for one image.
fn prepare(ctx: &Ctx, r: &ColumnRecord) -> Result<(BinaryImage, f64)> {
    let p = &ctx.cfg.preproc;
    let mask = match &p.binarizer {
        Binarizer::Otsu => binarize_otsu(&GrayImage::load(&r.image_path)?),
        Binarizer::Sauvola { window, k } => {
            binarize_sauvola(&GrayImage::load(&r.image_path)?, *window, *k)
        }
        Binarizer::External { dir } => {
            BinaryImage::load_mask(&dir.join(format!("{}.mask.png", r.scan_id)))
        }
    }?;
    let mask = if p.left_margin > 0.0 || p.right_margin > 0.0 {
        clean_margins(&mask, p.left_margin, p.right_margin)?
    } else {
        mask
    };
    if p.deskew {
        deskew(&mask, p.max_deskew_deg)
    } else {
        Ok((mask, 0.0))
    }
}

pub(crate) fn preproc(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let input = ctx.dir(Stage::Ingest).join("manifest.csv");
    let records = load_manifest(&input)?;
    rec.input(input);
    let dir = ctx.dir(Stage::Preproc);
    if let Binarizer::External { dir: ext } = &ctx.cfg.preproc.binarizer {
        for r in &records {
            rec.input(ext.join(format!("{}.mask.png", r.scan_id)));
        }
    }
    let results: Vec<(Vec<ColumnRecord>, Value)> = records
        .par_iter()
        .map(|r| -> Result<_> {
            let (mask, angle) = prepare(ctx, r).map_err(|e| e.at(&r.image_path))?;
            let mut parts = vec![(r.split_side, mask.clone())];
            if r.split_side == SplitSide::Whole {
                let pair = split_column(&mask, ctx.cfg.preproc.split_axis)
                    .map_err(|e| e.at(&r.image_path))?;
                parts.push((SplitSide::A, pair.half_a));
                parts.push((SplitSide::B, pair.half_b));
            }
            let mut out = Vec::new();
            for (side, img) in parts {
                let path = dir.join(format!("{}_{side}.mask.png", r.scan_id));
                img.save_mask(&path)?;
                out.push(ColumnRecord {
                    scan_id: r.scan_id.clone(),
                    column_index: r.column_index,
                    split_side: side,
                    image_path: path,
                });
            }
            let info = json!({
                "scan_id": r.scan_id, "column_index": r.column_index, "split_side": r.split_side,
                "deskew_deg": angle, "ink": mask.ink_count(),
            });
            Ok((out, info))
        })
        .collect::<Result<_>>()?;
    let mut masks = Vec::new();
    let mut info = Vec::new();
    for (m, i) in results {
        masks.extend(m);
        info.push(i);
    }
    masks.sort_by_key(|r| r.label());
    for m in &masks {
        rec.wrote(m.image_path.clone());
    }
    let list = dir.join(MASKS);
    write_manifest(&list, &masks)?;
    rec.wrote(list);
    Ok(json!({ "binarizer": ctx.cfg.preproc.binarizer, "images": info }))
}

/// Preprocessed masks: whole columns and split halves.
pub fn sample_masks(work: &Path) -> Result<Vec<ColumnRecord>> {
    let list = work.join(Stage::Preproc.as_str()).join(MASKS);
    load_manifest(&list).map_err(|e| e.at(list))
}

/// Whole-column masks, or every mask when the series has only split halves.
pub fn whole_or_all(masks: &[ColumnRecord]) -> Vec<ColumnRecord> {
    let whole: Vec<ColumnRecord> = masks
        .iter()
        .filter(|r| r.split_side == SplitSide::Whole)
        .cloned()
        .collect();
    if whole.is_empty() {
        masks.to_vec()
    } else {
        whole
    }
}

fn split_or_all(masks: &[ColumnRecord]) -> Vec<ColumnRecord> {
    let split: Vec<ColumnRecord> = masks
        .iter()
        .filter(|r| r.split_side != SplitSide::Whole)
        .cloned()
        .collect();
    if split.is_empty() {
        masks.to_vec()
    } else {
        split
    }
}

fn load_masks(records: &[ColumnRecord], rec: &mut Recorder) -> Result<Vec<BinaryImage>> {
    for r in records {
        rec.input(r.image_path.clone());
    }
    records
        .par_iter()
        .map(|r| BinaryImage::load_mask(&r.image_path).map_err(|e| e.at(&r.image_path)))
        .collect()
}

fn train(samples: &[impl AsRef<[f64]> + Sync], spec: &super::CodebookSpec) -> Result<Codebook> {
    train_sofm(
        samples,
        &SofmParams::new(spec.rows, spec.cols, spec.seed).with_epochs(spec.epochs),
    )
}

pub(crate) fn codebook(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let cfg = ctx.cfg;
    let plates: Vec<(String, BinaryImage)> = match &cfg.paths.plates {
        Some(manifest) => {
            let records = load_manifest(manifest)?;
            rec.input(manifest.clone());
            for r in &records {
                rec.input(r.image_path.clone());
            }
            records
                .par_iter()
                .map(|r| {
                    Ok((
                        r.scan_id.clone(),
                        prepare(ctx, r).map_err(|e| e.at(&r.image_path))?.0,
                    ))
                })
                .collect::<Result<_>>()?
        }
        None => {
            let records = whole_or_all(&sample_masks(&ctx.work)?);
            let imgs = load_masks(&records, rec)?;
            records
                .into_iter()
                .map(|r| format!("{}_{}", r.scan_id, r.split_side))
                .zip(imgs)
                .collect()
        }
    };
    let min_ink = cfg.fraglet.min_ink_pixels;
    let (admitted, rejected): (Vec<_>, Vec<_>) = plates
        .iter()
        .partition(|(_, img)| img.ink_count() >= min_ink);
    if admitted.is_empty() {
        return Err(Error::Config(format!(
            "no training plate has at least {min_ink} ink pixels"
        )));
    }
    let samples: Vec<Fraglet> = admitted
        .par_iter()
        .flat_map_iter(|(_, img)| extract_fraglets(img, &cfg.fraglet.fragments))
        .collect();
    let dir = ctx.dir(Stage::Codebook);
    let mut maps = serde_json::Map::new();
    let mut jobs: Vec<(&str, super::CodebookSpec, bool)> = vec![
        ("primary", cfg.codebook.primary, false),
        ("secondary", cfg.codebook.secondary, false),
    ];
    if cfg.codebook.cosine {
        jobs.push(("primary_cos", cfg.codebook.primary, true));
    }
    for (name, spec, cosine) in jobs {
        let cb = if cosine {
            let cos: Vec<Vec<f64>> = samples
                .iter()
                .map(|f| to_cosine(f).values().to_vec())
                .collect();
            train(&cos, &spec)?
        } else {
            train(&samples, &spec)?
        };
        let path = dir.join(format!("{name}.txt"));
        rec.write(path, cb.to_text())?;
        maps.insert(
            name.to_string(),
            json!({
                "rows": spec.rows, "cols": spec.cols, "epochs": spec.epochs, "seed": spec.seed,
                "final_quantization_error": cb.meta.quantization_error.last(),
                "warnings": cb.meta.warnings,
            }),
        );
    }
    Ok(json!({
        "plates_admitted": admitted.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "plates_rejected": rejected.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "min_ink_pixels": min_ink,
        "fraglets": samples.len(),
        "maps": maps,
    }))
}

fn load_codebook(ctx: &Ctx, name: &str, rec: &mut Recorder) -> Result<Codebook> {
    let path = ctx.dir(Stage::Codebook).join(format!("{name}.txt"));
    rec.input(path.clone());
    Codebook::load(&path).map_err(|e| e.at(path))
}

fn feature_path(ctx: &Ctx, dir: &str, label: SampleLabel) -> PathBuf {
    ctx.dir(Stage::Features)
        .join(dir)
        .join(format!("{label}.txt"))
}

fn labels_path(ctx: &Ctx, set: &str) -> PathBuf {
    ctx.dir(Stage::Features).join(format!("{set}_labels.txt"))
}

pub(crate) fn features(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let cfg = ctx.cfg;
    let masks = sample_masks(&ctx.work)?;
    let primary_cb = load_codebook(ctx, "primary", rec)?;
    let secondary_cb = load_codebook(ctx, "secondary", rec)?;
    let cos_cb = if cfg.codebook.cosine {
        Some(load_codebook(ctx, "primary_cos", rec)?)
    } else {
        None
    };
    let frag = &cfg.fraglet.fragments;
    let (k1, k2) = (
        cfg.spread_for(&cfg.codebook.primary),
        cfg.spread_for(&cfg.codebook.secondary),
    );
    let w = cfg.features.hinge_weight;

    let primary = whole_or_all(&masks);
    let imgs = load_masks(&primary, rec)?;
    let computed: Vec<Vec<(&str, FeatureVector)>> = primary
        .par_iter()
        .zip(&imgs)
        .map(|(r, img)| -> Result<_> {
            let at = |e: Error| e.at(&r.image_path);
            let h = hinge_feature(img, &cfg.hinge).map_err(at)?;
            let f = fraglet_histogram(img, &primary_cb, k1, frag).map_err(at)?;
            let a = adjoin(&h, &f, w, 1.0 - w)?;
            let mut out = vec![("hinge", h), ("fraglet", f), ("adjoined", a)];
            if let Some(cb) = &cos_cb {
                out.push((
                    "fraglet_cos",
                    fraglet_cos_histogram(img, cb, k1, frag).map_err(at)?,
                ));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    for (r, feats) in primary.iter().zip(computed) {
        for (dir, fv) in feats {
            rec.write(feature_path(ctx, dir, r.label()), fv.to_text())?;
        }
    }
    let secondary = split_or_all(&masks);
    let imgs = load_masks(&secondary, rec)?;
    let hists: Vec<FeatureVector> = secondary
        .par_iter()
        .zip(&imgs)
        .map(|(r, img)| {
            fraglet_histogram(img, &secondary_cb, k2, frag).map_err(|e| e.at(&r.image_path))
        })
        .collect::<Result<_>>()?;
    for (r, fv) in secondary.iter().zip(hists) {
        rec.write(feature_path(ctx, "secondary", r.label()), fv.to_text())?;
    }
    let list = |rs: &[ColumnRecord]| {
        rs.iter()
            .map(|r| format!("{}\n", r.label()))
            .collect::<String>()
    };
    rec.write(labels_path(ctx, "primary"), list(&primary))?;
    rec.write(labels_path(ctx, "secondary"), list(&secondary))?;
    Ok(json!({
        "primary_samples": primary.len(),
        "secondary_samples": secondary.len(),
        "dims": {
            "hinge": cfg.hinge.dim(),
            "fraglet": primary_cb.len(),
            "adjoined": cfg.hinge.dim() + primary_cb.len(),
            "secondary": secondary_cb.len(),
        },
        "spread_k": { "primary": k1, "secondary": k2 },
    }))
}

fn load_features(
    ctx: &Ctx,
    set: &str,
    dir: &str,
    rec: &mut Recorder,
) -> Result<(Vec<SampleLabel>, Vec<FeatureVector>)> {
    let lp = labels_path(ctx, set);
    rec.input(lp.clone());
    let text = io(&lp, std::fs::read_to_string(&lp))?;
    let labels: Vec<SampleLabel> = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    let feats = labels
        .iter()
        .map(|&l| {
            let p = feature_path(ctx, dir, l);
            rec.input(p.clone());
            FeatureVector::load(&p).map_err(|e| e.at(p))
        })
        .collect::<Result<_>>()?;
    Ok((labels, feats))
}

pub(crate) fn distances(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let dir = ctx.dir(Stage::Distances);
    let mut out = serde_json::Map::new();
    for (set, fdir) in [
        ("primary", ctx.cfg.features.primary.dir()),
        ("secondary", "secondary"),
    ] {
        let (labels, feats) = load_features(ctx, set, fdir, rec)?;
        let m = distance_matrix(&feats, &labels)?;
        rec.write(dir.join(format!("{set}.txt")), m.to_text())?;
        out.insert(
            set.into(),
            json!({ "samples": m.n(), "feature": fdir, "max": m.max_entry() }),
        );
    }
    Ok(Value::Object(out))
}

/// Last column of the first half of the present columns.
fn midpoint(columns: &[u32]) -> u32 {
    columns[(columns.len() + 1) / 2 - 1]
}

pub(crate) fn pca(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let (labels, feats) = load_features(ctx, "primary", ctx.cfg.features.primary.dir(), rec)?;
    let e = pca_embed(&feats, &labels)?;
    let dir = ctx.dir(Stage::Pca);
    rec.write(dir.join("embedding.txt"), e.to_text())?;
    let mut cols: Vec<u32> = labels.iter().map(|l| l.column_index).collect();
    cols.dedup();
    let split = ctx
        .cfg
        .stats
        .split_column
        .unwrap_or_else(|| midpoint(&cols));
    let groups: Vec<usize> = labels
        .iter()
        .map(|l| usize::from(l.column_index > split))
        .collect();
    let names = [
        format!("columns {}-{split}", cols[0]),
        format!("columns {}-{}", split + 1, cols[cols.len() - 1]),
    ];
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    for (file, axes) in [("scatter_pc12.svg", (0, 1)), ("scatter_pc13.svg", (0, 2))] {
        rec.write(dir.join(file), render_scatter(&e, &groups, &names, axes)?)?;
    }
    Ok(json!({
        "samples": labels.len(),
        "explained_variance": e.explained_variance,
        "components": e.components,
        "rank_deficient": e.rank_deficient,
        "color_split": split,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub sibling_top1_rate: f64,
    pub sibling_pairs: usize,
    pub vote_min_column: u32,
    pub vote_min_p: f64,
    pub vote_clipped: bool,
    pub distance_test: StatReport,
    pub k_hits: usize,
    pub fits: Vec<FitReport>,
    pub anova: Option<StatReport>,
    /// Last column of the first group, and where it came from.
    pub split_column: u32,
    pub split_source: String,
}

impl StatsSummary {
    pub fn fit(&self, method: FitMethod, smoothing: Smoothing) -> Option<&FitReport> {
        self.fits
            .iter()
            .find(|f| f.method == method && f.smoothing == smoothing)
    }
}

pub(crate) fn stats(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let s = &ctx.cfg.stats;
    let mp = ctx.dir(Stage::Distances).join("secondary.txt");
    rec.input(mp.clone());
    let m = DistanceMatrix::load(&mp).map_err(|e| e.at(&mp))?;
    let dir = ctx.dir(Stage::Stats);

    let sib = sibling_check(&m);
    let votes = lr_vote_curve(&m, s.vote_wmin, s.vote_wmax)?;
    let (vote_min_column, vote_min_p) = votes.global_min();
    let groups = nn_distance_groups(&m, s.nn_wmin, s.nn_wmax, s.n_left, s.n_right)?;
    let nn = nn_position_series(&m, s.k_hits)?;
    let s3 = smooth(&nn.series, 3)?;
    let s5 = smooth(&nn.series, 5)?;
    let mut fits = Vec::new();
    for (series, smoothing) in [
        (&nn.series, Smoothing::None),
        (&s3, Smoothing::Window3),
        (&s5, Smoothing::Window5),
    ] {
        for mut f in [
            fit_logistic_mc(series, s.mc_iters, s.mc_seed)?,
            fit_logistic_ls(series)?,
        ] {
            f.smoothing = smoothing;
            fits.push(f);
        }
    }
    let cols = &nn.series.columns;
    let (split_column, split_source) = match s.split_column {
        Some(c) => (c, "config"),
        None if !fits[0].flags.iter().any(|f| f == NO_TRANSITION) => {
            let x = fits[0].params.x_offset.floor().max(0.0) as u32;
            (x.clamp(cols[0], cols[cols.len() - 2]), "logistic-mc-raw")
        }
        None => (midpoint(cols), "midpoint"),
    };
    let (left, right): (Vec<(u32, f64)>, Vec<(u32, f64)>) = cols
        .iter()
        .copied()
        .zip(nn.series.values.iter().copied())
        .partition(|(c, _)| *c <= split_column);
    let values = |v: &[(u32, f64)]| v.iter().map(|p| p.1).collect::<Vec<_>>();
    let anova = match (
        GroupSummary::from_values(&values(&left)),
        GroupSummary::from_values(&values(&right)),
    ) {
        (Ok(a), Ok(b)) => Some(one_way_anova_summary(a, b)?),
        _ => None,
    };

    rec.write(dir.join("vote_curve.csv"), votes.curve.to_csv())?;
    rec.write(dir.join("nn_distance.csv"), groups.per_column.to_csv())?;
    rec.write(dir.join("positions.csv"), nn.series.to_csv())?;
    rec.write(dir.join("positions_s3.csv"), s3.to_csv())?;
    rec.write(dir.join("positions_s5.csv"), s5.to_csv())?;
    rec.write(
        dir.join("vote_curve.svg"),
        render_series("left/right vote p-value", &[("p", &votes.curve)], None)?,
    )?;
    rec.write(
        dir.join("positions.svg"),
        render_series(
            "best-match column position",
            &[("raw", &nn.series), ("smooth 3", &s3), ("smooth 5", &s5)],
            Some(&fits[0].params),
        )?,
    )?;
    let summary = StatsSummary {
        sibling_top1_rate: sib.top1_rate,
        sibling_pairs: sib.entries.len(),
        vote_min_column,
        vote_min_p,
        vote_clipped: votes.clipped,
        distance_test: groups.test,
        k_hits: nn.k_hits,
        fits,
        anova,
        split_column,
        split_source: split_source.into(),
    };
    let value = serde_json::to_value(&summary).expect("stats serialize");
    rec.write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&value).expect("json") + "\n",
    )?;
    Ok(value)
}

fn split_column_of(ctx: &Ctx) -> Result<u32> {
    let v = ctx.summary_of(Stage::Stats)?;
    v["split_column"]
        .as_u64()
        .map(|c| c as u32)
        .ok_or_else(|| Error::parse("stats stamp", "no split_column"))
}

/// `<letter>.png` templates from a directory, in file-name order.
pub fn load_templates(dir: &Path) -> Result<Vec<GlyphTemplate>> {
    let mut files: Vec<PathBuf> = io(dir, std::fs::read_dir(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no templates in `{}`",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|p| {
            let letter = p.file_stem().expect("file name").to_string_lossy();
            GlyphTemplate::from_image(&letter, &BinaryImage::load_mask(p)?).map_err(|e| e.at(p))
        })
        .collect()
}

/// Recognized glyphs of the requested letters over the given masks, in
/// record order.
pub fn recognize_samples(
    records: &[ColumnRecord],
    templates: &[GlyphTemplate],
    theta: f64,
    letters: &[String],
) -> Result<Vec<GlyphInstance>> {
    let mut out = Vec::new();
    for r in records {
        let img = BinaryImage::load_mask(&r.image_path).map_err(|e| e.at(&r.image_path))?;
        let source = Provenance {
            scan_id: r.scan_id.clone(),
            column_index: r.column_index,
        };
        let found = recognize_glyphs(&img, templates, theta, &source)?;
        out.extend(
            found
                .into_iter()
                .filter(|g| letters.iter().any(|l| *l == g.letter)),
        );
    }
    Ok(out)
}

fn templates_dir<'a>(ctx: &'a Ctx) -> Result<&'a Path> {
    ctx.cfg
        .paths
        .templates
        .as_deref()
        .ok_or_else(|| Error::Config("the glyph stage needs paths.templates".into()))
}

pub(crate) fn glyphs(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let v = &ctx.cfg.visual;
    let tdir = templates_dir(ctx)?;
    let templates = load_templates(tdir)?;
    for t in &templates {
        rec.input(tdir.join(format!("{}.png", t.letter)));
    }
    let split = split_column_of(ctx)?;
    let records = whole_or_all(&sample_masks(&ctx.work)?);
    for r in &records {
        rec.input(r.image_path.clone());
    }
    let instances = recognize_samples(&records, &templates, v.theta, &v.letters)?;
    let dir = ctx.dir(Stage::Glyphs);
    let mut table = String::from("scan_id,column_index,letter,x,y,w,h,distance\n");
    for g in &instances {
        let b = g.bbox;
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6}\n",
            g.source.scan_id, g.source.column_index, g.letter, b.x, b.y, b.w, b.h, g.distance
        ));
    }
    rec.write(dir.join("instances.csv"), table)?;
    let mut letters = serde_json::Map::new();
    for letter in &v.letters {
        let mine: Vec<GlyphInstance> = instances
            .iter()
            .filter(|g| &g.letter == letter)
            .cloned()
            .collect();
        let mut counts = BTreeMap::new();
        if !mine.is_empty() {
            rec.write(
                dir.join(format!("chart_{letter}.svg")),
                render_chart(letter, &mine)?,
            )?;
        }
        for group in [
            HeatmapGroup::All,
            HeatmapGroup::FirstHalf,
            HeatmapGroup::SecondHalf,
        ] {
            let sel: Vec<GlyphInstance> = mine
                .iter()
                .filter(|g| group.contains(g.source.column_index, split))
                .cloned()
                .collect();
            counts.insert(group.as_str(), sel.len());
            if sel.is_empty() {
                continue;
            }
            let h = heatmap(&sel, v.grid, group)?;
            let stem = format!("heatmap_{letter}_{}", group.as_str());
            rec.write(dir.join(format!("{stem}.txt")), h.to_text())?;
            rec.write(dir.join(format!("{stem}.svg")), h.to_svg(4.0))?;
        }
        let flip: Option<FlipReport> = if mine.is_empty() {
            None
        } else {
            Some(bootstrap_flip_probability(
                &mine,
                v.grid,
                MID_BAND,
                v.bootstrap_draws,
                v.bootstrap_seed,
            )?)
        };
        letters.insert(
            letter.clone(),
            json!({ "instances": counts, "bootstrap": flip }),
        );
    }
    Ok(json!({ "theta": v.theta, "split_column": split, "letters": letters }))
}

fn side_label(column: u32, split: u32) -> GroupLabel {
    if column <= split {
        GroupLabel::Left
    } else {
        GroupLabel::Right
    }
}

pub(crate) fn fragletmap(ctx: &Ctx, rec: &mut Recorder) -> Result<Value> {
    let v = &ctx.cfg.visual;
    let split = split_column_of(ctx)?;
    let cb = load_codebook(ctx, "secondary", rec)?;
    let (labels, hists) = load_features(ctx, "secondary", "secondary", rec)?;
    let left: Vec<bool> = labels.iter().map(|l| l.column_index <= split).collect();
    let s = rank_discriminative_fraglets(&hists, &left, cb.rows(), cb.cols(), v.tau)?;
    let dir = ctx.dir(Stage::Fragletmap);
    rec.write(dir.join("saliency.csv"), s.to_table())?;

    // leave one column out: both halves of the held-out column are excluded
    let predictions: Vec<(SampleLabel, GroupLabel, f64)> = labels
        .par_iter()
        .zip(&hists)
        .map(|(l, h)| -> Result<_> {
            let keep: Vec<usize> = (0..labels.len())
                .filter(|&j| labels[j].column_index != l.column_index)
                .collect();
            let hs: Vec<FeatureVector> = keep.iter().map(|&j| hists[j].clone()).collect();
            let ls: Vec<bool> = keep.iter().map(|&j| left[j]).collect();
            let sal = rank_discriminative_fraglets(&hs, &ls, cb.rows(), cb.cols(), v.tau)?;
            let p = predict_group(h, &sal, v.topk)?;
            Ok((*l, p.label, p.margin))
        })
        .collect::<Result<_>>()?;
    let mut table = String::from("label,truth,predicted,margin\n");
    let mut correct = 0;
    for &(l, p, margin) in &predictions {
        let truth = side_label(l.column_index, split);
        correct += usize::from(truth == p);
        table.push_str(&format!("{l},{truth},{p},{margin:e}\n"));
    }
    rec.write(dir.join("predictions.csv"), table)?;

    let masks = sample_masks(&ctx.work)?;
    let mut shown: Vec<&ColumnRecord> = Vec::new();
    for r in split_or_all(&masks)
        .iter()
        .filter(|r| labels.contains(&r.label()))
    {
        if shown
            .last()
            .is_none_or(|p| p.column_index != r.column_index)
        {
            shown.push(
                masks
                    .iter()
                    .find(|m| m.label() == r.label())
                    .expect("mask listed"),
            );
        }
    }
    let overlays: Vec<(SheetColumn, Option<f64>)> = shown
        .par_iter()
        .map(|r| -> Result<_> {
            let img = BinaryImage::load_mask(&r.image_path).map_err(|e| e.at(&r.image_path))?;
            let o = render_overlay(&img, &cb, &s, v.topk, &ctx.cfg.fraglet.fragments)?;
            let predicted = predictions
                .iter()
                .find(|p| p.0 == r.label())
                .map_or(GroupLabel::Undecided, |p| p.1);
            let share = o.green_share();
            Ok((
                SheetColumn {
                    column_index: r.column_index,
                    thumbnail: o.image,
                    truth: side_label(r.column_index, split),
                    predicted,
                },
                share,
            ))
        })
        .collect::<Result<_>>()?;
    for r in &shown {
        rec.input(r.image_path.clone());
    }
    let shares: Vec<Value> = overlays
        .iter()
        .map(|(c, share)| json!({ "column_index": c.column_index, "green_share": share }))
        .collect();
    let sheet_cols: Vec<SheetColumn> = overlays.into_iter().map(|(c, _)| c).collect();
    let sheet = render_overlay_sheet(&sheet_cols, v.thumbnail_height)?;
    let sheet_path = dir.join("overlay.png");
    sheet.save_png(&sheet_path)?;
    rec.wrote(sheet_path);

    let top: Vec<Value> = s
        .top_cells(v.topk.min(10))
        .into_iter()
        .map(|c| json!({ "cell": [c / s.cols, c % s.cols], "score": s.scores[c], "side": s.sides[c] }))
        .collect();
    Ok(json!({
        "split_column": split,
        "topk": v.topk,
        "tau": v.tau,
        "loo_accuracy": correct as f64 / predictions.len() as f64,
        "top_cells": top,
        "overlay": shares,
    }))
}
