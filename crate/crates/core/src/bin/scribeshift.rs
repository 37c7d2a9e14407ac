use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use scribeshift::corpus::{load_manifest, validate_series};
use scribeshift::error::{Error, Result};
use scribeshift::pipeline::{
    load_templates, parse_stages, recognize_samples, run_pipeline, sample_masks, split_column,
    verify_stage, whole_or_all, PipelineConfig, Stage,
};
use scribeshift::synth::{preset, write_corpus};
use scribeshift::visual::{heatmap, render_chart, HeatmapGroup};

#[derive(Parser)]
#[command(
    name = "scribeshift",
    version,
    about = "Writer-change detection over a series of manuscript columns"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set stats.k_hits=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsView {
    Votes,
    Anova,
    Positions,
    Logistic,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a manifest, or run the ingest stage from a config.
    Ingest {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Only report the series layout.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        common: Common,
    },
    Preproc {
        #[command(flatten)]
        common: Common,
    },
    Codebook {
        #[command(flatten)]
        common: Common,
    },
    Features {
        #[command(flatten)]
        common: Common,
    },
    Distances {
        #[command(flatten)]
        common: Common,
    },
    /// Embed the primary distances; `--out` receives the PC1/PC2 scatter.
    Pca {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    Stats {
        #[arg(value_enum)]
        view: StatsView,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-column glyph counts of one letter.
    Chart {
        #[arg(long)]
        letter: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Mean raster of one letter; the text matrix lands next to the SVG.
    Heatmap {
        #[arg(long)]
        letter: String,
        #[arg(long, default_value = "all")]
        group: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    Fragletmap {
        #[arg(long)]
        topk: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic corpus plus a starter `pipeline.toml`.
    Synth {
        #[arg(long, default_value = "paper-like")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Text lines per column, instead of the preset's.
        #[arg(long)]
        lines: Option<usize>,
        #[arg(long)]
        glyphs_per_line: Option<usize>,
    },
    Run {
        #[arg(long, default_value = "all")]
        stages: String,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn stage(common: &Common, stage: Stage) -> Result<Value> {
    run_one(&load_config(common)?, stage)
}

fn run_one(cfg: &PipelineConfig, stage: Stage) -> Result<Value> {
    let run = run_pipeline(cfg, &[stage])?;
    Ok(json!({
        "stage": stage.as_str(),
        "summary": run.summary(stage),
        "report": run.path,
        "digest": run.digest,
    }))
}

fn copy_out(from: &Path, to: &Path) -> Result<()> {
    std::fs::copy(from, to)
        .map(|_| ())
        .map_err(|e| Error::io(to, e))
}

fn write_out(to: &Path, text: &str) -> Result<()> {
    std::fs::write(to, text).map_err(|e| Error::io(to, e))
}

fn glyphs_of(
    cfg: &PipelineConfig,
    letter: &str,
    needed_by: &str,
) -> Result<Vec<scribeshift::visual::GlyphInstance>> {
    cfg.validate()?;
    verify_stage(cfg, Stage::Preproc, needed_by)?;
    let dir = cfg
        .paths
        .templates
        .as_deref()
        .ok_or_else(|| Error::Config("glyph commands need paths.templates".into()))?;
    let templates = load_templates(dir)?;
    if !templates.iter().any(|t| t.letter == letter) {
        return Err(Error::InvalidParameter(format!(
            "no template for letter `{letter}`"
        )));
    }
    let records = whole_or_all(&sample_masks(&cfg.paths.workdir)?);
    recognize_samples(
        &records,
        &templates,
        cfg.visual.theta,
        &[letter.to_string()],
    )
}

fn execute(cmd: Cmd) -> Result<Value> {
    match cmd {
        Cmd::Ingest {
            manifest,
            check,
            common,
        } => match (manifest, common.config.is_some()) {
            (Some(m), false) => {
                let records = load_manifest(&m)?;
                let layout = validate_series(&records);
                Ok(
                    json!({ "manifest": m, "records": records.len(), "layout": layout, "check": check }),
                )
            }
            (m, true) => {
                let mut cfg = load_config(&common)?;
                if let Some(m) = m {
                    cfg.paths.manifest = m;
                }
                run_one(&cfg, Stage::Ingest)
            }
            (None, false) => Err(Error::Config("ingest needs --manifest or --config".into())),
        },
        Cmd::Preproc { common } => stage(&common, Stage::Preproc),
        Cmd::Codebook { common } => stage(&common, Stage::Codebook),
        Cmd::Features { common } => stage(&common, Stage::Features),
        Cmd::Distances { common } => stage(&common, Stage::Distances),
        Cmd::Pca { out, common } => {
            let v = stage(&common, Stage::Pca)?;
            if let Some(out) = &out {
                let cfg = load_config(&common)?;
                copy_out(&cfg.paths.workdir.join("pca/scatter_pc12.svg"), out)?;
            }
            Ok(v)
        }
        Cmd::Stats { view, out, common } => {
            if matches!(view, StatsView::Anova) && out.is_some() {
                return Err(Error::InvalidParameter(
                    "the anova view has no chart".into(),
                ));
            }
            let v = stage(&common, Stage::Stats)?;
            let s = &v["summary"];
            let (block, svg) = match view {
                StatsView::Votes => (
                    json!({ "min_column": s["vote_min_column"], "min_p": s["vote_min_p"], "clipped": s["vote_clipped"] }),
                    Some("vote_curve.svg"),
                ),
                StatsView::Anova => (
                    json!({ "anova": s["anova"], "distance_test": s["distance_test"] }),
                    None,
                ),
                StatsView::Positions => (
                    json!({ "k_hits": s["k_hits"], "sibling_top1_rate": s["sibling_top1_rate"] }),
                    Some("positions.svg"),
                ),
                StatsView::Logistic => (
                    json!({ "fits": s["fits"], "split_column": s["split_column"] }),
                    Some("positions.svg"),
                ),
            };
            if let (Some(out), Some(svg)) = (&out, svg) {
                let cfg = load_config(&common)?;
                copy_out(&cfg.paths.workdir.join("stats").join(svg), out)?;
            }
            Ok(json!({ "stats": block, "report": v["report"], "digest": v["digest"] }))
        }
        Cmd::Chart {
            letter,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let found = glyphs_of(&cfg, &letter, "chart")?;
            write_out(&out, &render_chart(&letter, &found)?)?;
            Ok(json!({ "letter": letter, "instances": found.len(), "out": out }))
        }
        Cmd::Heatmap {
            letter,
            group,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let group: HeatmapGroup = group.parse()?;
            let split = split_column(&cfg)?;
            let found: Vec<_> = glyphs_of(&cfg, &letter, "heatmap")?
                .into_iter()
                .filter(|g| group.contains(g.source.column_index, split))
                .collect();
            if found.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "no `{letter}` instances recognized in group `{}` (split after column {split})",
                    group.as_str()
                )));
            }
            let h = heatmap(&found, cfg.visual.grid, group)?;
            write_out(&out, &h.to_svg(4.0))?;
            let text = out.with_extension("txt");
            h.save(&text)?;
            Ok(
                json!({ "letter": letter, "group": group.as_str(), "split_column": split, "instances": found.len(), "out": out, "matrix": text }),
            )
        }
        Cmd::Fragletmap { topk, common } => {
            let mut cfg = load_config(&common)?;
            if let Some(k) = topk {
                cfg.visual.topk = k;
            }
            run_one(&cfg, Stage::Fragletmap)
        }
        Cmd::Synth {
            preset: name,
            seed,
            out,
            lines,
            glyphs_per_line,
        } => {
            let mut spec = preset(&name, seed)?;
            if let Some(n) = lines {
                spec.lines_per_column = n;
            }
            if let Some(n) = glyphs_per_line {
                spec.glyphs_per_line = n;
            }
            let files = write_corpus(&spec, &out)?;
            let mut cfg = PipelineConfig::default();
            cfg.paths.manifest = "manifest.csv".into();
            cfg.paths.workdir = "work".into();
            cfg.paths.templates = Some("templates".into());
            let config = out.join("pipeline.toml");
            write_out(&config, &cfg.to_toml())?;
            Ok(json!({
                "preset": name,
                "seed": seed,
                "switch_column": spec.switch_column,
                "manifest": files.manifest,
                "ground_truth": files.ground_truth,
                "templates": files.templates,
                "config": config,
                "columns": files.images.len(),
                "warnings": files.warnings,
            }))
        }
        Cmd::Run { stages, common } => {
            let cfg = load_config(&common)?;
            let run = run_pipeline(&cfg, &parse_stages(&stages)?)?;
            Ok(json!({
                "stages": run.stages_run.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
                "report": run.path,
                "digest": run.digest,
            }))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().cmd) {
        Ok(v) => {
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).expect("json")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = json!({
                "error": e.kind(),
                "message": e.to_string(),
                "path": e.artifact_path(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
