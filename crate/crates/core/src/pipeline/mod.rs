//! Staged end-to-end run: ingest, preprocessing, codebooks, features,
//! distances, PCA, phase statistics and the visual read-outs. Every stage
//! writes into its own directory under the workdir plus a stamp recording
//! the digests of its configuration, inputs and outputs, so a later stage
//! run on its own can refuse stale intermediates.

mod config;
mod stages;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::*;
pub use stages::{load_templates, recognize_samples, sample_masks, whole_or_all, StatsSummary};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Preproc,
    Codebook,
    Features,
    Distances,
    Pca,
    Stats,
    Glyphs,
    Fragletmap,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Preproc,
        Stage::Codebook,
        Stage::Features,
        Stage::Distances,
        Stage::Pca,
        Stage::Stats,
        Stage::Glyphs,
        Stage::Fragletmap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preproc => "preproc",
            Stage::Codebook => "codebook",
            Stage::Features => "features",
            Stage::Distances => "distances",
            Stage::Pca => "pca",
            Stage::Stats => "stats",
            Stage::Glyphs => "glyphs",
            Stage::Fragletmap => "fragletmap",
        }
    }

    /// Stages whose outputs this one reads.
    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Preproc => &[Stage::Ingest],
            Stage::Codebook => &[Stage::Preproc],
            Stage::Features => &[Stage::Preproc, Stage::Codebook],
            Stage::Distances | Stage::Pca => &[Stage::Features],
            Stage::Stats => &[Stage::Distances],
            Stage::Glyphs => &[Stage::Preproc, Stage::Stats],
            Stage::Fragletmap => &[
                Stage::Preproc,
                Stage::Codebook,
                Stage::Features,
                Stage::Stats,
            ],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::parse("stage", format!("unknown stage `{s}`")))
    }
}

/// Parses a comma-separated stage list; `all` selects every stage.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>> {
    if list.trim() == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    let set: BTreeSet<Stage> = list
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    Ok(set.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Stamp {
    stage: Stage,
    config: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Files a stage read and wrote.
#[derive(Default)]
pub(crate) struct Recorder {
    inputs: BTreeSet<PathBuf>,
    outputs: BTreeSet<PathBuf>,
}

impl Recorder {
    pub(crate) fn input(&mut self, p: impl Into<PathBuf>) {
        self.inputs.insert(p.into());
    }

    pub(crate) fn write(&mut self, path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(path);
        Ok(())
    }

    /// Registers a file written by other means.
    pub(crate) fn wrote(&mut self, path: PathBuf) {
        self.outputs.insert(path);
    }
}

pub(crate) struct Ctx<'a> {
    pub(crate) cfg: &'a PipelineConfig,
    pub(crate) work: PathBuf,
}

impl Ctx<'_> {
    pub(crate) fn dir(&self, stage: Stage) -> PathBuf {
        self.work.join(stage.as_str())
    }

    fn key(&self, p: &Path) -> String {
        p.strip_prefix(&self.work)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.work.join("stamps").join(format!("{stage}.json"))
    }

    fn load_stamp(&self, stage: Stage) -> Option<Stamp> {
        let text = std::fs::read_to_string(self.stamp_path(stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub(crate) fn summary_of(&self, stage: Stage) -> Result<Value> {
        self.load_stamp(stage)
            .map(|s| s.summary)
            .ok_or_else(|| missing(stage, "no stamp"))
    }
}

fn missing(stage: Stage, message: &str) -> Error {
    Error::MissingStage {
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

fn stage_config(cfg: &PipelineConfig, stage: Stage) -> Value {
    match stage {
        Stage::Ingest => json!({ "manifest": cfg.paths.manifest }),
        Stage::Preproc => json!(cfg.preproc),
        Stage::Codebook => {
            json!({ "plates": cfg.paths.plates, "fraglet": cfg.fraglet, "codebook": cfg.codebook })
        }
        Stage::Features => json!({
            "hinge": cfg.hinge, "fraglet": cfg.fraglet, "codebook": cfg.codebook, "features": cfg.features
        }),
        Stage::Distances => json!(cfg.features.primary),
        Stage::Pca => json!(cfg.stats.split_column),
        Stage::Stats => json!(cfg.stats),
        Stage::Glyphs => json!({ "visual": cfg.visual, "templates": cfg.paths.templates }),
        Stage::Fragletmap => json!({ "visual": cfg.visual, "fragments": cfg.fraglet.fragments }),
    }
}

fn config_digest(cfg: &PipelineConfig, stage: Stage) -> String {
    sha256_hex(stage_config(cfg, stage).to_string().as_bytes())
}

/// Confirms that a stage's stamp exists and that nothing it read or wrote
/// has changed since.
fn verify_stamp(ctx: &Ctx, stage: Stage, needed_by: &str) -> Result<()> {
    let stamp = ctx.load_stamp(stage).ok_or_else(|| {
        missing(
            stage,
            &format!("`{needed_by}` needs its outputs; run `{stage}` first"),
        )
    })?;
    let stale = |path: PathBuf| Error::StaleInput {
        stage: stage.to_string(),
        path,
    };
    if stamp.config != config_digest(ctx.cfg, stage) {
        return Err(stale(PathBuf::from("<config>")));
    }
    for (key, digest) in stamp.inputs.iter().chain(&stamp.outputs) {
        let p = if Path::new(key).is_absolute() {
            PathBuf::from(key)
        } else {
            ctx.work.join(key)
        };
        match sha256_file(&p) {
            Ok(d) if &d == digest => {}
            _ => return Err(stale(p)),
        }
    }
    Ok(())
}

fn run_stage(ctx: &Ctx, stage: Stage) -> Result<()> {
    let dir = ctx.dir(stage);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut rec = Recorder::default();
    let summary = match stage {
        Stage::Ingest => stages::ingest(ctx, &mut rec),
        Stage::Preproc => stages::preproc(ctx, &mut rec),
        Stage::Codebook => stages::codebook(ctx, &mut rec),
        Stage::Features => stages::features(ctx, &mut rec),
        Stage::Distances => stages::distances(ctx, &mut rec),
        Stage::Pca => stages::pca(ctx, &mut rec),
        Stage::Stats => stages::stats(ctx, &mut rec),
        Stage::Glyphs => stages::glyphs(ctx, &mut rec),
        Stage::Fragletmap => stages::fragletmap(ctx, &mut rec),
    }?;
    let digests = |set: &BTreeSet<PathBuf>| -> Result<BTreeMap<String, String>> {
        set.iter()
            .map(|p| Ok((ctx.key(p), sha256_file(p)?)))
            .collect()
    };
    let stamp = Stamp {
        stage,
        config: config_digest(ctx.cfg, stage),
        inputs: digests(&rec.inputs)?,
        outputs: digests(&rec.outputs)?,
        summary,
    };
    let path = ctx.stamp_path(stage);
    std::fs::create_dir_all(path.parent().expect("stamp dir")).map_err(|e| Error::io(&path, e))?;
    let text = serde_json::to_string_pretty(&stamp).expect("stamp serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub stages_run: Vec<Stage>,
    /// Report body, including its own `digest` field.
    pub report: Value,
    pub digest: String,
    pub path: PathBuf,
}

impl RunReport {
    /// Summary written by a stage, if the stage has run.
    pub fn summary(&self, stage: Stage) -> Option<&Value> {
        self.report["stages"]
            .get(stage.as_str())
            .map(|s| &s["summary"])
    }
}

/// Runs `stages` in dependency order. Stages not requested but needed must
/// have valid, current outputs in the workdir.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<RunReport> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        work: cfg.paths.workdir.clone(),
    };
    std::fs::create_dir_all(&ctx.work).map_err(|e| Error::io(&ctx.work, e))?;
    let requested: BTreeSet<Stage> = stages.iter().copied().collect();
    let mut ran = BTreeSet::new();
    for &stage in &requested {
        for &dep in stage.deps() {
            if !ran.contains(&dep) {
                verify_stamp(&ctx, dep, stage.as_str())?;
            }
        }
        run_stage(&ctx, stage)?;
        ran.insert(stage);
    }
    write_report(&ctx, ran.into_iter().collect())
}

/// Checks that `stage` has run and that its outputs are current, for tools
/// that read them outside a pipeline run.
pub fn verify_stage(cfg: &PipelineConfig, stage: Stage, needed_by: &str) -> Result<()> {
    let ctx = Ctx {
        cfg,
        work: cfg.paths.workdir.clone(),
    };
    verify_stamp(&ctx, stage, needed_by)
}

/// Last column of the first group: the configured one, or the one the stats
/// stage derived.
pub fn split_column(cfg: &PipelineConfig) -> Result<u32> {
    if let Some(c) = cfg.stats.split_column {
        return Ok(c);
    }
    verify_stage(cfg, Stage::Stats, "the left/right split")?;
    let ctx = Ctx {
        cfg,
        work: cfg.paths.workdir.clone(),
    };
    ctx.summary_of(Stage::Stats)?["split_column"]
        .as_u64()
        .map(|c| c as u32)
        .ok_or_else(|| Error::parse("stats stamp", "no split_column"))
}

fn write_report(ctx: &Ctx, stages_run: Vec<Stage>) -> Result<RunReport> {
    let mut stage_map = serde_json::Map::new();
    for stage in Stage::ALL {
        if let Some(st) = ctx.load_stamp(stage) {
            stage_map.insert(
                stage.to_string(),
                json!({ "summary": st.summary, "outputs": st.outputs }),
            );
        }
    }
    let cfg = ctx.cfg;
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    config
        .as_object_mut()
        .expect("config object")
        .remove("paths");
    let mut report = json!({
        "config": config,
        "seeds": {
            "codebook.primary": cfg.codebook.primary.seed,
            "codebook.secondary": cfg.codebook.secondary.seed,
            "stats.mc_seed": cfg.stats.mc_seed,
            "visual.bootstrap_seed": cfg.visual.bootstrap_seed,
        },
        "stages": stage_map,
    });
    let digest = sha256_hex(
        serde_json::to_string(&report)
            .expect("report serializes")
            .as_bytes(),
    );
    report["digest"] = json!(digest);
    let path = ctx.work.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(RunReport {
        stages_run,
        report,
        digest,
        path,
    })
}
