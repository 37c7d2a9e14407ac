use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraglet::FragletConfig;
use crate::hinge::HingeConfig;
use crate::preproc::{Binarizer, SplitAxis};
use crate::visual::{DEFAULT_TAU, DEFAULT_THETA, DEFAULT_TOPK, HEATMAP_GRID};

/// Everything a run needs. Relative paths are resolved against the directory
/// of the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub preproc: PreprocConfig,
    pub hinge: HingeConfig,
    pub fraglet: FragletConfig,
    pub codebook: Codebooks,
    pub features: FeatureConfig,
    pub stats: StatsConfig,
    pub visual: VisualConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub workdir: PathBuf,
    /// Manifest of training plates for the codebooks; the query columns are
    /// used when absent.
    pub plates: Option<PathBuf>,
    /// Directory of `<letter>.png` glyph templates.
    pub templates: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.csv"),
            workdir: PathBuf::from("work"),
            plates: None,
            templates: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocConfig {
    pub binarizer: Binarizer,
    pub left_margin: f64,
    pub right_margin: f64,
    pub deskew: bool,
    pub max_deskew_deg: f64,
    pub split_axis: SplitAxis,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            binarizer: Binarizer::Otsu,
            left_margin: 0.0,
            right_margin: 0.0,
            deskew: true,
            max_deskew_deg: 5.0,
            split_axis: SplitAxis::HorizontalCut,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSpec {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Overrides `fraglet.spread_k` for histograms on this map.
    #[serde(default)]
    pub spread_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Codebooks {
    pub primary: CodebookSpec,
    pub secondary: CodebookSpec,
    /// Also train a map on cosine fraglets and persist cosine histograms.
    pub cosine: bool,
}

impl Default for Codebooks {
    fn default() -> Self {
        Self {
            primary: CodebookSpec {
                rows: 70,
                cols: 70,
                epochs: 50,
                seed: 1,
                spread_k: None,
            },
            secondary: CodebookSpec {
                rows: 80,
                cols: 80,
                epochs: 50,
                seed: 2,
                spread_k: None,
            },
            cosine: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaFeature {
    #[default]
    Adjoined,
    Hinge,
    Fraglet,
}

impl PcaFeature {
    pub fn dir(self) -> &'static str {
        match self {
            Self::Adjoined => "adjoined",
            Self::Hinge => "hinge",
            Self::Fraglet => "fraglet",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub hinge_weight: f64,
    /// Whole-column feature used for the primary distances and PCA.
    pub primary: PcaFeature,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hinge_weight: 0.5,
            primary: PcaFeature::Adjoined,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub vote_wmin: usize,
    pub vote_wmax: usize,
    pub nn_wmin: usize,
    pub nn_wmax: usize,
    pub n_left: usize,
    pub n_right: usize,
    pub k_hits: usize,
    pub mc_iters: usize,
    pub mc_seed: u64,
    /// Last column of the first group. Taken from the raw Monte Carlo fit
    /// when absent.
    pub split_column: Option<u32>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            vote_wmin: 9,
            vote_wmax: 26,
            nn_wmin: 18,
            nn_wmax: 26,
            n_left: 18,
            n_right: 17,
            k_hits: 8,
            mc_iters: 100_000,
            mc_seed: 1,
            split_column: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisualConfig {
    pub theta: f64,
    pub grid: usize,
    pub topk: usize,
    pub tau: f64,
    pub letters: Vec<String>,
    pub bootstrap_draws: usize,
    pub bootstrap_seed: u64,
    /// Rows of each column thumbnail in the overlay sheet.
    pub thumbnail_height: usize,
}

impl Default for VisualConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            grid: HEATMAP_GRID,
            topk: DEFAULT_TOPK,
            tau: DEFAULT_TAU,
            letters: vec!["aleph".into(), "shin".into()],
            bootstrap_draws: 1000,
            bootstrap_seed: 3,
            thumbnail_height: 240,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::Config(msg)
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.manifest);
        join(&mut self.paths.workdir);
        if let Some(p) = self.paths.plates.as_mut() {
            join(p);
        }
        if let Some(p) = self.paths.templates.as_mut() {
            join(p);
        }
        if let Binarizer::External { dir } = &mut self.preproc.binarizer {
            join(dir);
        }
    }

    /// Applies a `section.key=value` override. The value is read as a TOML
    /// literal, or as a string when it does not parse as one.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(format!("override `{assignment}` is not key=value")))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| invalid(e.to_string()))?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| invalid(format!("`{key}` does not name a config key")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| invalid(format!("override `{assignment}`: {e}")))?;
        Ok(())
    }

    /// Checks referenced paths and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !self.paths.manifest.is_file() {
            return Err(invalid(format!(
                "manifest `{}` not found",
                self.paths.manifest.display()
            )));
        }
        if let Some(p) = &self.paths.plates {
            if !p.is_file() {
                return Err(invalid(format!(
                    "plates manifest `{}` not found",
                    p.display()
                )));
            }
        }
        if let Some(p) = &self.paths.templates {
            if !p.is_dir() {
                return Err(invalid(format!(
                    "template directory `{}` not found",
                    p.display()
                )));
            }
        }
        if let Binarizer::External { dir } = &self.preproc.binarizer {
            if !dir.is_dir() {
                return Err(invalid(format!(
                    "mask directory `{}` not found",
                    dir.display()
                )));
            }
        }
        let p = &self.preproc;
        if p.left_margin < 0.0 || p.right_margin < 0.0 || p.left_margin + p.right_margin >= 1.0 {
            return Err(invalid("preproc margins must be >= 0 with sum < 1".into()));
        }
        if p.deskew && !(p.max_deskew_deg > 0.0 && p.max_deskew_deg <= 15.0) {
            return Err(invalid("preproc.max_deskew_deg must be in (0, 15]".into()));
        }
        self.hinge.validate()?;
        for (name, spec) in [
            ("primary", &self.codebook.primary),
            ("secondary", &self.codebook.secondary),
        ] {
            if spec.rows < 2 || spec.cols < 2 || spec.epochs == 0 {
                return Err(invalid(format!(
                    "codebook.{name} needs rows, cols >= 2 and epochs >= 1"
                )));
            }
            let k = spec.spread_k.unwrap_or(self.fraglet.spread_k);
            if k == 0 || k > spec.rows * spec.cols {
                return Err(invalid(format!(
                    "codebook.{name}: spread_k {k} outside [1, {}]",
                    spec.rows * spec.cols
                )));
            }
        }
        if !(self.features.hinge_weight > 0.0 && self.features.hinge_weight < 1.0) {
            return Err(invalid("features.hinge_weight must be in (0, 1)".into()));
        }
        let s = &self.stats;
        if s.vote_wmin == 0 || s.vote_wmin > s.vote_wmax || s.nn_wmin == 0 || s.nn_wmin > s.nn_wmax
        {
            return Err(invalid("stats windows need 1 <= wmin <= wmax".into()));
        }
        if s.k_hits == 0 || s.mc_iters == 0 || s.n_left < 2 || s.n_right < 2 {
            return Err(invalid(
                "stats needs k_hits, mc_iters >= 1 and n_left, n_right >= 2".into(),
            ));
        }
        let v = &self.visual;
        if !(v.theta > 0.0)
            || v.grid < 4
            || v.topk == 0
            || !(v.tau >= 0.0)
            || v.bootstrap_draws == 0
            || v.thumbnail_height == 0
        {
            return Err(invalid(
                "visual needs theta > 0, grid >= 4, topk >= 1, tau >= 0, draws >= 1".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn spread_for(&self, spec: &CodebookSpec) -> usize {
        spec.spread_k.unwrap_or(self.fraglet.spread_k)
    }
}
