//! Column manifests: which scan holds which serial column of the manuscript.
//!
//! A manifest is a comma-separated text file with a mandatory header line
//!
//! ```text
//! scan_id,column_index,split_side,image_path
//! ```
//!
//! Lines starting with `#` and blank lines are skipped. `split_side` is one of
//! `whole`, `a` or `b`; relative image paths resolve against the directory
//! holding the manifest.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const MANIFEST_HEADER: &str = "scan_id,column_index,split_side,image_path";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    Whole,
    A,
    B,
}

impl SplitSide {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitSide::Whole => "whole",
            SplitSide::A => "a",
            SplitSide::B => "b",
        }
    }

    /// The other half of a split pair.
    pub fn sibling(self) -> Option<SplitSide> {
        match self {
            SplitSide::Whole => None,
            SplitSide::A => Some(SplitSide::B),
            SplitSide::B => Some(SplitSide::A),
        }
    }
}

impl fmt::Display for SplitSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(SplitSide::Whole),
            "a" => Ok(SplitSide::A),
            "b" => Ok(SplitSide::B),
            other => Err(Error::parse(
                "split_side",
                format!("unknown split side `{other}`"),
            )),
        }
    }
}

/// Identifies one sample in the series: a column and which part of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleLabel {
    pub column_index: u32,
    pub side: SplitSide,
}

impl SampleLabel {
    pub fn new(column_index: u32, side: SplitSide) -> Self {
        Self { column_index, side }
    }
}

impl fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.column_index, self.side)
    }
}

impl FromStr for SampleLabel {
    type Err = Error;

    /// Parses `12a`, `12b` or `12whole`.
    fn from_str(s: &str) -> Result<Self> {
        let split = s
            .find(|c: char| !c.is_ascii_digit())
            .ok_or_else(|| Error::parse("sample label", format!("`{s}` has no side")))?;
        let column_index = s[..split]
            .parse()
            .map_err(|_| Error::parse("sample label", format!("`{s}` has no column index")))?;
        Ok(Self {
            column_index,
            side: s[split..].parse()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRecord {
    pub scan_id: String,
    pub column_index: u32,
    pub split_side: SplitSide,
    pub image_path: PathBuf,
}

impl ColumnRecord {
    pub fn label(&self) -> SampleLabel {
        SampleLabel::new(self.column_index, self.split_side)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesLayout {
    pub n_columns: u32,
    pub present: Vec<u32>,
    pub gaps: Vec<u32>,
    pub warnings: Vec<String>,
}

/// Parses manifest text without touching the filesystem.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ColumnRecord>> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let Some((line, header)) = rows.next() else {
        return Err(Error::EmptyManifest);
    };
    let normalized: Vec<&str> = header.split(',').map(str::trim).collect();
    if normalized != MANIFEST_HEADER.split(',').collect::<Vec<_>>() {
        return Err(Error::ManifestRow {
            line,
            message: format!("expected header `{MANIFEST_HEADER}`"),
        });
    }

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, row) in rows {
        let fields: Vec<&str> = row.splitn(4, ',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::ManifestRow {
                line,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let row_err = |message: String| Error::ManifestRow { line, message };
        if fields[0].is_empty() {
            return Err(row_err("empty scan_id".into()));
        }
        let column_index: u32 = fields[1]
            .parse()
            .map_err(|_| row_err(format!("bad column_index `{}`", fields[1])))?;
        if column_index == 0 {
            return Err(row_err("column_index must be >= 1".into()));
        }
        let split_side = fields[2]
            .parse::<SplitSide>()
            .map_err(|e| row_err(e.to_string()))?;
        if fields[3].is_empty() {
            return Err(row_err("empty image_path".into()));
        }
        if !seen.insert((column_index, split_side)) {
            return Err(Error::DuplicateRecord {
                column_index,
                side: split_side.to_string(),
            });
        }
        let raw = PathBuf::from(fields[3]);
        let image_path = if raw.is_absolute() {
            raw
        } else {
            base_dir.join(raw)
        };
        records.push(ColumnRecord {
            scan_id: fields[0].to_string(),
            column_index,
            split_side,
            image_path,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyManifest);
    }
    records.sort_by_key(|r| (r.column_index, r.split_side));
    Ok(records)
}

/// Reads a manifest and checks that every referenced image exists.
pub fn load_manifest(path: &Path) -> Result<Vec<ColumnRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let records = parse_manifest(&text, base)?;
    for r in &records {
        if !r.image_path.is_file() {
            return Err(Error::ManifestRow {
                line: row_of(&text, r),
                message: format!("image `{}` not found", r.image_path.display()),
            });
        }
    }
    Ok(records)
}

fn row_of(text: &str, record: &ColumnRecord) -> usize {
    let needle = format!(
        "{},{},{}",
        record.scan_id, record.column_index, record.split_side
    );
    text.lines()
        .position(|l| l.replace(' ', "").starts_with(&needle))
        .map_or(0, |i| i + 1)
}

/// Formats records in manifest syntax. Paths under `base_dir` are written
/// relative to it.
pub fn format_manifest(records: &[ColumnRecord], base_dir: &Path) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        let path = r.image_path.strip_prefix(base_dir).unwrap_or(&r.image_path);
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.scan_id,
            r.column_index,
            r.split_side,
            path.display()
        ));
    }
    out
}

pub fn write_manifest(path: &Path, records: &[ColumnRecord]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::write(path, format_manifest(records, base)).map_err(|e| Error::io(path, e))
}

/// Describes which serial positions are covered. Never fails; problems are
/// reported as warnings.
pub fn validate_series(records: &[ColumnRecord]) -> SeriesLayout {
    let present: BTreeSet<u32> = records.iter().map(|r| r.column_index).collect();
    let n_columns = present.iter().copied().max().unwrap_or(0);
    let gaps = (1..=n_columns).filter(|c| !present.contains(c)).collect();

    let mut warnings = Vec::new();
    let splits_expected = records.iter().any(|r| r.split_side != SplitSide::Whole);
    if splits_expected {
        for &c in &present {
            let has = |s| {
                records
                    .iter()
                    .any(|r| r.column_index == c && r.split_side == s)
            };
            match (has(SplitSide::A), has(SplitSide::B)) {
                (true, false) => warnings.push(format!("column {c} has split a but no split b")),
                (false, true) => warnings.push(format!("column {c} has split b but no split a")),
                (false, false) => warnings.push(format!("column {c} has no split samples")),
                _ => {}
            }
        }
    }
    SeriesLayout {
        n_columns,
        present: present.into_iter().collect(),
        gaps,
        warnings,
    }
}

pub fn resolve_image(record: &ColumnRecord) -> Result<GrayImage> {
    GrayImage::load(&record.image_path)
}

/// Loads all images in parallel, returned in record order.
pub fn load_images(records: &[ColumnRecord]) -> Result<Vec<GrayImage>> {
    records.par_iter().map(resolve_image).collect()
}
