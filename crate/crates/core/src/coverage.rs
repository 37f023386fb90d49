//! Line-level coverage spectra and the two text formats they are read from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A compiler source statement: file plus instrumented line.
pub type Statement = (String, u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawCoverageRecord {
    pub file: String,
    pub line: u32,
    pub count: u64,
}

/// Per-file execution counts for one compilation.
///
/// Zero-count lines are kept: they are instrumented but were not executed.
/// A statement is executed only when its count is positive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSpectrum {
    files: BTreeMap<String, BTreeMap<u32, u64>>,
}

impl CoverageSpectrum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records<I: IntoIterator<Item = RawCoverageRecord>>(records: I) -> Self {
        let mut spectrum = Self::new();
        for r in records {
            spectrum.add(&r.file, r.line, r.count);
        }
        spectrum
    }

    /// Adds `count` executions of `(file, line)`, summing with any existing count.
    pub fn add(&mut self, file: &str, line: u32, count: u64) {
        *self
            .files
            .entry(file.to_string())
            .or_default()
            .entry(line)
            .or_insert(0) += count;
    }

    pub fn count(&self, file: &str, line: u32) -> Option<u64> {
        self.files.get(file)?.get(&line).copied()
    }

    pub fn is_executed(&self, file: &str, line: u32) -> bool {
        self.count(file, line).is_some_and(|c| c > 0)
    }

    /// Executed statements in (file, line) order.
    pub fn executed(&self) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.files.iter().flat_map(|(file, lines)| {
            lines
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(move |(&line, _)| (file.as_str(), line))
        })
    }

    pub fn executed_set(&self) -> BTreeSet<Statement> {
        self.executed().map(|(f, l)| (f.to_string(), l)).collect()
    }

    pub fn executed_in_file<'a>(&'a self, file: &str) -> impl Iterator<Item = u32> + 'a {
        self.files
            .get(file)
            .into_iter()
            .flat_map(|lines| lines.iter().filter(|(_, &c)| c > 0).map(|(&l, _)| l))
    }

    pub fn executed_count(&self) -> usize {
        self.executed().count()
    }

    /// Files with at least one instrumented line, executed or not.
    pub fn files(&self) -> impl Iterator<Item = &str> + '_ {
        self.files.keys().map(String::as_str)
    }

    pub fn covered_files(&self) -> BTreeSet<String> {
        self.files
            .iter()
            .filter(|(_, lines)| lines.values().any(|&c| c > 0))
            .map(|(f, _)| f.clone())
            .collect()
    }

    pub fn records(&self) -> Vec<RawCoverageRecord> {
        self.files
            .iter()
            .flat_map(|(file, lines)| {
                lines.iter().map(move |(&line, &count)| RawCoverageRecord {
                    file: file.clone(),
                    line,
                    count,
                })
            })
            .collect()
    }

    pub fn to_canonical(&self) -> String {
        print_canonical(&self.records())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageFormat {
    Canonical,
    GcovIntermediate,
}

impl FromStr for CoverageFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(Self::Canonical),
            "gcov" | "gcov_intermediate" | "gcov-intermediate" => Ok(Self::GcovIntermediate),
            other => Err(format!("unknown coverage format `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("coverage parse error at line {line}: {message}")]
pub struct CoverageParseError {
    pub line: usize,
    pub message: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> CoverageParseError {
    CoverageParseError {
        line,
        message: message.into(),
    }
}

/// Parses coverage text, merging duplicate `(file, line)` entries by summing
/// counts. Output is sorted by `(file, line)`.
pub fn parse_coverage(
    text: &str,
    format: CoverageFormat,
) -> Result<Vec<RawCoverageRecord>, CoverageParseError> {
    let mut merged: BTreeMap<(String, u32), u64> = BTreeMap::new();
    match format {
        CoverageFormat::Canonical => {
            for (i, raw) in text.lines().enumerate() {
                let lineno = i + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                let mut fields = raw.split('\t');
                let (Some(file), Some(line), Some(count), None) =
                    (fields.next(), fields.next(), fields.next(), fields.next())
                else {
                    return Err(parse_err(lineno, "expected `file<TAB>line<TAB>count`"));
                };
                if file.is_empty() {
                    return Err(parse_err(lineno, "empty file name"));
                }
                let line = parse_line_number(line, lineno)?;
                let count: u64 = count
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad count `{count}`")))?;
                *merged.entry((file.to_string(), line)).or_insert(0) += count;
            }
        }
        CoverageFormat::GcovIntermediate => {
            let mut current: Option<String> = None;
            for (i, raw) in text.lines().enumerate() {
                let lineno = i + 1;
                let raw = raw.trim_end();
                if let Some(path) = raw.strip_prefix("file:") {
                    if path.is_empty() {
                        return Err(parse_err(lineno, "empty file name"));
                    }
                    current = Some(path.to_string());
                } else if let Some(rest) = raw.strip_prefix("lcount:") {
                    let file = current
                        .as_ref()
                        .ok_or_else(|| parse_err(lineno, "lcount before any file: header"))?;
                    // lcount:<line>,<count>[,<has_unexecuted_block>]
                    let mut parts = rest.split(',');
                    let (Some(line), Some(count)) = (parts.next(), parts.next()) else {
                        return Err(parse_err(lineno, "expected `lcount:<line>,<count>`"));
                    };
                    let line = parse_line_number(line, lineno)?;
                    let count: u64 = count
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad count `{count}`")))?;
                    *merged.entry((file.clone(), line)).or_insert(0) += count;
                }
            }
        }
    }
    Ok(merged
        .into_iter()
        .map(|((file, line), count)| RawCoverageRecord { file, line, count })
        .collect())
}

fn parse_line_number(text: &str, lineno: usize) -> Result<u32, CoverageParseError> {
    match text.trim().parse::<u32>() {
        Ok(0) => Err(parse_err(lineno, "line numbers start at 1")),
        Ok(n) => Ok(n),
        Err(_) => Err(parse_err(lineno, format!("bad line number `{text}`"))),
    }
}

/// Canonical form: `file<TAB>line<TAB>count`, sorted by `(file, line)`.
pub fn print_canonical(records: &[RawCoverageRecord]) -> String {
    let mut sorted: Vec<&RawCoverageRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.file, a.line).cmp(&(&b.file, b.line)));
    let mut out = String::new();
    for r in sorted {
        let _ = writeln!(out, "{}\t{}\t{}", r.file, r.line, r.count);
    }
    out
}
