//! Statement suspiciousness, file aggregation and per-pair file rankings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Configuration;
use crate::coverage::CoverageSpectrum;
use crate::pipeline::{AdversarialPair, CandidateSet};

#[derive(Debug, Error, PartialEq)]
pub enum SbflError {
    #[error("invalid spectrum counts: {0}")]
    InvalidCounts(String),
    #[error("no spectrum recorded for configuration `{0}`")]
    MissingSpectrum(String),
    #[error("file `{0}` has no scored statements")]
    EmptyFile(String),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    #[default]
    Ochiai,
    Tarantula,
    /// DStar with exponent 2.
    DStar2,
    Dice,
    Barinel,
    Op2,
}

impl Formula {
    pub const ALL: [Formula; 6] = [
        Formula::Ochiai,
        Formula::Tarantula,
        Formula::DStar2,
        Formula::Dice,
        Formula::Barinel,
        Formula::Op2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Formula::Ochiai => "Ochiai",
            Formula::Tarantula => "Tarantula",
            Formula::DStar2 => "DStar",
            Formula::Dice => "Dice",
            Formula::Barinel => "Barinel",
            Formula::Op2 => "Op2",
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formula {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ochiai" => Ok(Formula::Ochiai),
            "tarantula" => Ok(Formula::Tarantula),
            "dstar" | "dstar2" | "d*" => Ok(Formula::DStar2),
            "dice" => Ok(Formula::Dice),
            "barinel" => Ok(Formula::Barinel),
            "op2" => Ok(Formula::Op2),
            other => Err(format!("unknown formula `{other}`")),
        }
    }
}

/// Executions covering / not covering a statement, split by verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectrumCounts {
    pub ef: u32,
    pub nf: u32,
    pub ep: u32,
    pub np: u32,
}

impl SpectrumCounts {
    pub fn new(ef: u32, nf: u32, ep: u32, np: u32) -> Self {
        Self { ef, nf, ep, np }
    }

    /// Builds counts from signed values, rejecting negatives.
    pub fn from_signed(ef: i64, nf: i64, ep: i64, np: i64) -> Result<Self, SbflError> {
        let conv = |name: &str, v: i64| {
            u32::try_from(v).map_err(|_| SbflError::InvalidCounts(format!("{name} = {v}")))
        };
        Ok(Self {
            ef: conv("ef", ef)?,
            nf: conv("nf", nf)?,
            ep: conv("ep", ep)?,
            np: conv("np", np)?,
        })
    }

    pub fn total_failed(&self) -> u32 {
        self.ef + self.nf
    }

    pub fn total_passed(&self) -> u32 {
        self.ep + self.np
    }
}

/// Suspiciousness of one statement.
///
/// Zero denominators give 0, except DStar with `ep + nf = 0` and `ef > 0`,
/// which gives `+inf`; rankings replace that sentinel with the largest finite
/// statement score of the pair.
pub fn statement_suspiciousness(c: SpectrumCounts, formula: Formula) -> f64 {
    let ef = f64::from(c.ef);
    let nf = f64::from(c.nf);
    let ep = f64::from(c.ep);
    let totalf = f64::from(c.total_failed());
    let totalp = f64::from(c.total_passed());
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    match formula {
        Formula::Ochiai => ratio(ef, ((ef + nf) * (ef + ep)).sqrt()),
        Formula::Tarantula => {
            let fail = ratio(ef, totalf);
            let pass = ratio(ep, totalp);
            ratio(fail, fail + pass)
        }
        Formula::DStar2 => {
            if ep + nf == 0.0 {
                if ef > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                ef * ef / (ep + nf)
            }
        }
        Formula::Dice => ratio(2.0 * ef, ef + nf + ep),
        Formula::Barinel => {
            if ep + ef == 0.0 {
                0.0
            } else {
                1.0 - ep / (ep + ef)
            }
        }
        Formula::Op2 => ef - ep / (totalp + 1.0),
    }
}

/// Counts for one statement within a pair: the failing configuration is the
/// single failing execution, each passing configuration one passing run.
pub fn pair_spectrum_counts(
    pair: &AdversarialPair,
    spectra: &BTreeMap<Configuration, CoverageSpectrum>,
    file: &str,
    line: u32,
) -> Result<SpectrumCounts, SbflError> {
    let lookup = |c: &Configuration| {
        spectra
            .get(c)
            .ok_or_else(|| SbflError::MissingSpectrum(c.to_string()))
    };
    let ef = u32::from(lookup(&pair.fail_conf)?.is_executed(file, line));
    let mut ep = 0;
    for pc in &pair.pass_confs {
        if lookup(pc)?.is_executed(file, line) {
            ep += 1;
        }
    }
    let passes = pair.pass_confs.len() as u32;
    Ok(SpectrumCounts {
        ef,
        nf: 1 - ef,
        ep,
        np: passes - ep,
    })
}

/// Mean of the statement scores of one file.
pub fn file_suspiciousness(file: &str, scored_statements: &[f64]) -> Result<f64, SbflError> {
    if scored_statements.is_empty() {
        return Err(SbflError::EmptyFile(file.to_string()));
    }
    Ok(scored_statements.iter().sum::<f64>() / scored_statements.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFile {
    pub file: String,
    pub score: f64,
    pub rank: u32,
}

/// Files ordered by descending suspiciousness with competition ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRanking {
    pub pair_id: String,
    pub entries: Vec<RankedFile>,
}

impl FileRanking {
    /// Sorts `(file, score)` by score descending then name, and assigns
    /// competition ranks (`1 + #strictly greater`).
    ///
    /// Scores equal to 12 decimal places tie, so summation-order noise in
    /// file means never splits a tie.
    pub fn from_scores(pair_id: impl Into<String>, scores: Vec<(String, f64)>) -> Self {
        let mut keyed: Vec<(f64, String, f64)> = scores
            .into_iter()
            .map(|(file, score)| (tie_key(score), file, score))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let mut entries: Vec<RankedFile> = Vec::with_capacity(keyed.len());
        let mut prev_key = None;
        for (i, (key, file, score)) in keyed.into_iter().enumerate() {
            let rank = match (prev_key, entries.last()) {
                (Some(k), Some(prev)) if k == key => prev.rank,
                _ => i as u32 + 1,
            };
            prev_key = Some(key);
            entries.push(RankedFile { file, score, rank });
        }
        Self {
            pair_id: pair_id.into(),
            entries,
        }
    }

    pub fn rank_of(&self, file: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.file == file).map(|e| e.rank)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `rank<TAB>file<TAB>score`, scores to six decimals, sorted by
    /// `(rank, file)`.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<&RankedFile> = self.entries.iter().collect();
        rows.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.file.cmp(&b.file)));
        let mut out = String::new();
        for e in rows {
            let _ = writeln!(out, "{}\t{}\t{:.6}", e.rank, e.file, e.score);
        }
        out
    }
}

fn tie_key(score: f64) -> f64 {
    if score.is_finite() {
        (score * 1e12).round()
    } else {
        score
    }
}

/// Ranks the candidate files for one pair.
///
/// Only statements executed by the failing configuration inside suspicious
/// files are scored; each file's score is the mean over those statements.
pub fn rank_files(
    pair: &AdversarialPair,
    spectra: &BTreeMap<Configuration, CoverageSpectrum>,
    candidates: &CandidateSet,
    formula: Formula,
) -> Result<FileRanking, SbflError> {
    let fail = spectra
        .get(&pair.fail_conf)
        .ok_or_else(|| SbflError::MissingSpectrum(pair.fail_conf.to_string()))?;

    let mut per_file: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (file, line) in fail.executed() {
        if !candidates.suspicious_files.contains(file) {
            continue;
        }
        let counts = pair_spectrum_counts(pair, spectra, file, line)?;
        per_file
            .entry(file)
            .or_default()
            .push(statement_suspiciousness(counts, formula));
    }

    let max_finite = per_file
        .values()
        .flatten()
        .copied()
        .filter(|s| s.is_finite())
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.max(s)))
        });
    // with no finite score at all every statement ties; ef^2 = 1 stands in
    let cap = max_finite.unwrap_or(1.0);

    let mut scores = Vec::with_capacity(per_file.len());
    for (file, mut stmts) in per_file {
        for s in stmts.iter_mut() {
            if s.is_infinite() {
                *s = cap;
            }
        }
        scores.push((file.to_string(), file_suspiciousness(file, &stmts)?));
    }
    Ok(FileRanking::from_scores(pair.id.clone(), scores))
}

/// Every file that `rank_files` would rank, for cross-checks.
pub fn rankable_files(fail: &CoverageSpectrum, candidates: &CandidateSet) -> BTreeSet<String> {
    fail.covered_files()
        .intersection(&candidates.suspicious_files)
        .cloned()
        .collect()
}
