use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::sbfl::FileRanking;

/// Cut-offs reported as Top-N.
pub const TOP_N: [u32; 4] = [1, 5, 10, 20];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bug_id: String,
    pub faulty_files: BTreeSet<String>,
}

impl GroundTruth {
    pub fn new<I, S>(bug_id: impl Into<String>, files: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let bug_id = bug_id.into();
        let faulty_files: BTreeSet<String> = files.into_iter().map(Into::into).collect();
        if faulty_files.is_empty() {
            return Err(EvalError::EmptyGroundTruth(bug_id));
        }
        Ok(Self {
            bug_id,
            faulty_files,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugScore {
    pub first_rank: u32,
    pub mean_rank: f64,
    /// Whether the first faulty file is within each Top-N cut-off.
    pub hits: BTreeMap<u32, bool>,
}

/// Locates the faulty files in a ranking. A faulty file missing from the
/// ranking counts as rank `|ranking| + 1`.
pub fn score_ranking(ranking: &FileRanking, truth: &GroundTruth) -> BugScore {
    let penalty = ranking.len() as u32 + 1;
    let ranks: Vec<u32> = truth
        .faulty_files
        .iter()
        .map(|f| ranking.rank_of(f).unwrap_or(penalty))
        .collect();
    let first_rank = ranks.iter().copied().min().unwrap_or(penalty);
    let mean_rank = ranks.iter().map(|&r| f64::from(r)).sum::<f64>() / ranks.len().max(1) as f64;
    BugScore {
        first_rank,
        mean_rank,
        hits: TOP_N.iter().map(|&n| (n, first_rank <= n)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bugs: usize,
    pub top_n: BTreeMap<u32, usize>,
    pub mfr: f64,
    pub mar: f64,
    pub per_bug: BTreeMap<String, BugScore>,
}

impl MetricsReport {
    pub fn top(&self, n: u32) -> usize {
        self.top_n.get(&n).copied().unwrap_or(0)
    }
}

pub fn corpus_metrics(results: &[(FileRanking, GroundTruth)]) -> Result<MetricsReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let per_bug: BTreeMap<String, BugScore> = results
        .iter()
        .map(|(ranking, truth)| (truth.bug_id.clone(), score_ranking(ranking, truth)))
        .collect();
    Ok(metrics_from_scores(per_bug))
}

pub fn metrics_from_scores(per_bug: BTreeMap<String, BugScore>) -> MetricsReport {
    let n = per_bug.len().max(1) as f64;
    let top_n = TOP_N
        .iter()
        .map(|&cut| {
            (
                cut,
                per_bug.values().filter(|s| s.first_rank <= cut).count(),
            )
        })
        .collect();
    MetricsReport {
        bugs: per_bug.len(),
        top_n,
        mfr: per_bug
            .values()
            .map(|s| f64::from(s.first_rank))
            .sum::<f64>()
            / n,
        mar: per_bug.values().map(|s| s.mean_rank).sum::<f64>() / n,
        per_bug,
    }
}
