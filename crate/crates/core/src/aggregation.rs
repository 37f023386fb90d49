//! Rank-weighted voting over per-pair file rankings.
//!
//! A file's vote from one ranking depends only on its rank there:
//!
//! | rank      | vote   |
//! |-----------|--------|
//! | 1         | 5      |
//! | 2..=5     | 4      |
//! | 6..=10    | 3      |
//! | 11..=20   | 2      |
//! | > 20      | 1/rank |
//!
//! Files missing from a ranking get nothing from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sbfl::FileRanking;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AggregationError {
    #[error("rank must be at least 1, got {0}")]
    InvalidRank(u32),
    #[error("no rankings to aggregate")]
    EmptyInput,
}

pub fn vote_weight(rank: u32) -> Result<f64, AggregationError> {
    Ok(match rank {
        0 => return Err(AggregationError::InvalidRank(0)),
        1 => 5.0,
        2..=5 => 4.0,
        6..=10 => 3.0,
        11..=20 => 2.0,
        r => 1.0 / f64::from(r),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteCast {
    pub pair_id: String,
    pub rank: u32,
    pub vote: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub file: String,
    pub total: f64,
    pub rank: u32,
    /// One slot per input ranking (in `AggregatedRanking::pair_ids` order).
    pub ranks: Vec<Option<u32>>,
    pub votes: Vec<VoteCast>,
}

impl AggregateEntry {
    pub fn best_rank(&self) -> Option<u32> {
        self.ranks.iter().flatten().copied().min()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedRanking {
    pub pair_ids: Vec<String>,
    pub entries: Vec<AggregateEntry>,
}

impl AggregatedRanking {
    pub fn rank_of(&self, file: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.file == file).map(|e| e.rank)
    }

    pub fn total_of(&self, file: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.file == file)
            .map(|e| e.total)
    }

    /// The aggregate as a plain ranking scored by total vote.
    pub fn to_file_ranking(&self) -> FileRanking {
        FileRanking {
            pair_id: "aggregate".to_string(),
            entries: self
                .entries
                .iter()
                .map(|e| crate::sbfl::RankedFile {
                    file: e.file.clone(),
                    score: e.total,
                    rank: e.rank,
                })
                .collect(),
        }
    }

    /// `rank<TAB>file<TAB>total_vote<TAB>per-pair ranks`, per-pair ranks
    /// comma-separated with `-` for absent.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let ranks: Vec<String> = e
                .ranks
                .iter()
                .map(|r| r.map_or_else(|| "-".to_string(), |r| r.to_string()))
                .collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{}",
                e.rank,
                e.file,
                e.total,
                ranks.join(",")
            );
        }
        out
    }
}

/// Combines several rankings into one.
pub trait RankAggregator {
    fn aggregate(&self, rankings: &[FileRanking]) -> Result<AggregatedRanking, AggregationError>;
}

/// The rank-bucket voting scheme described in the module docs.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeightedVoting;

impl RankAggregator for WeightedVoting {
    fn aggregate(&self, rankings: &[FileRanking]) -> Result<AggregatedRanking, AggregationError> {
        aggregate(rankings)
    }
}

fn pair_order(id: &str) -> (usize, &str) {
    (id.len(), id)
}

/// Sums votes per file and ranks by total.
///
/// Order: total descending, then best single-pair rank, then file name.
/// Final ranks are competition ranks over totals. Pair columns are ordered by
/// pair id, so the result does not depend on the order rankings are given in.
pub fn aggregate(rankings: &[FileRanking]) -> Result<AggregatedRanking, AggregationError> {
    if rankings.is_empty() {
        return Err(AggregationError::EmptyInput);
    }
    let mut ordered: Vec<&FileRanking> = rankings.iter().collect();
    ordered.sort_by(|a, b| pair_order(&a.pair_id).cmp(&pair_order(&b.pair_id)));
    let pair_ids: Vec<String> = ordered.iter().map(|r| r.pair_id.clone()).collect();

    let mut per_file: BTreeMap<&str, (Vec<Option<u32>>, Vec<VoteCast>)> = BTreeMap::new();
    for (slot, ranking) in ordered.iter().enumerate() {
        for entry in &ranking.entries {
            let (ranks, votes) = per_file
                .entry(entry.file.as_str())
                .or_insert_with(|| (vec![None; ordered.len()], Vec::new()));
            ranks[slot] = Some(entry.rank);
            votes.push(VoteCast {
                pair_id: ranking.pair_id.clone(),
                rank: entry.rank,
                vote: vote_weight(entry.rank)?,
            });
        }
    }

    let mut entries: Vec<AggregateEntry> = per_file
        .into_iter()
        .map(|(file, (ranks, votes))| {
            let mut sorted: Vec<f64> = votes.iter().map(|v| v.vote).collect();
            sorted.sort_by(f64::total_cmp);
            AggregateEntry {
                file: file.to_string(),
                total: sorted.iter().sum(),
                rank: 0,
                ranks,
                votes,
            }
        })
        .collect();

    let key = |t: f64| (t * 1e9).round();
    entries.sort_by(|a, b| {
        key(b.total)
            .total_cmp(&key(a.total))
            .then_with(|| a.best_rank().cmp(&b.best_rank()))
            .then_with(|| a.file.cmp(&b.file))
    });
    for i in 0..entries.len() {
        entries[i].rank = if i > 0 && key(entries[i - 1].total) == key(entries[i].total) {
            entries[i - 1].rank
        } else {
            i as u32 + 1
        };
    }
    Ok(AggregatedRanking { pair_ids, entries })
}
