//! Ablation runs over a corpus of bug models.
//!
//! Every variant localizes every bug on its own. The reference variant is
//! three aggregated pairs with Ochiai and candidate filtering; the other
//! variants change one of those settings. Variants are compared with the
//! reference on per-bug first-rank samples (lower is better, so an effect
//! size below 0.5 favours the variant).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_from_scores, score_ranking, BugScore, GroundTruth, MetricsReport};
use super::stats::{a12, mann_whitney_u, PValueMethod};
use super::EvalError;
use crate::config::{Configuration, TestProgram};
use crate::drivers::{load_bug_model_file, simulate, BugModel, ModelError, SimulatedDriver};
use crate::localize::{localize, LocalizeError, LocalizeReport, LocalizeSettings};
use crate::pipeline::{DisableFraction, Granularity};
use crate::sbfl::Formula;

/// How missing faulty files enter the metrics.
pub const RANK_PENALTY_NOTE: &str =
    "a faulty file absent from a ranking counts as rank |ranking|+1";
/// How comparison samples are built.
pub const SAMPLE_NOTE: &str =
    "comparisons use per-bug first ranks of the variant (x) against the reference (y); A12 < 0.5 favours the variant";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Pairs,
    Filter,
    Formula,
    All,
}

impl FromStr for Ablation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pairs" => Ok(Ablation::Pairs),
            "filter" => Ok(Ablation::Filter),
            "formula" => Ok(Ablation::Formula),
            "all" => Ok(Ablation::All),
            other => Err(format!("unknown ablation `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub ablation: Ablation,
    /// Bugs localized concurrently.
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
    pub model: BugModel,
}

/// Models that failed to load, with the reason.
pub type LoadErrors = Vec<(PathBuf, ModelError)>;

/// Loads every `*.json` model in `dir`, sorted by file name. Models that fail
/// to load are returned separately with their error.
pub fn load_corpus(dir: &Path) -> std::io::Result<(Vec<CorpusEntry>, LoadErrors)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        match load_bug_model_file(&path) {
            Ok(model) => entries.push(CorpusEntry {
                id: model.id.clone(),
                path,
                model,
            }),
            Err(e) => errors.push((path, e)),
        }
    }
    Ok((entries, errors))
}

/// Lowest level whose bare configuration yields the model's failing outcome.
pub fn failing_level(model: &BugModel) -> Result<String, EvalError> {
    for level in &model.levels {
        let conf = Configuration::level_only(level.clone());
        if let Ok((outcome, _)) = simulate(model, &TestProgram::inert(), &conf) {
            if outcome == model.fail_outcome {
                return Ok(level.label.clone());
            }
        }
    }
    Err(EvalError::NoFailingLevel(model.id.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub group: String,
    pub pairs: usize,
    /// Set for single-pair variants.
    pub fraction: Option<DisableFraction>,
    pub formula: Formula,
    pub filter: bool,
}

impl Variant {
    fn reference() -> Self {
        Variant {
            name: "k=3".into(),
            group: "pairs".into(),
            pairs: 3,
            fraction: None,
            formula: Formula::Ochiai,
            filter: true,
        }
    }

    fn settings(&self, fail_level: &str) -> LocalizeSettings {
        let mut s = LocalizeSettings::new(fail_level);
        s.pairs = self.pairs;
        s.schedule = self.fraction.map(|f| vec![f]);
        s.formula = self.formula;
        s.filter = self.filter;
        s
    }
}

/// Variants run for an ablation, each group listing the reference first.
pub fn variants(ablation: Ablation) -> Vec<Variant> {
    let reference = Variant::reference();
    let mut out = vec![];
    if matches!(ablation, Ablation::Pairs | Ablation::All) {
        for k in [1, 3, 5, 10] {
            out.push(Variant {
                name: format!("k={k}"),
                pairs: k,
                ..reference.clone()
            });
        }
        for f in [
            DisableFraction::new(1, 1),
            DisableFraction::new(1, 2),
            DisableFraction::new(0, 1),
        ] {
            out.push(Variant {
                name: format!("single({f})"),
                pairs: 1,
                fraction: Some(f),
                ..reference.clone()
            });
        }
    }
    if matches!(ablation, Ablation::Filter | Ablation::All) {
        for filter in [true, false] {
            out.push(Variant {
                name: if filter { "filter" } else { "no-filter" }.into(),
                group: "filter".into(),
                filter,
                ..reference.clone()
            });
        }
    }
    if matches!(ablation, Ablation::Formula | Ablation::All) {
        for f in Formula::ALL {
            out.push(Variant {
                name: f.name().into(),
                group: "formula".into(),
                formula: f,
                ..reference.clone()
            });
        }
    }
    out
}

fn same_run(a: &Variant, b: &Variant) -> bool {
    a.pairs == b.pairs && a.fraction == b.fraction && a.formula == b.formula && a.filter == b.filter
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSizes {
    pub all: usize,
    pub covered: usize,
    pub suspicious: usize,
    /// Whether every faulty file survived filtering.
    pub faulty_kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugRun {
    pub score: BugScore,
    /// First faulty-file rank in each individual pair ranking.
    pub pair_first_ranks: BTreeMap<String, u32>,
    pub level_fallback: bool,
    pub candidates: CandidateSizes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: Variant,
    pub metrics: MetricsReport,
    pub runs: BTreeMap<String, BugRun>,
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub group: String,
    pub variant: String,
    pub reference: String,
    pub bugs: usize,
    pub a12: f64,
    pub u: f64,
    pub p_value: f64,
    pub method: PValueMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub mean_all: f64,
    pub mean_covered: f64,
    pub mean_suspicious: f64,
    /// Bugs whose faulty files were all kept by the filter.
    pub faulty_kept: usize,
    pub bugs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub corpus: Vec<String>,
    pub ablation: Ablation,
    pub rank_penalty: String,
    pub sample_construction: String,
    pub results: Vec<VariantResult>,
    pub comparisons: Vec<Comparison>,
    pub candidates: Option<CandidateSummary>,
    /// Bugs the aggregated three-pair ranking puts at Top-1 although none of
    /// its individual pairs does.
    pub aggregation_only_top1: Vec<String>,
    /// Top-1 range across formulae, when the formula sweep ran.
    pub formula_top1_spread: Option<usize>,
    pub pairs_checked: usize,
    pub structure_violations: usize,
}

impl BenchReport {
    pub fn result(&self, name: &str) -> Option<&VariantResult> {
        self.results.iter().find(|r| r.variant.name == name)
    }

    /// Fixed-width table, one row per variant.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:<16} {:>5} {:>5} {:>5} {:>6} {:>6} {:>8} {:>8} {:>7} {:>9}",
            "group", "variant", "bugs", "top1", "top5", "top10", "top20", "MFR", "MAR", "A12", "p"
        );
        let mut seen_groups = Vec::new();
        for r in &self.results {
            let group = &r.variant.group;
            let cmp = self
                .comparisons
                .iter()
                .find(|c| &c.group == group && c.variant == r.variant.name);
            let (a, p) = match cmp {
                Some(c) => (format!("{:.3}", c.a12), format!("{:.4}", c.p_value)),
                None => ("-".into(), "-".into()),
            };
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<10} {:<16} {:>5} {:>5} {:>5} {:>6} {:>6} {:>8.2} {:>8.2} {:>7} {:>9}",
                if seen_groups.contains(group) {
                    ""
                } else {
                    group.as_str()
                },
                r.variant.name,
                m.bugs,
                m.top(1),
                m.top(5),
                m.top(10),
                m.top(20),
                m.mfr,
                m.mar,
                a,
                p
            );
            seen_groups.push(group.clone());
        }
        if let Some(c) = &self.candidates {
            let _ = writeln!(
                out,
                "\ncandidate files (mean per bug): all {:.1} -> covered {:.1} -> suspicious {:.1}; faulty kept in {}/{} bugs",
                c.mean_all, c.mean_covered, c.mean_suspicious, c.faulty_kept, c.bugs
            );
        }
        if !self.aggregation_only_top1.is_empty() {
            let _ = writeln!(
                out,
                "top-1 only after aggregation: {}",
                self.aggregation_only_top1.join(", ")
            );
        }
        if let Some(s) = self.formula_top1_spread {
            let _ = writeln!(out, "top-1 spread across formulae: {s}");
        }
        let _ = writeln!(
            out,
            "pairs checked: {}, structure violations: {}",
            self.pairs_checked, self.structure_violations
        );
        let _ = writeln!(out, "note: {RANK_PENALTY_NOTE}; {SAMPLE_NOTE}");
        out
    }
}

fn bug_run(entry: &CorpusEntry, report: &LocalizeReport) -> BugRun {
    let truth = GroundTruth {
        bug_id: entry.id.clone(),
        faulty_files: entry.model.faulty_files.clone(),
    };
    let score = score_ranking(&report.aggregate.to_file_ranking(), &truth);
    let pair_first_ranks = report
        .rankings
        .iter()
        .map(|r| (r.pair_id.clone(), score_ranking(r, &truth).first_rank))
        .collect();
    let c = &report.candidates;
    BugRun {
        score,
        pair_first_ranks,
        level_fallback: report
            .pairs
            .iter()
            .any(|p| p.granularity == Granularity::LevelOnly),
        candidates: CandidateSizes {
            all: c.all_files.len(),
            covered: c.covered_files.len(),
            suspicious: c.suspicious_files.len(),
            faulty_kept: truth.faulty_files.is_subset(&c.suspicious_files),
        },
    }
}

struct Outcome {
    run: Result<BugRun, String>,
    pairs: usize,
    violation: bool,
}

fn run_one(entry: &CorpusEntry, variant: &Variant) -> Outcome {
    let level = match failing_level(&entry.model) {
        Ok(l) => l,
        Err(e) => {
            return Outcome {
                run: Err(e.to_string()),
                pairs: 0,
                violation: false,
            }
        }
    };
    let driver = SimulatedDriver::new(entry.model.clone());
    match localize(&driver, &TestProgram::inert(), &variant.settings(&level)) {
        Ok(report) => Outcome {
            pairs: report.pairs.len(),
            run: Ok(bug_run(entry, &report)),
            violation: false,
        },
        Err(e) => Outcome {
            violation: matches!(e, LocalizeError::Structure { .. }),
            run: Err(e.to_string()),
            pairs: 0,
        },
    }
}

/// Runs every variant of the ablation over the corpus.
pub fn run_ablations(
    corpus: &[CorpusEntry],
    settings: &BenchSettings,
) -> Result<BenchReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs.max(1))
        .build()
        .expect("thread pool");

    let wanted = variants(settings.ablation);
    let mut distinct: Vec<Variant> = Vec::new();
    for v in &wanted {
        if !distinct.iter().any(|d| same_run(d, v)) {
            distinct.push(v.clone());
        }
    }
    let outcomes: Vec<Vec<Outcome>> = pool.install(|| {
        distinct
            .iter()
            .map(|v| corpus.par_iter().map(|e| run_one(e, v)).collect())
            .collect()
    });
    let pairs_checked = outcomes.iter().flatten().map(|o| o.pairs).sum();
    let structure_violations = outcomes.iter().flatten().filter(|o| o.violation).count();

    let mut results = Vec::new();
    for v in &wanted {
        let idx = distinct
            .iter()
            .position(|d| same_run(d, v))
            .expect("deduplicated");
        let mut runs = BTreeMap::new();
        let mut failures = BTreeMap::new();
        for (entry, o) in corpus.iter().zip(&outcomes[idx]) {
            match &o.run {
                Ok(r) => {
                    runs.insert(entry.id.clone(), r.clone());
                }
                Err(e) => {
                    failures.insert(entry.id.clone(), e.clone());
                }
            }
        }
        let metrics = metrics_from_scores(
            runs.iter()
                .map(|(id, r)| (id.clone(), r.score.clone()))
                .collect(),
        );
        results.push(VariantResult {
            variant: v.clone(),
            metrics,
            runs,
            failures,
        });
    }

    let mut comparisons = Vec::new();
    let reference = Variant::reference();
    let reference_result = results.iter().find(|r| same_run(&r.variant, &reference));
    if let Some(base) = reference_result {
        for r in &results {
            if same_run(&r.variant, &reference) {
                continue;
            }
            let common: Vec<&String> = r
                .runs
                .keys()
                .filter(|k| base.runs.contains_key(*k))
                .collect();
            let x: Vec<f64> = common
                .iter()
                .map(|k| f64::from(r.runs[*k].score.first_rank))
                .collect();
            let y: Vec<f64> = common
                .iter()
                .map(|k| f64::from(base.runs[*k].score.first_rank))
                .collect();
            if let (Ok(a), Ok(mw)) = (a12(&x, &y), mann_whitney_u(&x, &y)) {
                comparisons.push(Comparison {
                    group: r.variant.group.clone(),
                    variant: r.variant.name.clone(),
                    reference: reference.name.clone(),
                    bugs: common.len(),
                    a12: a,
                    u: mw.u,
                    p_value: mw.p_value,
                    method: mw.method,
                });
            }
        }
    }

    let candidates = results
        .iter()
        .find(|r| r.variant.filter && !r.runs.is_empty())
        .map(|r| {
            let n = r.runs.len() as f64;
            let mean = |f: fn(&CandidateSizes) -> usize| {
                r.runs
                    .values()
                    .map(|b| f(&b.candidates) as f64)
                    .sum::<f64>()
                    / n
            };
            CandidateSummary {
                mean_all: mean(|c| c.all),
                mean_covered: mean(|c| c.covered),
                mean_suspicious: mean(|c| c.suspicious),
                faulty_kept: r.runs.values().filter(|b| b.candidates.faulty_kept).count(),
                bugs: r.runs.len(),
            }
        });

    let aggregation_only_top1 = reference_result
        .map(|base| {
            base.runs
                .iter()
                .filter(|(_, b)| {
                    b.score.first_rank == 1 && b.pair_first_ranks.values().all(|&r| r > 1)
                })
                .map(|(id, _)| id.clone())
                .collect()
        })
        .unwrap_or_default();

    let formula_top1: Vec<usize> = results
        .iter()
        .filter(|r| r.variant.group == "formula")
        .map(|r| r.metrics.top(1))
        .collect();
    let formula_top1_spread = (!formula_top1.is_empty())
        .then(|| formula_top1.iter().max().unwrap() - formula_top1.iter().min().unwrap());

    Ok(BenchReport {
        corpus: corpus.iter().map(|e| e.id.clone()).collect(),
        ablation: settings.ablation,
        rank_penalty: RANK_PENALTY_NOTE.into(),
        sample_construction: SAMPLE_NOTE.into(),
        results,
        comparisons,
        candidates,
        aggregation_only_top1,
        formula_top1_spread,
        pairs_checked,
        structure_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::BugModel;
    use crate::evaluation::generate_corpus;

    fn corpus(n: usize) -> Vec<CorpusEntry> {
        generate_corpus(3, n)
            .into_iter()
            .enumerate()
            .map(|(i, doc)| {
                let id = format!("g{i:02}");
                CorpusEntry {
                    path: PathBuf::from(format!("{id}.json")),
                    model: BugModel::from_document(doc, &id).unwrap(),
                    id,
                }
            })
            .collect()
    }

    #[test]
    fn variant_lists() {
        let names = |a| -> Vec<String> { variants(a).into_iter().map(|v| v.name).collect() };
        assert_eq!(
            names(Ablation::Pairs),
            vec![
                "k=1",
                "k=3",
                "k=5",
                "k=10",
                "single(1)",
                "single(1/2)",
                "single(0)"
            ]
        );
        assert_eq!(names(Ablation::Filter), vec!["filter", "no-filter"]);
        assert_eq!(
            names(Ablation::Formula),
            vec!["Ochiai", "Tarantula", "DStar", "Dice", "Barinel", "Op2"]
        );
    }

    #[test]
    fn ablation_runs_are_deterministic() {
        let c = corpus(6);
        let s1 = BenchSettings {
            ablation: Ablation::All,
            jobs: 1,
        };
        let s4 = BenchSettings {
            ablation: Ablation::All,
            jobs: 4,
        };
        let a = run_ablations(&c, &s1).unwrap();
        let b = run_ablations(&c, &s4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.structure_violations, 0);
        assert!(a.results.iter().all(|r| r.failures.is_empty()));
    }

    #[test]
    fn empty_corpus() {
        let s = BenchSettings {
            ablation: Ablation::Pairs,
            jobs: 1,
        };
        assert_eq!(run_ablations(&[], &s).unwrap_err(), EvalError::EmptyCorpus);
    }
}
