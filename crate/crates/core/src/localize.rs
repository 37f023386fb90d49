//! End-to-end localization of one bug: filter, triage, pairs, rank, vote.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::aggregation::{aggregate, AggregatedRanking, AggregationError};
use crate::config::{
    CompilationOutcome, CompilerDriver, Configuration, DriverError, OptimizationLevel, TestProgram,
};
use crate::coverage::CoverageSpectrum;
use crate::pipeline::{
    build_pair_suite, build_pair_suite_with, filter_candidates, triage_options, AdversarialPair,
    CandidateSet, DiffMode, DisableFraction, Executor, PipelineError, SuiteLog, TriageRun,
};
use crate::sbfl::{rank_files, FileRanking, Formula, SbflError};

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error("unknown optimization level `{0}`")]
    UnknownLevel(String),
    #[error("no level below {0} is available as the passing level")]
    NoLowerLevel(String),
    #[error("pair {pair} violates its structure: {message}")]
    Structure { pair: String, message: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sbfl(#[from] SbflError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

impl From<DriverError> for LocalizeError {
    fn from(e: DriverError) -> Self {
        LocalizeError::Pipeline(PipelineError::Driver(e))
    }
}

#[derive(Debug, Clone)]
pub struct LocalizeSettings {
    pub fail_level: String,
    /// Defaults to the level just below `fail_level`.
    pub pass_level: Option<String>,
    pub pairs: usize,
    /// Explicit disable fractions, overriding the schedule for `pairs`.
    pub schedule: Option<Vec<DisableFraction>>,
    pub formula: Formula,
    pub filter: bool,
    pub diff_mode: DiffMode,
    pub jobs: usize,
}

impl LocalizeSettings {
    pub fn new(fail_level: impl Into<String>) -> Self {
        Self {
            fail_level: fail_level.into(),
            pass_level: None,
            pairs: 3,
            schedule: None,
            formula: Formula::default(),
            filter: true,
            diff_mode: DiffMode::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalizeReport {
    pub fail_level: OptimizationLevel,
    pub pass_level: OptimizationLevel,
    pub fail_result: CompilationOutcome,
    pub pass_result: CompilationOutcome,
    pub candidates: CandidateSet,
    pub triage: TriageRun,
    pub pairs: Vec<AdversarialPair>,
    pub suite_log: SuiteLog,
    pub rankings: Vec<FileRanking>,
    pub aggregate: AggregatedRanking,
    /// Every configuration executed with coverage, including both bare levels.
    pub spectra: BTreeMap<Configuration, CoverageSpectrum>,
    pub compilations: usize,
}

impl LocalizeReport {
    pub fn ranking(&self, pair_id: &str) -> Option<&FileRanking> {
        self.rankings.iter().find(|r| r.pair_id == pair_id)
    }
}

/// Per-pair verification record as persisted in `pairs.json`.
#[derive(Debug, Clone, Serialize)]
pub struct PairRecord<'a> {
    #[serde(flatten)]
    pub pair: &'a AdversarialPair,
    pub fail_outcome: &'a CompilationOutcome,
    pub pass_outcome: &'a CompilationOutcome,
    pub verified: bool,
}

pub fn resolve_level(
    driver: &dyn CompilerDriver,
    label: &str,
) -> Result<OptimizationLevel, LocalizeError> {
    driver
        .levels()?
        .into_iter()
        .find(|l| l.label == label)
        .ok_or_else(|| LocalizeError::UnknownLevel(label.to_string()))
}

/// The highest level strictly below `fail`.
pub fn level_below(
    driver: &dyn CompilerDriver,
    fail: &OptimizationLevel,
) -> Result<OptimizationLevel, LocalizeError> {
    driver
        .levels()?
        .into_iter()
        .filter(|l| l.ordinal < fail.ordinal)
        .max()
        .ok_or_else(|| LocalizeError::NoLowerLevel(fail.label.clone()))
}

/// Runs every step for one bug and returns all intermediate results.
pub fn localize(
    driver: &dyn CompilerDriver,
    program: &TestProgram,
    settings: &LocalizeSettings,
) -> Result<LocalizeReport, LocalizeError> {
    let exec = Executor::new(driver, program, settings.jobs);
    let o_fail = resolve_level(driver, &settings.fail_level)?;
    let o_pass = match &settings.pass_level {
        Some(label) => resolve_level(driver, label)?,
        None => level_below(driver, &o_fail)?,
    };
    if o_pass.ordinal >= o_fail.ordinal {
        return Err(PipelineError::LevelOrder {
            fail: o_fail.label.clone(),
            pass: o_pass.label.clone(),
        }
        .into());
    }

    let fail_base = Configuration::level_only(o_fail.clone());
    let pass_base = Configuration::level_only(o_pass.clone());
    let mut base = exec.executions(&[fail_base.clone(), pass_base.clone()])?;
    let (pass_result, pass_spectrum) = base.pop().expect("two executions");
    let (fail_result, fail_spectrum) = base.pop().expect("two executions");
    if fail_result == pass_result {
        return Err(PipelineError::NonReproducing {
            level: o_fail.label.clone(),
            outcome: fail_result.to_string(),
        }
        .into());
    }

    let candidates = if settings.filter {
        filter_candidates(
            &fail_spectrum,
            &pass_spectrum,
            driver.source_files(),
            settings.diff_mode,
        )?
    } else {
        if fail_spectrum.executed_count() == 0 {
            return Err(PipelineError::EmptySpectrum.into());
        }
        CandidateSet::unfiltered(&fail_spectrum, driver.source_files())
    };

    let triage = triage_options(&exec, &o_fail, &pass_result)?;
    let (pairs, suite_log) = match &settings.schedule {
        Some(schedule) => build_pair_suite_with(&exec, &triage, schedule)?,
        None => build_pair_suite(&exec, &triage, settings.pairs)?,
    };
    for pair in &pairs {
        pair.check_structure(Some(&triage.triage))
            .map_err(|message| LocalizeError::Structure {
                pair: pair.id.clone(),
                message,
            })?;
    }

    let confs: Vec<Configuration> = pairs
        .iter()
        .flat_map(|p| p.configurations().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let executed = exec.executions(&confs)?;
    for (pair, conf) in pairs
        .iter()
        .flat_map(|p| p.configurations().map(move |c| (p, c)))
    {
        let idx = confs.binary_search(conf).expect("collected above");
        let expected = if conf == &pair.fail_conf {
            &fail_result
        } else {
            &pass_result
        };
        if &executed[idx].0 != expected {
            return Err(LocalizeError::Structure {
                pair: pair.id.clone(),
                message: format!("`{conf}` gave {} on re-execution", executed[idx].0),
            });
        }
    }
    let mut spectra: BTreeMap<Configuration, CoverageSpectrum> = confs
        .into_iter()
        .zip(executed)
        .map(|(c, (_, s))| (c, s))
        .collect();
    spectra.entry(fail_base).or_insert(fail_spectrum);
    spectra.entry(pass_base).or_insert(pass_spectrum);

    let rankings = pairs
        .iter()
        .map(|p| rank_files(p, &spectra, &candidates, settings.formula))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(&rankings)?;

    Ok(LocalizeReport {
        fail_level: o_fail,
        pass_level: o_pass,
        fail_result,
        pass_result,
        candidates,
        triage,
        pairs,
        suite_log,
        rankings,
        aggregate,
        spectra,
        compilations: exec.compilations(),
    })
}
