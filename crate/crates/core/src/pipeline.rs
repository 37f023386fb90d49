//! Candidate filtering, option triage and adversarial pair construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    CompilationOutcome, CompilerDriver, Configuration, DriverError, FineGrainedOption,
    OptimizationLevel, OptionSpace, TestProgram,
};
use crate::coverage::CoverageSpectrum;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("failing spectrum has no executed statements")]
    EmptySpectrum,
    #[error("the bug does not reproduce at {level}: outcome {outcome} matches the passing result")]
    NonReproducing { level: String, outcome: String },
    #[error("failing configuration `{conf}` no longer reproduces the bug (got {outcome})")]
    FailConfNotFailing { conf: String, outcome: String },
    #[error("every passing configuration derived from `{conf}` still fails")]
    AllPassConfsInvalid { conf: String },
    #[error("no level below {level} conceals the bug")]
    NoPassingLevel { level: String },
    #[error("unsupported pair count {0} (expected 1, 3, 5 or 10)")]
    InvalidPairCount(usize),
    #[error("pass level {pass} is not below fail level {fail}")]
    LevelOrder { fail: String, pass: String },
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// Which statements count as differential in the second filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    /// Executed under the failing level but not under the passing level.
    #[default]
    FailMinusPass,
    /// Executed under exactly one of the two levels.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub all_files: BTreeSet<String>,
    pub covered_files: BTreeSet<String>,
    pub suspicious_files: BTreeSet<String>,
}

impl CandidateSet {
    /// Candidate set with filtering disabled: every covered file stays.
    pub fn unfiltered<I>(fail_spectrum: &CoverageSpectrum, all_files: I) -> Self
    where
        I: IntoIterator<Item = String>,
    {
        let covered_files = fail_spectrum.covered_files();
        let mut all: BTreeSet<String> = all_files.into_iter().collect();
        all.extend(fail_spectrum.files().map(str::to_string));
        Self {
            all_files: all,
            suspicious_files: covered_files.clone(),
            covered_files,
        }
    }
}

/// Coverage-presence filter followed by the differential-spectrum filter.
pub fn filter_candidates<I>(
    fail_spectrum: &CoverageSpectrum,
    pass_spectrum: &CoverageSpectrum,
    all_files: I,
    mode: DiffMode,
) -> Result<CandidateSet, PipelineError>
where
    I: IntoIterator<Item = String>,
{
    if fail_spectrum.executed_count() == 0 {
        return Err(PipelineError::EmptySpectrum);
    }
    let mut all: BTreeSet<String> = all_files.into_iter().collect();
    all.extend(fail_spectrum.files().map(str::to_string));
    all.extend(pass_spectrum.files().map(str::to_string));

    let covered_files = fail_spectrum.covered_files();
    let mut suspicious_files: BTreeSet<String> = fail_spectrum
        .executed()
        .filter(|(f, l)| !pass_spectrum.is_executed(f, *l))
        .map(|(f, _)| f.to_string())
        .collect();
    if mode == DiffMode::Symmetric {
        suspicious_files.extend(
            pass_spectrum
                .executed()
                .filter(|(f, l)| !fail_spectrum.is_executed(f, *l) && covered_files.contains(*f))
                .map(|(f, _)| f.to_string()),
        );
    }
    Ok(CandidateSet {
        all_files: all,
        covered_files,
        suspicious_files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionClass {
    BugTriggering,
    BugFree,
}

/// Partition of the options enabled at the failing level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionTriage {
    pub level: OptimizationLevel,
    /// In option-index order.
    pub bug_triggering: Vec<FineGrainedOption>,
    /// In option-index order.
    pub bug_free: Vec<FineGrainedOption>,
}

impl OptionTriage {
    pub fn classify(&self, name: &str) -> Option<OptionClass> {
        if self.bug_triggering.iter().any(|o| o.name == name) {
            Some(OptionClass::BugTriggering)
        } else if self.bug_free.iter().any(|o| o.name == name) {
            Some(OptionClass::BugFree)
        } else {
            None
        }
    }

    /// All options with their class, in index order.
    pub fn classes(&self) -> Vec<(&FineGrainedOption, OptionClass)> {
        let mut all: Vec<_> = self
            .bug_triggering
            .iter()
            .map(|o| (o, OptionClass::BugTriggering))
            .chain(self.bug_free.iter().map(|o| (o, OptionClass::BugFree)))
            .collect();
        all.sort_by(|a, b| a.0.cmp(b.0));
        all
    }
}

/// Runs driver calls with a job limit and memoizes results per configuration.
pub struct Executor<'a> {
    driver: &'a dyn CompilerDriver,
    program: &'a TestProgram,
    pool: rayon::ThreadPool,
    cache: Mutex<BTreeMap<Configuration, (CompilationOutcome, Option<CoverageSpectrum>)>>,
    compilations: Mutex<usize>,
}

impl<'a> Executor<'a> {
    pub fn new(driver: &'a dyn CompilerDriver, program: &'a TestProgram, jobs: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .expect("thread pool");
        Self {
            driver,
            program,
            pool,
            cache: Mutex::new(BTreeMap::new()),
            compilations: Mutex::new(0),
        }
    }

    pub fn driver(&self) -> &dyn CompilerDriver {
        self.driver
    }

    /// Number of driver invocations made so far.
    pub fn compilations(&self) -> usize {
        *self.compilations.lock().unwrap()
    }

    pub fn outcome(&self, conf: &Configuration) -> Result<CompilationOutcome, DriverError> {
        if let Some((o, _)) = self.cache.lock().unwrap().get(conf) {
            return Ok(o.clone());
        }
        self.run(conf, false).map(|(o, _)| o)
    }

    pub fn spectrum(&self, conf: &Configuration) -> Result<CoverageSpectrum, DriverError> {
        if let Some((_, Some(s))) = self.cache.lock().unwrap().get(conf) {
            return Ok(s.clone());
        }
        self.run(conf, true).map(|(_, s)| s)
    }

    pub fn execute(
        &self,
        conf: &Configuration,
    ) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError> {
        if let Some((o, Some(s))) = self.cache.lock().unwrap().get(conf) {
            return Ok((o.clone(), s.clone()));
        }
        self.run(conf, true)
    }

    fn run(
        &self,
        conf: &Configuration,
        want_coverage: bool,
    ) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError> {
        let (outcome, spectrum) = self
            .driver
            .compile_and_run(self.program, conf, want_coverage)?;
        *self.compilations.lock().unwrap() += 1;
        self.cache.lock().unwrap().insert(
            conf.clone(),
            (outcome.clone(), want_coverage.then(|| spectrum.clone())),
        );
        Ok((outcome, spectrum))
    }

    /// Outcomes for many configurations, in input order.
    pub fn outcomes(
        &self,
        confs: &[Configuration],
    ) -> Result<Vec<CompilationOutcome>, DriverError> {
        use rayon::prelude::*;
        self.pool
            .install(|| confs.par_iter().map(|c| self.outcome(c)).collect())
    }

    /// Outcomes and spectra for many configurations, in input order.
    pub fn executions(
        &self,
        confs: &[Configuration],
    ) -> Result<Vec<(CompilationOutcome, CoverageSpectrum)>, DriverError> {
        use rayon::prelude::*;
        self.pool
            .install(|| confs.par_iter().map(|c| self.execute(c)).collect())
    }
}

/// Result of classifying options at the failing level.
#[derive(Debug, Clone)]
pub struct TriageRun {
    pub triage: OptionTriage,
    pub fail_result: CompilationOutcome,
    pub pass_result: CompilationOutcome,
    /// Outcome of each single-option probe, in option-index order.
    pub probes: Vec<(FineGrainedOption, CompilationOutcome)>,
}

/// Disables each option enabled at `o_fail` in turn; an option is
/// bug-triggering when its probe reproduces `pass_result`.
pub fn triage_options(
    exec: &Executor<'_>,
    o_fail: &OptimizationLevel,
    pass_result: &CompilationOutcome,
) -> Result<TriageRun, PipelineError> {
    let base = Configuration::level_only(o_fail.clone());
    let fail_result = exec.outcome(&base)?;
    if &fail_result == pass_result {
        return Err(PipelineError::NonReproducing {
            level: o_fail.label.clone(),
            outcome: fail_result.to_string(),
        });
    }
    let space = exec.driver().enabled_options(o_fail)?;
    let probes: Vec<Configuration> = space
        .options
        .iter()
        .map(|o| base.with_disabled(o))
        .collect();
    let outcomes = exec.outcomes(&probes)?;

    let mut bug_triggering = Vec::new();
    let mut bug_free = Vec::new();
    let mut probe_log = Vec::with_capacity(space.len());
    for (opt, outcome) in space.options.iter().zip(outcomes) {
        if &outcome == pass_result {
            bug_triggering.push(opt.clone());
        } else {
            bug_free.push(opt.clone());
        }
        probe_log.push((opt.clone(), outcome));
    }
    Ok(TriageRun {
        triage: OptionTriage {
            level: o_fail.clone(),
            bug_triggering,
            bug_free,
        },
        fail_result,
        pass_result: pass_result.clone(),
        probes: probe_log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    FineGrained,
    LevelOnly,
}

/// Share of the bug-free options disabled in a pair's failing configuration,
/// as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisableFraction {
    pub num: usize,
    pub den: usize,
}

impl DisableFraction {
    pub const fn new(num: usize, den: usize) -> Self {
        Self { num, den }
    }

    /// `ceil(q * n)`.
    pub fn count_of(&self, n: usize) -> usize {
        (self.num * n).div_ceil(self.den)
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for DisableFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.num, self.den) {
            (0, _) => f.write_str("0"),
            (n, d) if n == d => f.write_str("1"),
            (n, d) => write!(f, "{n}/{d}"),
        }
    }
}

/// Disable fractions for each supported pair count, in slot order.
pub fn disable_schedule(k: usize) -> Result<Vec<DisableFraction>, PipelineError> {
    let f = DisableFraction::new;
    Ok(match k {
        1 => vec![f(1, 2)],
        3 => vec![f(1, 1), f(1, 2), f(0, 1)],
        5 => vec![f(1, 1), f(3, 4), f(1, 2), f(1, 4), f(0, 1)],
        10 => vec![
            f(1, 1),
            f(7, 8),
            f(6, 8),
            f(5, 8),
            f(4, 8),
            f(3, 8),
            f(2, 8),
            f(1, 8),
            f(1, 16),
            f(0, 1),
        ],
        other => return Err(PipelineError::InvalidPairCount(other)),
    })
}

/// One failing configuration and the passing configurations derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialPair {
    pub id: String,
    pub granularity: Granularity,
    /// Requested share of bug-free options disabled (fine-grained pairs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<DisableFraction>,
    /// Set when the requested failing configuration stopped failing and the
    /// slot was rebuilt with nothing disabled.
    #[serde(default)]
    pub fell_back: bool,
    pub fail_conf: Configuration,
    pub pass_confs: Vec<Configuration>,
    /// Candidate passing configurations dropped because they still failed.
    #[serde(default)]
    pub dropped: Vec<Configuration>,
}

impl AdversarialPair {
    /// Structural check: fine-grained pass configurations are exactly one
    /// bug-triggering option away from the failing configuration; level-only
    /// pass configurations are bare levels strictly below it.
    pub fn check_structure(&self, triage: Option<&OptionTriage>) -> Result<(), String> {
        if self.pass_confs.is_empty() {
            return Err(format!("{}: no passing configurations", self.id));
        }
        match self.granularity {
            Granularity::FineGrained => {
                for pc in &self.pass_confs {
                    if pc.level != self.fail_conf.level {
                        return Err(format!("{}: `{pc}` changes level", self.id));
                    }
                    if !self.fail_conf.disabled().is_subset(pc.disabled()) {
                        return Err(format!("{}: `{pc}` re-enables an option", self.id));
                    }
                    let extra: Vec<_> = pc
                        .disabled()
                        .difference(self.fail_conf.disabled())
                        .collect();
                    if extra.len() != 1 {
                        return Err(format!(
                            "{}: `{pc}` differs by {} options",
                            self.id,
                            extra.len()
                        ));
                    }
                    if let Some(t) = triage {
                        if t.classify(&extra[0].name) != Some(OptionClass::BugTriggering) {
                            return Err(format!(
                                "{}: `{}` is not bug-triggering",
                                self.id, extra[0].name
                            ));
                        }
                    }
                }
            }
            Granularity::LevelOnly => {
                if !self.fail_conf.disabled().is_empty() {
                    return Err(format!(
                        "{}: level-only failing conf disables options",
                        self.id
                    ));
                }
                for pc in &self.pass_confs {
                    if !pc.disabled().is_empty() || pc.level.ordinal >= self.fail_conf.level.ordinal
                    {
                        return Err(format!("{}: `{pc}` is not a lower bare level", self.id));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> + '_ {
        std::iter::once(&self.fail_conf).chain(self.pass_confs.iter())
    }
}

/// Builds one pair: `f_disable` off in the failing configuration, and one
/// passing configuration per bug-triggering option. Every configuration is
/// re-executed; pass candidates that do not reproduce `pass_result` are
/// dropped.
pub fn gen_adv_confs(
    exec: &Executor<'_>,
    space: &OptionSpace,
    f_disable: &[FineGrainedOption],
    f_bt: &[FineGrainedOption],
    fail_result: &CompilationOutcome,
    pass_result: &CompilationOutcome,
) -> Result<AdversarialPair, PipelineError> {
    let fail_conf = Configuration::from_options(space, f_disable).map_err(DriverError::from)?;
    let mut bt: Vec<&FineGrainedOption> = f_bt.iter().collect();
    bt.sort();
    let candidates: Vec<Configuration> = bt.iter().map(|b| fail_conf.with_disabled(b)).collect();

    let fail_outcome = exec.execute(&fail_conf)?.0;
    if &fail_outcome != fail_result {
        return Err(PipelineError::FailConfNotFailing {
            conf: fail_conf.to_string(),
            outcome: fail_outcome.to_string(),
        });
    }
    let outcomes = exec.executions(&candidates)?;
    let mut pass_confs = Vec::new();
    let mut dropped = Vec::new();
    for (conf, (outcome, _)) in candidates.into_iter().zip(outcomes) {
        if &outcome == pass_result {
            pass_confs.push(conf);
        } else {
            dropped.push(conf);
        }
    }
    if pass_confs.is_empty() {
        return Err(PipelineError::AllPassConfsInvalid {
            conf: fail_conf.to_string(),
        });
    }
    Ok(AdversarialPair {
        id: String::new(),
        granularity: Granularity::FineGrained,
        fraction: None,
        fell_back: false,
        fail_conf,
        pass_confs,
        dropped,
    })
}

/// Level-granularity pair: the bare failing level against every lower level
/// that conceals the bug.
pub fn level_pair(
    exec: &Executor<'_>,
    o_fail: &OptimizationLevel,
    pass_result: &CompilationOutcome,
) -> Result<AdversarialPair, PipelineError> {
    let lower: Vec<Configuration> = exec
        .driver()
        .levels()?
        .into_iter()
        .filter(|l| l.ordinal < o_fail.ordinal)
        .map(Configuration::level_only)
        .collect();
    let fail_conf = Configuration::level_only(o_fail.clone());
    exec.execute(&fail_conf)?;
    let outcomes = exec.executions(&lower)?;
    let mut pass_confs = Vec::new();
    let mut dropped = Vec::new();
    for (conf, (outcome, _)) in lower.into_iter().zip(outcomes) {
        if &outcome == pass_result {
            pass_confs.push(conf);
        } else {
            dropped.push(conf);
        }
    }
    if pass_confs.is_empty() {
        return Err(PipelineError::NoPassingLevel {
            level: o_fail.label.clone(),
        });
    }
    Ok(AdversarialPair {
        id: "level".to_string(),
        granularity: Granularity::LevelOnly,
        fraction: None,
        fell_back: false,
        fail_conf,
        pass_confs,
        dropped,
    })
}

/// Notes about slots that could not be built as requested.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteLog {
    pub fell_back: Vec<String>,
    pub skipped: Vec<String>,
    pub deduplicated: Vec<String>,
}

/// Builds the `k` adversarial pairs for a triaged bug.
///
/// Slot `i` disables the first `ceil(q_i * |F_bf|)` bug-free options in index
/// order. Without bug-triggering options a single level-granularity pair is
/// returned instead.
pub fn build_pair_suite(
    exec: &Executor<'_>,
    run: &TriageRun,
    k: usize,
) -> Result<(Vec<AdversarialPair>, SuiteLog), PipelineError> {
    build_pair_suite_with(exec, run, &disable_schedule(k)?)
}

/// Like [`build_pair_suite`] with an explicit list of disable fractions.
pub fn build_pair_suite_with(
    exec: &Executor<'_>,
    run: &TriageRun,
    schedule: &[DisableFraction],
) -> Result<(Vec<AdversarialPair>, SuiteLog), PipelineError> {
    if schedule.is_empty() {
        return Err(PipelineError::InvalidPairCount(0));
    }
    let triage = &run.triage;
    let o_fail = &triage.level;
    let mut log = SuiteLog::default();
    if triage.bug_triggering.is_empty() {
        return Ok((vec![level_pair(exec, o_fail, &run.pass_result)?], log));
    }
    let space = exec.driver().enabled_options(o_fail)?;

    let mut pairs: Vec<AdversarialPair> = Vec::new();
    for (slot, fraction) in schedule.iter().enumerate() {
        let id = format!("p{}", slot + 1);
        let count = fraction.count_of(triage.bug_free.len());
        let f_disable = &triage.bug_free[..count];
        let built = match gen_adv_confs(
            exec,
            &space,
            f_disable,
            &triage.bug_triggering,
            &run.fail_result,
            &run.pass_result,
        ) {
            Ok(pair) => Ok((pair, false)),
            Err(PipelineError::FailConfNotFailing { .. }) => {
                log.fell_back.push(id.clone());
                gen_adv_confs(
                    exec,
                    &space,
                    &[],
                    &triage.bug_triggering,
                    &run.fail_result,
                    &run.pass_result,
                )
                .map(|p| (p, true))
            }
            Err(e) => Err(e),
        };
        let (mut pair, fell_back) = match built {
            Ok(p) => p,
            Err(PipelineError::AllPassConfsInvalid { .. }) => {
                log.skipped.push(id);
                continue;
            }
            Err(e) => return Err(e),
        };
        if pairs.iter().any(|p| p.fail_conf == pair.fail_conf) {
            log.deduplicated.push(id);
            continue;
        }
        pair.id = id;
        pair.fraction = Some(*fraction);
        pair.fell_back = fell_back;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Ok((vec![level_pair(exec, o_fail, &run.pass_result)?], log));
    }
    Ok((pairs, log))
}
