//! Optimization levels, fine-grained options, concrete configurations and the
//! abstract compiler-driver contract.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coverage::CoverageSpectrum;

/// A coarse optimization level such as `O1` or `Os`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OptimizationLevel {
    pub label: String,
    pub ordinal: u32,
}

impl OptimizationLevel {
    pub fn new(label: impl Into<String>, ordinal: u32) -> Self {
        Self {
            label: label.into(),
            ordinal,
        }
    }
}

impl fmt::Display for OptimizationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl PartialOrd for OptimizationLevel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OptimizationLevel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ordinal
            .cmp(&other.ordinal)
            .then_with(|| self.label.cmp(&other.label))
    }
}

/// A fine-grained optimizer flag, stored without the `-f` / `-fno-` prefix.
///
/// Ordering is by enumeration index, which is the order every selection rule
/// in the pipeline uses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FineGrainedOption {
    pub index: usize,
    pub name: String,
}

impl FineGrainedOption {
    pub fn enable_flag(&self) -> String {
        format!("-f{}", self.name)
    }

    pub fn disable_flag(&self) -> String {
        format!("-fno-{}", self.name)
    }
}

/// The options enabled by default at one optimization level, in the driver's
/// enumeration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSpace {
    pub level: OptimizationLevel,
    pub options: Vec<FineGrainedOption>,
}

impl OptionSpace {
    /// Builds a space from option names, assigning indices in order.
    pub fn from_names<S: AsRef<str>>(
        level: OptimizationLevel,
        names: &[S],
    ) -> Result<Self, ConfigError> {
        let mut seen = BTreeSet::new();
        let mut options = Vec::with_capacity(names.len());
        for (index, name) in names.iter().enumerate() {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(ConfigError::EmptyOptionName);
            }
            if !seen.insert(name) {
                return Err(ConfigError::DuplicateOption(name.to_string()));
            }
            options.push(FineGrainedOption {
                index,
                name: name.to_string(),
            });
        }
        Ok(Self { level, options })
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&FineGrainedOption> {
        self.options.iter().find(|o| o.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }
}

/// An optimization level plus the set of its default options that are
/// explicitly disabled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub level: OptimizationLevel,
    disabled: BTreeSet<FineGrainedOption>,
}

impl Configuration {
    /// The level with all of its default options left enabled.
    pub fn level_only(level: OptimizationLevel) -> Self {
        Self {
            level,
            disabled: BTreeSet::new(),
        }
    }

    /// Builds a configuration, rejecting options that are not part of `space`.
    pub fn new<'a, I>(space: &OptionSpace, disabled: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set = BTreeSet::new();
        for name in disabled {
            let opt = space
                .get(name)
                .ok_or_else(|| ConfigError::OptionNotInSpace {
                    option: name.to_string(),
                    level: space.level.label.clone(),
                })?;
            set.insert(opt.clone());
        }
        Ok(Self {
            level: space.level.clone(),
            disabled: set,
        })
    }

    pub fn from_options<'a, I>(space: &OptionSpace, disabled: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = &'a FineGrainedOption>,
    {
        Self::new(space, disabled.into_iter().map(|o| o.name.as_str()))
    }

    pub fn disabled(&self) -> &BTreeSet<FineGrainedOption> {
        &self.disabled
    }

    pub fn is_disabled(&self, name: &str) -> bool {
        self.disabled.iter().any(|o| o.name == name)
    }

    /// Returns a copy with one more option disabled.
    pub fn with_disabled(&self, option: &FineGrainedOption) -> Self {
        let mut next = self.clone();
        next.disabled.insert(option.clone());
        next
    }

    /// Compiler flags for this configuration: the level followed by one
    /// `-fno-<name>` per disabled option in index order.
    pub fn flags(&self) -> Vec<String> {
        std::iter::once(format!("-{}", self.level.label))
            .chain(self.disabled.iter().map(FineGrainedOption::disable_flag))
            .collect()
    }

    /// Parses the form produced by `Display` against the level's option space.
    pub fn parse(text: &str, space: &OptionSpace) -> Result<Self, ConfigError> {
        let mut tokens = text.split_whitespace();
        let level = tokens
            .next()
            .and_then(|t| t.strip_prefix('-'))
            .ok_or_else(|| ConfigError::Malformed(text.to_string()))?;
        if level != space.level.label {
            return Err(ConfigError::LevelMismatch {
                expected: space.level.label.clone(),
                found: level.to_string(),
            });
        }
        let mut names = Vec::new();
        for tok in tokens {
            let name = tok
                .strip_prefix("-fno-")
                .ok_or_else(|| ConfigError::Malformed(text.to_string()))?;
            names.push(name);
        }
        Self::new(space, names)
    }

    /// Short stable identifier used in artifact file names.
    pub fn hash_id(&self) -> String {
        let digest = Sha256::digest(self.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.flags().join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    CompilerCrash,
    RunAbort,
    RunOk,
}

/// The observable result of compiling and running a test program.
///
/// Equality is field-wise; it is the comparison used to decide whether a
/// configuration conceals the bug.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompilationOutcome {
    pub status: OutcomeStatus,
    pub exit_code: i32,
    /// Hex SHA-256 of the program's stdout; empty unless `status` is `RunOk`.
    #[serde(default)]
    pub output_digest: String,
}

impl CompilationOutcome {
    pub fn run_ok(exit_code: i32, stdout: &[u8]) -> Self {
        Self {
            status: OutcomeStatus::RunOk,
            exit_code,
            output_digest: output_digest(stdout),
        }
    }

    pub fn run_abort(exit_code: i32) -> Self {
        Self {
            status: OutcomeStatus::RunAbort,
            exit_code,
            output_digest: String::new(),
        }
    }

    pub fn compiler_crash(exit_code: i32) -> Self {
        Self {
            status: OutcomeStatus::CompilerCrash,
            exit_code,
            output_digest: String::new(),
        }
    }

    /// Checks the digest/status coupling.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.status {
            OutcomeStatus::RunOk if self.output_digest.len() != 64 => Err(ConfigError::BadOutcome(
                "run_ok outcome needs a 64-hex-digit digest",
            )),
            OutcomeStatus::RunOk if !self.output_digest.bytes().all(|b| b.is_ascii_hexdigit()) => {
                Err(ConfigError::BadOutcome("output digest is not hexadecimal"))
            }
            OutcomeStatus::CompilerCrash | OutcomeStatus::RunAbort
                if !self.output_digest.is_empty() =>
            {
                Err(ConfigError::BadOutcome(
                    "only run_ok outcomes carry an output digest",
                ))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for CompilationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            OutcomeStatus::CompilerCrash => write!(f, "compiler-crash({})", self.exit_code),
            OutcomeStatus::RunAbort => write!(f, "run-abort({})", self.exit_code),
            OutcomeStatus::RunOk => write!(
                f,
                "run-ok({}, {})",
                self.exit_code,
                &self.output_digest[..self.output_digest.len().min(12)]
            ),
        }
    }
}

pub fn output_digest(stdout: &[u8]) -> String {
    hex::encode(Sha256::digest(stdout))
}

/// The bug-triggering program handed to the driver.
///
/// The simulated driver ignores it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestProgram {
    pub path: Option<PathBuf>,
}

impl TestProgram {
    pub fn inert() -> Self {
        Self { path: None }
    }

    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("option `{option}` is not enabled at level {level}")]
    OptionNotInSpace { option: String, level: String },
    #[error("duplicate option `{0}` in option space")]
    DuplicateOption(String),
    #[error("empty option name")]
    EmptyOptionName,
    #[error("malformed configuration `{0}`")]
    Malformed(String),
    #[error("configuration is for level {found}, expected {expected}")]
    LevelMismatch { expected: String, found: String },
    #[error("invalid outcome: {0}")]
    BadOutcome(&'static str),
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("compiler driver unavailable: {0}")]
    Unavailable(String),
    #[error("unknown optimization level `{0}`")]
    LevelUnknown(String),
    #[error("compilation timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("coverage data unavailable: {0}")]
    CoverageUnavailable(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// The single boundary between the localization pipeline and a compiler.
pub trait CompilerDriver: Send + Sync {
    /// Optimization levels in ascending ordinal order.
    fn levels(&self) -> Result<Vec<OptimizationLevel>, DriverError>;

    fn enabled_options(&self, level: &OptimizationLevel) -> Result<OptionSpace, DriverError>;

    fn compile_and_run(
        &self,
        program: &TestProgram,
        conf: &Configuration,
        want_coverage: bool,
    ) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError>;

    /// Every compiler source file the driver knows about, covered or not.
    fn source_files(&self) -> Vec<String> {
        Vec::new()
    }

    /// Short description recorded in run manifests.
    fn describe(&self) -> String;

    fn level(&self, label: &str) -> Result<OptimizationLevel, DriverError> {
        self.levels()?
            .into_iter()
            .find(|l| l.label == label)
            .ok_or_else(|| DriverError::LevelUnknown(label.to_string()))
    }
}
