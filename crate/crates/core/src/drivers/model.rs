//! Declarative bug models for the simulated compiler.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::predicate::Predicate;
use crate::config::{
    output_digest, CompilationOutcome, ConfigError, OptimizationLevel, OptionSpace, OutcomeStatus,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("cannot read model {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ModelError {
    fn invalid(msg: impl Into<String>) -> Self {
        ModelError::Validation(msg.into())
    }
}

/// Outcome as written in a model document. `stdout` is a convenience that is
/// digested on load; `output_digest` may be given directly instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub status: OutcomeStatus,
    #[serde(default)]
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdout: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_digest: Option<String>,
}

impl OutcomeDoc {
    fn resolve(&self, which: &str) -> Result<CompilationOutcome, ModelError> {
        let digest = match (&self.stdout, &self.output_digest) {
            (Some(_), Some(_)) => {
                return Err(ModelError::invalid(format!(
                    "{which}: give either `stdout` or `output_digest`, not both"
                )))
            }
            (Some(out), None) => output_digest(out.as_bytes()),
            (None, Some(d)) => d.clone(),
            (None, None) if self.status == OutcomeStatus::RunOk => output_digest(b""),
            (None, None) => String::new(),
        };
        let outcome = CompilationOutcome {
            status: self.status,
            exit_code: self.exit_code,
            output_digest: digest,
        };
        outcome
            .validate()
            .map_err(|e: ConfigError| ModelError::invalid(format!("{which}: {e}")))?;
        Ok(outcome)
    }
}

/// The on-disk JSON form of a bug model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub levels: Vec<String>,
    pub options: BTreeMap<String, Vec<String>>,
    pub files: Vec<String>,
    #[serde(default)]
    pub base_coverage: BTreeMap<String, BTreeMap<String, Vec<u32>>>,
    #[serde(default)]
    pub option_coverage: BTreeMap<String, Vec<(String, u32)>>,
    pub bug_predicate: String,
    pub faulty_files: Vec<String>,
    pub pass_outcome: OutcomeDoc,
    pub fail_outcome: OutcomeDoc,
}

/// A validated bug model: ground truth plus the tables the simulated driver
/// evaluates.
#[derive(Debug, Clone)]
pub struct BugModel {
    pub id: String,
    pub levels: Vec<OptimizationLevel>,
    pub option_spaces: BTreeMap<String, OptionSpace>,
    pub files: Vec<String>,
    pub base_coverage: BTreeMap<String, BTreeMap<String, BTreeSet<u32>>>,
    pub option_coverage: BTreeMap<String, BTreeSet<(String, u32)>>,
    pub bug_predicate: Predicate,
    pub faulty_files: BTreeSet<String>,
    pub pass_outcome: CompilationOutcome,
    pub fail_outcome: CompilationOutcome,
    document: ModelDocument,
}

impl BugModel {
    pub fn level(&self, label: &str) -> Option<&OptimizationLevel> {
        self.levels.iter().find(|l| l.label == label)
    }

    pub fn option_space(&self, label: &str) -> Option<&OptionSpace> {
        self.option_spaces.get(label)
    }

    pub fn document(&self) -> &ModelDocument {
        &self.document
    }

    pub fn from_document(doc: ModelDocument, fallback_id: &str) -> Result<Self, ModelError> {
        if doc.levels.is_empty() {
            return Err(ModelError::invalid("`levels` is empty"));
        }
        let mut levels = Vec::new();
        for (ordinal, label) in doc.levels.iter().enumerate() {
            if label.is_empty() {
                return Err(ModelError::invalid("empty level label"));
            }
            if levels.iter().any(|l: &OptimizationLevel| &l.label == label) {
                return Err(ModelError::invalid(format!("duplicate level `{label}`")));
            }
            levels.push(OptimizationLevel::new(label.clone(), ordinal as u32));
        }
        let known_level = |l: &str| doc.levels.iter().any(|x| x == l);

        for key in doc.options.keys() {
            if !known_level(key) {
                return Err(ModelError::invalid(format!(
                    "`options` names unknown level `{key}`"
                )));
            }
        }
        let mut option_spaces = BTreeMap::new();
        let mut all_options = BTreeSet::new();
        for level in &levels {
            let names = doc.options.get(&level.label).cloned().unwrap_or_default();
            let space = OptionSpace::from_names(level.clone(), &names)
                .map_err(|e| ModelError::invalid(format!("options at {}: {e}", level.label)))?;
            all_options.extend(names);
            option_spaces.insert(level.label.clone(), space);
        }

        let mut files = Vec::new();
        let mut file_set = BTreeSet::new();
        for f in &doc.files {
            if f.is_empty() {
                return Err(ModelError::invalid("empty file name in `files`"));
            }
            if !file_set.insert(f.clone()) {
                return Err(ModelError::invalid(format!("duplicate file `{f}`")));
            }
            files.push(f.clone());
        }

        let mut base_coverage = BTreeMap::new();
        for (level, per_file) in &doc.base_coverage {
            if !known_level(level) {
                return Err(ModelError::invalid(format!(
                    "`base_coverage` names unknown level `{level}`"
                )));
            }
            let mut table = BTreeMap::new();
            for (file, lines) in per_file {
                if !file_set.contains(file) {
                    return Err(ModelError::invalid(format!(
                        "`base_coverage.{level}` names unknown file `{file}`"
                    )));
                }
                if lines.contains(&0) {
                    return Err(ModelError::invalid(format!(
                        "`base_coverage.{level}.{file}` has line 0"
                    )));
                }
                table.insert(file.clone(), lines.iter().copied().collect::<BTreeSet<_>>());
            }
            base_coverage.insert(level.clone(), table);
        }

        let mut option_coverage = BTreeMap::new();
        for (opt, stmts) in &doc.option_coverage {
            if !all_options.contains(opt) {
                return Err(ModelError::invalid(format!(
                    "`option_coverage` names undeclared option `{opt}`"
                )));
            }
            let mut set = BTreeSet::new();
            for (file, line) in stmts {
                if !file_set.contains(file) {
                    return Err(ModelError::invalid(format!(
                        "`option_coverage.{opt}` names unknown file `{file}`"
                    )));
                }
                if *line == 0 {
                    return Err(ModelError::invalid(format!(
                        "`option_coverage.{opt}` has line 0"
                    )));
                }
                set.insert((file.clone(), *line));
            }
            option_coverage.insert(opt.clone(), set);
        }

        let bug_predicate = Predicate::parse(&doc.bug_predicate)
            .map_err(|e| ModelError::invalid(format!("`bug_predicate`: {e}")))?;
        for opt in bug_predicate.options() {
            if !all_options.contains(opt) {
                return Err(ModelError::invalid(format!(
                    "`bug_predicate` references undeclared option `{opt}`"
                )));
            }
        }
        for level in bug_predicate.levels() {
            if !known_level(level) {
                return Err(ModelError::invalid(format!(
                    "`bug_predicate` references unknown level `{level}`"
                )));
            }
        }

        if doc.faulty_files.is_empty() {
            return Err(ModelError::invalid("`faulty_files` is empty"));
        }
        let mut faulty_files = BTreeSet::new();
        for f in &doc.faulty_files {
            if !file_set.contains(f) {
                return Err(ModelError::invalid(format!(
                    "faulty file `{f}` is not in `files`"
                )));
            }
            faulty_files.insert(f.clone());
        }

        let pass_outcome = doc.pass_outcome.resolve("pass_outcome")?;
        let fail_outcome = doc.fail_outcome.resolve("fail_outcome")?;
        if pass_outcome == fail_outcome {
            return Err(ModelError::invalid(
                "`pass_outcome` and `fail_outcome` are identical",
            ));
        }

        Ok(Self {
            id: doc.id.clone().unwrap_or_else(|| fallback_id.to_string()),
            levels,
            option_spaces,
            files,
            base_coverage,
            option_coverage,
            bug_predicate,
            faulty_files,
            pass_outcome,
            fail_outcome,
            document: doc,
        })
    }
}

/// Parses and validates a bug-model JSON document.
pub fn load_bug_model(source: &str, fallback_id: &str) -> Result<BugModel, ModelError> {
    let doc: ModelDocument = serde_json::from_str(source).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    BugModel::from_document(doc, fallback_id)
}

/// Loads a model file; the id defaults to the file stem.
pub fn load_bug_model_file(path: &Path) -> Result<BugModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string());
    load_bug_model(&text, &stem)
}
