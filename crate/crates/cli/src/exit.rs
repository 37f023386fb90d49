//! Exit codes and the failure type that carries them.
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 2    | the bug does not reproduce at the failing level |
//! | 3    | no lower level conceals the bug |
//! | 4    | the compiler driver failed |
//! | 5    | any other localization failure |
//! | 64   | bad command line |
//! | 65   | malformed input data (models, empty corpus) |
//! | 74   | reading or writing files failed |

use optiso_core::config::DriverError;
use optiso_core::drivers::ModelError;
use optiso_core::evaluation::EvalError;
use optiso_core::localize::LocalizeError;
use optiso_core::pipeline::PipelineError;

pub const NON_REPRODUCING: u8 = 2;
pub const NO_PASSING_LEVEL: u8 = 3;
pub const DRIVER: u8 = 4;
pub const LOCALIZATION: u8 = 5;
pub const USAGE: u8 = 64;
pub const DATA: u8 = 65;
pub const IO: u8 = 74;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn class(&self) -> &'static str {
        match self.code {
            NON_REPRODUCING => "not reproducing",
            NO_PASSING_LEVEL => "no passing level",
            DRIVER => "driver error",
            LOCALIZATION => "localization failed",
            USAGE => "usage",
            DATA => "data error",
            IO => "i/o error",
            _ => "error",
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(IO, message)
    }

    pub fn data(e: ModelError) -> Self {
        match e {
            ModelError::Io { .. } => Self::new(IO, e.to_string()),
            _ => Self::new(DATA, e.to_string()),
        }
    }

    pub fn data_msg(message: impl Into<String>) -> Self {
        Self::new(DATA, message)
    }

    pub fn driver(e: DriverError) -> Self {
        Self::new(DRIVER, format!("[driver] {e}"))
    }

    pub fn pipeline(e: PipelineError) -> Self {
        let (code, phase) = match &e {
            PipelineError::NonReproducing { .. } => (NON_REPRODUCING, "reproduction check"),
            PipelineError::NoPassingLevel { .. } => (NO_PASSING_LEVEL, "level fallback"),
            PipelineError::Driver(_) => (DRIVER, "driver"),
            PipelineError::LevelOrder { .. } => (USAGE, "level selection"),
            PipelineError::EmptySpectrum => (LOCALIZATION, "candidate filtering"),
            PipelineError::InvalidPairCount(_) => (USAGE, "pair construction"),
            PipelineError::FailConfNotFailing { .. }
            | PipelineError::AllPassConfsInvalid { .. } => (LOCALIZATION, "pair construction"),
        };
        Self::new(code, format!("[{phase}] {e}"))
    }

    pub fn localize(e: LocalizeError) -> Self {
        match e {
            LocalizeError::Pipeline(p) => Self::pipeline(p),
            LocalizeError::UnknownLevel(_) => Self::new(USAGE, format!("[level selection] {e}")),
            LocalizeError::NoLowerLevel(_) => {
                Self::new(NO_PASSING_LEVEL, format!("[level selection] {e}"))
            }
            LocalizeError::Structure { .. } => {
                Self::new(LOCALIZATION, format!("[pair verification] {e}"))
            }
            LocalizeError::Sbfl(_) => Self::new(LOCALIZATION, format!("[ranking] {e}")),
            LocalizeError::Aggregation(_) => Self::new(LOCALIZATION, format!("[aggregation] {e}")),
        }
    }

    pub fn eval(e: EvalError) -> Self {
        match e {
            EvalError::EmptyCorpus | EvalError::EmptyGroundTruth(_) => {
                Self::new(DATA, e.to_string())
            }
            _ => Self::new(LOCALIZATION, e.to_string()),
        }
    }
}
