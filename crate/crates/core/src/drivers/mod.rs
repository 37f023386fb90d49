//! Concrete compiler drivers: a simulated compiler evaluating declarative
//! bug models, and an external-process driver for real compilers.

pub mod external;
pub mod model;
pub mod predicate;
pub mod sim;

pub use external::{external_compile_and_run, ExternalDriver, ExternalSettings};
pub use model::{
    load_bug_model, load_bug_model_file, BugModel, ModelDocument, ModelError, OutcomeDoc,
};
pub use predicate::Predicate;
pub use sim::{simulate, SimulatedDriver};
