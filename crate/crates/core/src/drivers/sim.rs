use crate::config::{
    CompilationOutcome, CompilerDriver, Configuration, DriverError, OptimizationLevel, OptionSpace,
    TestProgram,
};
use crate::coverage::CoverageSpectrum;

use super::model::BugModel;

/// Whether `option` is active under `conf`: enabled by default at the level
/// and not explicitly disabled.
pub fn option_enabled(model: &BugModel, conf: &Configuration, option: &str) -> bool {
    model
        .option_space(&conf.level.label)
        .is_some_and(|space| space.contains(option))
        && !conf.is_disabled(option)
}

/// Evaluates a model under a configuration.
///
/// The spectrum is the level's base coverage united with the coverage of every
/// enabled option; a line's count is the number of those sources that
/// execute it. The program is ignored.
pub fn simulate(
    model: &BugModel,
    _program: &TestProgram,
    conf: &Configuration,
) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError> {
    let level = model
        .level(&conf.level.label)
        .ok_or_else(|| DriverError::LevelUnknown(conf.level.label.clone()))?;
    let space = &model.option_spaces[&level.label];
    if let Some(stray) = conf.disabled().iter().find(|o| !space.contains(&o.name)) {
        return Err(DriverError::Config(
            crate::config::ConfigError::OptionNotInSpace {
                option: stray.name.clone(),
                level: level.label.clone(),
            },
        ));
    }

    let mut spectrum = CoverageSpectrum::new();
    if let Some(base) = model.base_coverage.get(&level.label) {
        for (file, lines) in base {
            for &line in lines {
                spectrum.add(file, line, 1);
            }
        }
    }
    for opt in &space.options {
        if conf.is_disabled(&opt.name) {
            continue;
        }
        if let Some(stmts) = model.option_coverage.get(&opt.name) {
            for (file, line) in stmts {
                spectrum.add(file, *line, 1);
            }
        }
    }

    let buggy = model
        .bug_predicate
        .eval(&|name| option_enabled(model, conf, name), &|label| {
            model
                .level(label)
                .is_some_and(|min| level.ordinal >= min.ordinal)
        });
    let outcome = if buggy {
        model.fail_outcome.clone()
    } else {
        model.pass_outcome.clone()
    };
    Ok((outcome, spectrum))
}

/// Deterministic compiler stand-in backed by a [`BugModel`].
#[derive(Debug, Clone)]
pub struct SimulatedDriver {
    model: BugModel,
}

impl SimulatedDriver {
    pub fn new(model: BugModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &BugModel {
        &self.model
    }
}

impl CompilerDriver for SimulatedDriver {
    fn levels(&self) -> Result<Vec<OptimizationLevel>, DriverError> {
        Ok(self.model.levels.clone())
    }

    fn enabled_options(&self, level: &OptimizationLevel) -> Result<OptionSpace, DriverError> {
        self.model
            .option_space(&level.label)
            .cloned()
            .ok_or_else(|| DriverError::LevelUnknown(level.label.clone()))
    }

    fn compile_and_run(
        &self,
        program: &TestProgram,
        conf: &Configuration,
        want_coverage: bool,
    ) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError> {
        let (outcome, spectrum) = simulate(&self.model, program, conf)?;
        Ok((
            outcome,
            if want_coverage {
                spectrum
            } else {
                CoverageSpectrum::new()
            },
        ))
    }

    fn source_files(&self) -> Vec<String> {
        self.model.files.clone()
    }

    fn describe(&self) -> String {
        format!("sim:{}", self.model.id)
    }
}
