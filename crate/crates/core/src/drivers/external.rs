//! Driver that shells out to a real compiler.
//!
//! Each `compile_and_run` call gets its own scratch directory. The compile
//! step runs with `GCOV_PREFIX` pointed into that directory so an
//! instrumented compiler writes its `.gcda` files per call, and
//! `OPTISO_WORKDIR` names the directory for any coverage helper.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::config::{
    CompilationOutcome, CompilerDriver, Configuration, DriverError, OptimizationLevel, OptionSpace,
    TestProgram,
};
use crate::coverage::{parse_coverage, CoverageFormat, CoverageSpectrum};

/// Exit code recorded when the compiled program exceeds its time bound.
pub const TIMEOUT_EXIT_CODE: i32 = 124;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Environment variable overriding the scratch-directory root.
pub const TMPDIR_ENV: &str = "OPTISO_TMPDIR";

const GCC_LEVELS: [&str; 5] = ["O0", "O1", "Os", "O2", "O3"];

#[derive(Debug, Clone)]
pub struct ExternalSettings {
    /// Compiler command, already split into program and leading arguments.
    pub compiler: Vec<String>,
    /// Extra flags placed after the option flags, e.g. instrumentation.
    pub coverage_flags: Vec<String>,
    /// Helper run in the scratch directory after compilation; its stdout is
    /// the coverage document. When absent, `*.gcov` and `*.tsv` files found
    /// under the scratch directory are read instead.
    pub coverage_cmd: Option<Vec<String>>,
    pub coverage_format: CoverageFormat,
    pub timeout: Duration,
    pub scratch_root: Option<PathBuf>,
}

impl ExternalSettings {
    pub fn new(compiler: &str) -> Self {
        Self {
            compiler: compiler.split_whitespace().map(str::to_string).collect(),
            coverage_flags: Vec::new(),
            coverage_cmd: None,
            coverage_format: CoverageFormat::GcovIntermediate,
            timeout: DEFAULT_TIMEOUT,
            scratch_root: std::env::var_os(TMPDIR_ENV).map(PathBuf::from),
        }
    }
}

/// Argument vector for one compilation:
/// `<compiler> -<level> -fno-<opt>... <coverage flags> <program> -o <output>`.
pub fn compile_command_line(
    settings: &ExternalSettings,
    conf: &Configuration,
    program: &Path,
    output: &Path,
) -> Vec<String> {
    let mut argv = settings.compiler.clone();
    argv.extend(conf.flags());
    argv.extend(settings.coverage_flags.iter().cloned());
    argv.push(program.display().to_string());
    argv.push("-o".to_string());
    argv.push(output.display().to_string());
    argv
}

struct Finished {
    status: Option<ExitStatus>,
    stdout: Vec<u8>,
}

fn run_bounded(mut cmd: Command, timeout: Duration, what: &str) -> Result<Finished, DriverError> {
    cmd.stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let mut child = cmd
        .spawn()
        .map_err(|e| DriverError::Unavailable(format!("cannot start {what}: {e}")))?;
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let status = match child
        .wait_timeout(timeout)
        .map_err(|e| DriverError::Unavailable(format!("waiting on {what}: {e}")))?
    {
        Some(status) => Some(status),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            None
        }
    };
    let stdout = reader.join().unwrap_or_default();
    Ok(Finished { status, stdout })
}

/// Exit code with signals folded in shell-style as `128 + signal`.
fn exit_code(status: &ExitStatus) -> i32 {
    if let Some(code) = status.code() {
        return code;
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return 128 + sig;
        }
    }
    -1
}

/// Compiles `program` under `conf` inside `workdir`, runs the result and
/// collects coverage when asked.
pub fn external_compile_and_run(
    settings: &ExternalSettings,
    program: &Path,
    conf: &Configuration,
    workdir: &Path,
    want_coverage: bool,
) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError> {
    let (exe, args) = settings
        .compiler
        .split_first()
        .ok_or_else(|| DriverError::Unavailable("empty compiler command".into()))?;
    let output = workdir.join("prog");
    let argv = compile_command_line(settings, conf, program, &output);
    let mut cmd = Command::new(exe);
    cmd.args(&argv[1..])
        .current_dir(workdir)
        .env("GCOV_PREFIX", workdir.join("gcov"))
        .env("OPTISO_WORKDIR", workdir);
    debug_assert_eq!(&argv[1..1 + args.len()], args);
    let compiled = run_bounded(cmd, settings.timeout, "compiler")?;
    let Some(status) = compiled.status else {
        return Err(DriverError::Timeout(settings.timeout));
    };

    let outcome = if !status.success() {
        CompilationOutcome::compiler_crash(exit_code(&status))
    } else {
        let mut run = Command::new(&output);
        run.current_dir(workdir);
        let ran = run_bounded(run, settings.timeout, "test program")?;
        match ran.status {
            None => CompilationOutcome::run_abort(TIMEOUT_EXIT_CODE),
            Some(s) if s.success() => CompilationOutcome::run_ok(0, &ran.stdout),
            Some(s) => CompilationOutcome::run_abort(exit_code(&s)),
        }
    };

    let spectrum = if want_coverage {
        collect_coverage(settings, workdir)?
    } else {
        CoverageSpectrum::new()
    };
    Ok((outcome, spectrum))
}

fn collect_coverage(
    settings: &ExternalSettings,
    workdir: &Path,
) -> Result<CoverageSpectrum, DriverError> {
    if let Some(helper) = &settings.coverage_cmd {
        let (exe, args) = helper
            .split_first()
            .ok_or_else(|| DriverError::CoverageUnavailable("empty coverage command".into()))?;
        let mut cmd = Command::new(exe);
        cmd.args(args)
            .current_dir(workdir)
            .env("GCOV_PREFIX", workdir.join("gcov"))
            .env("OPTISO_WORKDIR", workdir);
        let done = run_bounded(cmd, settings.timeout, "coverage command")?;
        match done.status {
            Some(s) if s.success() => {}
            Some(s) => {
                return Err(DriverError::CoverageUnavailable(format!(
                    "coverage command exited with {}",
                    exit_code(&s)
                )))
            }
            None => return Err(DriverError::Timeout(settings.timeout)),
        }
        let text = String::from_utf8_lossy(&done.stdout);
        let records = parse_coverage(&text, settings.coverage_format)
            .map_err(|e| DriverError::CoverageUnavailable(e.to_string()))?;
        if records.is_empty() {
            return Err(DriverError::CoverageUnavailable(
                "coverage command produced no records".into(),
            ));
        }
        return Ok(CoverageSpectrum::from_records(records));
    }

    let mut files = Vec::new();
    find_coverage_files(workdir, &mut files);
    files.sort();
    if files.is_empty() {
        return Err(DriverError::CoverageUnavailable(format!(
            "no coverage files under {}",
            workdir.display()
        )));
    }
    let mut spectrum = CoverageSpectrum::new();
    for path in files {
        let format = if path.extension().is_some_and(|e| e == "tsv") {
            CoverageFormat::Canonical
        } else {
            CoverageFormat::GcovIntermediate
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| DriverError::CoverageUnavailable(format!("{}: {e}", path.display())))?;
        let records = parse_coverage(&text, format)
            .map_err(|e| DriverError::CoverageUnavailable(format!("{}: {e}", path.display())))?;
        for r in records {
            spectrum.add(&r.file, r.line, r.count);
        }
    }
    Ok(spectrum)
}

fn find_coverage_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            find_coverage_files(&path, out);
        } else if path.extension().is_some_and(|e| e == "gcov" || e == "tsv") {
            out.push(path);
        }
    }
}

/// Parses `-Q --help=optimizers` output into the names of enabled boolean
/// options, in the order printed.
pub fn parse_optimizer_help(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    for line in text.lines() {
        let mut fields = line.split_whitespace();
        let (Some(flag), Some(state)) = (fields.next(), fields.last()) else {
            continue;
        };
        if state != "[enabled]" {
            continue;
        }
        let Some(name) = flag.strip_prefix("-f") else {
            continue;
        };
        if name.is_empty() || name.starts_with("no-") || name.contains(['=', '<']) {
            continue;
        }
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
        }
    }
    names
}

/// GCC-style external driver.
pub struct ExternalDriver {
    settings: ExternalSettings,
    levels: Vec<OptimizationLevel>,
    spaces: Mutex<BTreeMap<String, OptionSpace>>,
}

impl ExternalDriver {
    pub fn new(settings: ExternalSettings) -> Result<Self, DriverError> {
        if settings.compiler.is_empty() {
            return Err(DriverError::Unavailable("empty compiler command".into()));
        }
        let levels = GCC_LEVELS
            .iter()
            .enumerate()
            .map(|(i, l)| OptimizationLevel::new(*l, i as u32))
            .collect();
        Ok(Self {
            settings,
            levels,
            spaces: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn settings(&self) -> &ExternalSettings {
        &self.settings
    }

    fn scratch(&self) -> Result<tempfile::TempDir, DriverError> {
        let builder = {
            let mut b = tempfile::Builder::new();
            b.prefix("optiso-");
            b
        };
        match &self.settings.scratch_root {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        }
        .map_err(|e| DriverError::Unavailable(format!("cannot create scratch directory: {e}")))
    }
}

impl CompilerDriver for ExternalDriver {
    fn levels(&self) -> Result<Vec<OptimizationLevel>, DriverError> {
        Ok(self.levels.clone())
    }

    fn enabled_options(&self, level: &OptimizationLevel) -> Result<OptionSpace, DriverError> {
        if !self.levels.iter().any(|l| l == level) {
            return Err(DriverError::LevelUnknown(level.label.clone()));
        }
        if let Some(space) = self.spaces.lock().unwrap().get(&level.label) {
            return Ok(space.clone());
        }
        let (exe, args) = self
            .settings
            .compiler
            .split_first()
            .expect("checked in new");
        let mut cmd = Command::new(exe);
        cmd.args(args)
            .arg("-Q")
            .arg("--help=optimizers")
            .arg(format!("-{}", level.label));
        let done = run_bounded(cmd, self.settings.timeout, "compiler option query")?;
        match done.status {
            Some(s) if s.success() => {}
            Some(s) => {
                return Err(DriverError::Unavailable(format!(
                    "option query exited with {}",
                    exit_code(&s)
                )))
            }
            None => return Err(DriverError::Timeout(self.settings.timeout)),
        }
        let names = parse_optimizer_help(&String::from_utf8_lossy(&done.stdout));
        let space = OptionSpace::from_names(level.clone(), &names)?;
        self.spaces
            .lock()
            .unwrap()
            .insert(level.label.clone(), space.clone());
        Ok(space)
    }

    fn compile_and_run(
        &self,
        program: &TestProgram,
        conf: &Configuration,
        want_coverage: bool,
    ) -> Result<(CompilationOutcome, CoverageSpectrum), DriverError> {
        let path = program
            .path
            .as_ref()
            .ok_or_else(|| DriverError::Unavailable("external driver needs a program".into()))?;
        let program = std::fs::canonicalize(path)
            .map_err(|e| DriverError::Unavailable(format!("{}: {e}", path.display())))?;
        let dir = self.scratch()?;
        external_compile_and_run(&self.settings, &program, conf, dir.path(), want_coverage)
    }

    fn describe(&self) -> String {
        format!("external:{}", self.settings.compiler.join(" "))
    }
}
