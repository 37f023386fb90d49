//! Runs the external driver against the system `gcc`. Each test returns
//! early when no gcc is on the path.

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use optiso_core::config::{
    CompilerDriver, Configuration, DriverError, OptimizationLevel, OptionSpace, OutcomeStatus,
    TestProgram,
};
use optiso_core::coverage::CoverageFormat;
use optiso_core::drivers::external::compile_command_line;
use optiso_core::drivers::{ExternalDriver, ExternalSettings};

const EMPTY_SHA256: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

fn have_gcc() -> bool {
    let ok = Command::new("gcc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success());
    if !ok {
        eprintln!("gcc not found; skipping");
    }
    ok
}

fn write_program(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn settings(dir: &Path) -> ExternalSettings {
    let mut s = ExternalSettings::new("gcc");
    s.scratch_root = Some(dir.to_path_buf());
    s.timeout = Duration::from_secs(30);
    s
}

fn run(
    driver: &ExternalDriver,
    program: &Path,
    level: &str,
) -> optiso_core::config::CompilationOutcome {
    let conf = Configuration::level_only(driver.level(level).unwrap());
    driver
        .compile_and_run(&TestProgram::from_path(program), &conf, false)
        .unwrap()
        .0
}

#[test]
fn disabled_options_become_fno_flags() {
    let space = OptionSpace::from_names(
        OptimizationLevel::new("Os", 2),
        &["expensive-optimizations", "tree-pre"],
    )
    .unwrap();
    let conf = Configuration::new(&space, ["expensive-optimizations"]).unwrap();
    let argv = compile_command_line(
        &ExternalSettings::new("gcc"),
        &conf,
        Path::new("g.c"),
        Path::new("out"),
    );
    assert_eq!(
        argv,
        [
            "gcc",
            "-Os",
            "-fno-expensive-optimizations",
            "g.c",
            "-o",
            "out"
        ]
    );
}

#[test]
fn silent_program_is_run_ok_with_empty_digest() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "quiet.c", "int main(void) { return 0; }\n");
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let outcome = run(&driver, &prog, "O1");
    assert_eq!(outcome.status, OutcomeStatus::RunOk);
    assert_eq!(outcome.exit_code, 0);
    assert_eq!(outcome.output_digest, EMPTY_SHA256);
}

#[test]
fn output_differences_change_the_digest() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let a = write_program(
        tmp.path(),
        "a.c",
        "#include <stdio.h>\nint main(void) { puts(\"1\"); return 0; }\n",
    );
    let b = write_program(
        tmp.path(),
        "b.c",
        "#include <stdio.h>\nint main(void) { puts(\"2\"); return 0; }\n",
    );
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let (oa, ob) = (run(&driver, &a, "O0"), run(&driver, &b, "O0"));
    assert_eq!(oa.status, OutcomeStatus::RunOk);
    assert_ne!(oa, ob);
    assert_eq!(oa, run(&driver, &a, "O2"));
}

#[test]
fn abort_is_run_abort_with_signal_code() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(
        tmp.path(),
        "abort.c",
        "#include <stdlib.h>\nint main(void) { abort(); }\n",
    );
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let outcome = run(&driver, &prog, "O2");
    assert_eq!(outcome.status, OutcomeStatus::RunAbort);
    assert_eq!(outcome.exit_code, 134);
}

#[test]
fn nonzero_exit_is_run_abort() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "three.c", "int main(void) { return 3; }\n");
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let outcome = run(&driver, &prog, "O0");
    assert_eq!(outcome.status, OutcomeStatus::RunAbort);
    assert_eq!(outcome.exit_code, 3);
}

#[test]
fn rejected_source_is_compiler_crash() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "bad.c", "int main(void) { return }\n");
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let outcome = run(&driver, &prog, "O1");
    assert_eq!(outcome.status, OutcomeStatus::CompilerCrash);
    assert_ne!(outcome.exit_code, 0);
}

#[test]
fn hanging_program_times_out_as_abort() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(
        tmp.path(),
        "spin.c",
        "int main(void) { volatile int x = 1; while (x) {} }\n",
    );
    let mut s = settings(tmp.path());
    s.timeout = Duration::from_secs(2);
    let driver = ExternalDriver::new(s).unwrap();
    let outcome = run(&driver, &prog, "O0");
    assert_eq!(outcome.status, OutcomeStatus::RunAbort);
    assert_eq!(outcome.exit_code, 124);
}

#[test]
fn option_spaces_come_from_the_compiler() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let o0 = driver
        .enabled_options(&driver.level("O0").unwrap())
        .unwrap();
    let o2 = driver
        .enabled_options(&driver.level("O2").unwrap())
        .unwrap();
    assert!((50..=200).contains(&o2.len()), "{} options at O2", o2.len());
    assert!(o0.len() < o2.len());
    assert!(o2.contains("expensive-optimizations"));
    assert!(!o0.contains("expensive-optimizations"));

    // the negated forms of listed options are accepted
    let prog = write_program(tmp.path(), "p.c", "int main(void) { return 0; }\n");
    let conf = Configuration::from_options(&o2, o2.options.iter().take(20)).unwrap();
    let (outcome, _) = driver
        .compile_and_run(&TestProgram::from_path(&prog), &conf, false)
        .unwrap();
    assert_eq!(outcome.status, OutcomeStatus::RunOk);
}

fn executable(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[test]
fn coverage_command_output_is_parsed() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "p.c", "int main(void) { return 0; }\n");
    let helper = executable(
        tmp.path(),
        "cov.sh",
        "#!/bin/sh\nprintf 'tree-vect-slp.c\\t120\\t3\\ntree-vect-slp.c\\t121\\t0\\nexpr.c\\t7\\t2\\nexpr.c\\t7\\t5\\n'\n",
    );
    let mut s = settings(tmp.path());
    s.coverage_cmd = Some(vec![helper.display().to_string()]);
    s.coverage_format = CoverageFormat::Canonical;
    let driver = ExternalDriver::new(s).unwrap();
    let conf = Configuration::level_only(driver.level("O1").unwrap());
    let (_, spectrum) = driver
        .compile_and_run(&TestProgram::from_path(&prog), &conf, true)
        .unwrap();
    assert_eq!(spectrum.count("tree-vect-slp.c", 120), Some(3));
    assert_eq!(spectrum.count("tree-vect-slp.c", 121), Some(0));
    assert!(!spectrum.is_executed("tree-vect-slp.c", 121));
    assert_eq!(spectrum.count("expr.c", 7), Some(7));
}

#[test]
fn coverage_files_left_in_the_workdir_are_read() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "p.c", "int main(void) { return 0; }\n");
    // a compiler wrapper that leaves gcov-style output behind, keyed by level
    let wrapper = executable(
        tmp.path(),
        "cc.sh",
        "#!/bin/sh\nprintf 'file:cse.c\\nlcount:4,1\\n' > \"$OPTISO_WORKDIR/cse.gcov\"\n\
         case \"$1\" in -O2) printf 'file:gcse.c\\nlcount:9,2\\n' > \"$OPTISO_WORKDIR/gcse.gcov\";; esac\n\
         exec gcc \"$@\"\n",
    );
    let mut s = settings(tmp.path());
    s.compiler = vec![wrapper.display().to_string()];
    let driver = ExternalDriver::new(s).unwrap();
    let program = TestProgram::from_path(&prog);
    let o1 = Configuration::level_only(driver.level("O1").unwrap());
    let o2 = Configuration::level_only(driver.level("O2").unwrap());
    let (_, s1) = driver.compile_and_run(&program, &o1, true).unwrap();
    let (_, s2) = driver.compile_and_run(&program, &o2, true).unwrap();
    assert!(s1.is_executed("cse.c", 4) && !s1.is_executed("gcse.c", 9));
    assert!(s2.is_executed("cse.c", 4) && s2.is_executed("gcse.c", 9));
}

#[test]
fn missing_coverage_is_an_error() {
    if !have_gcc() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "p.c", "int main(void) { return 0; }\n");
    let driver = ExternalDriver::new(settings(tmp.path())).unwrap();
    let conf = Configuration::level_only(driver.level("O0").unwrap());
    let err = driver
        .compile_and_run(&TestProgram::from_path(&prog), &conf, true)
        .unwrap_err();
    assert!(
        matches!(err, DriverError::CoverageUnavailable(_)),
        "{err:?}"
    );
}

#[test]
fn missing_compiler_is_unavailable() {
    let tmp = tempfile::tempdir().unwrap();
    let prog = write_program(tmp.path(), "p.c", "int main(void) { return 0; }\n");
    let mut s = settings(tmp.path());
    s.compiler = vec!["/nonexistent/cc".into()];
    let driver = ExternalDriver::new(s).unwrap();
    let conf = Configuration::level_only(driver.level("O0").unwrap());
    let err = driver
        .compile_and_run(&TestProgram::from_path(&prog), &conf, false)
        .unwrap_err();
    assert!(matches!(err, DriverError::Unavailable(_)), "{err:?}");
}
