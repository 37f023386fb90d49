//! `optiso`: isolate the compiler source files behind an optimization bug.

mod artifacts;
mod exit;

// stdout may be a pipe that closed early (`optiso bench | head`)
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use optiso_core::config::{CompilerDriver, TestProgram};
use optiso_core::coverage::CoverageFormat;
use optiso_core::drivers::{
    load_bug_model_file, ExternalDriver, ExternalSettings, SimulatedDriver,
};
use optiso_core::evaluation::{
    generate_corpus, load_corpus, run_ablations, Ablation, BenchSettings,
};
use optiso_core::localize::{localize, resolve_level, LocalizeSettings};
use optiso_core::pipeline::{triage_options, DiffMode, Executor};
use optiso_core::sbfl::Formula;

use crate::artifacts::{DriverInfo, RunDir};
use crate::exit::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "optiso",
    version,
    about = "Isolate faulty compiler files with adversarial option pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the whole pipeline and write the ranked files.
    Localize(LocalizeArgs),
    /// Classify the options enabled at the failing level.
    Triage(TriageArgs),
    /// Run ablations over a corpus of bug models.
    Bench(BenchArgs),
    /// Write seeded synthetic bug models.
    GenCorpus(GenCorpusArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum DriverKind {
    Sim,
    External,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CovFormat {
    Canonical,
    Gcov,
}

#[derive(Args, Debug)]
struct DriverArgs {
    #[arg(long, value_enum, default_value = "sim")]
    driver: DriverKind,
    /// Bug model document (simulated driver).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Compiler command, e.g. "gcc -w" (external driver).
    #[arg(long)]
    compiler: Option<String>,
    /// Test program (external driver).
    #[arg(long)]
    program: Option<PathBuf>,
    /// Extra compile flag enabling coverage instrumentation; repeatable.
    #[arg(long = "coverage-flag", allow_hyphen_values = true)]
    coverage_flags: Vec<String>,
    /// Command run in the scratch directory whose stdout is the coverage.
    #[arg(long)]
    coverage_cmd: Option<String>,
    #[arg(long, value_enum, default_value = "gcov")]
    coverage_format: CovFormat,
    /// Per-compilation and per-run time bound in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

#[derive(Args, Debug)]
struct LocalizeArgs {
    #[command(flatten)]
    driver: DriverArgs,
    #[arg(long)]
    fail_level: String,
    /// Defaults to the level just below the failing level.
    #[arg(long)]
    pass_level: Option<String>,
    #[arg(long, default_value_t = 3, value_parser = parse_pairs)]
    pairs: usize,
    #[arg(long, default_value = "ochiai", value_parser = parse_formula)]
    formula: Formula,
    /// Keep every covered file as a candidate.
    #[arg(long)]
    no_filter: bool,
    /// Also count statements executed only at the passing level.
    #[arg(long)]
    symmetric_diff: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "optiso-run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TriageArgs {
    #[command(flatten)]
    driver: DriverArgs,
    #[arg(long)]
    fail_level: String,
    #[arg(long)]
    pass_level: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "optiso-run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory of bug-model documents.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "all", value_parser = parse_ablation)]
    ablate: Ablation,
    /// Skip models that fail to load instead of stopping.
    #[arg(long)]
    keep_going: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Where to write the JSON report.
    #[arg(long, default_value = "bench.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    /// File-name prefix; files are `<prefix><index>.json`.
    #[arg(long, default_value = "g")]
    prefix: String,
    /// First index used in file names.
    #[arg(long, default_value_t = 0)]
    start: usize,
}

fn parse_pairs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k @ (1 | 3 | 5 | 10)) => Ok(k),
        _ => Err(format!("`{s}` is not one of 1, 3, 5, 10")),
    }
}

fn parse_formula(s: &str) -> Result<Formula, String> {
    s.parse::<Formula>().map_err(|e| e.to_string())
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse()
}

struct Loaded {
    driver: Box<dyn CompilerDriver>,
    program: TestProgram,
    info: DriverInfo,
}

fn load_driver(args: &DriverArgs) -> Result<Loaded, Failure> {
    match args.driver {
        DriverKind::Sim => {
            let path = args
                .model
                .as_ref()
                .ok_or_else(|| Failure::usage("--driver sim needs --model <path>"))?;
            let model = load_bug_model_file(path).map_err(Failure::data)?;
            let info = DriverInfo::Simulated {
                model: path.display().to_string(),
                model_id: model.id.clone(),
            };
            Ok(Loaded {
                driver: Box::new(SimulatedDriver::new(model)),
                program: TestProgram::inert(),
                info,
            })
        }
        DriverKind::External => {
            let compiler = args
                .compiler
                .as_deref()
                .ok_or_else(|| Failure::usage("--driver external needs --compiler <cmd>"))?;
            let program = args
                .program
                .as_ref()
                .ok_or_else(|| Failure::usage("--driver external needs --program <path>"))?;
            let mut settings = ExternalSettings::new(compiler);
            settings.coverage_flags = args.coverage_flags.clone();
            settings.coverage_cmd = args
                .coverage_cmd
                .as_ref()
                .map(|c| c.split_whitespace().map(str::to_string).collect());
            settings.coverage_format = match args.coverage_format {
                CovFormat::Canonical => CoverageFormat::Canonical,
                CovFormat::Gcov => CoverageFormat::GcovIntermediate,
            };
            settings.timeout = Duration::from_secs(args.timeout);
            let info = DriverInfo::External {
                compiler: compiler.to_string(),
                program: program.display().to_string(),
                coverage_flags: settings.coverage_flags.clone(),
                coverage_cmd: args.coverage_cmd.clone(),
                timeout_secs: args.timeout,
            };
            let driver = ExternalDriver::new(settings).map_err(Failure::driver)?;
            Ok(Loaded {
                driver: Box::new(driver),
                program: TestProgram::from_path(program),
                info,
            })
        }
    }
}

fn cmd_localize(args: &LocalizeArgs) -> Result<(), Failure> {
    let loaded = load_driver(&args.driver)?;
    let mut settings = LocalizeSettings::new(&args.fail_level);
    settings.pass_level = args.pass_level.clone();
    settings.pairs = args.pairs;
    settings.formula = args.formula;
    settings.filter = !args.no_filter;
    settings.diff_mode = if args.symmetric_diff {
        DiffMode::Symmetric
    } else {
        DiffMode::FailMinusPass
    };
    settings.jobs = args.jobs;

    let mut run = RunDir::create(&args.out, "localize", loaded.info.clone())?;
    let report =
        localize(loaded.driver.as_ref(), &loaded.program, &settings).map_err(Failure::localize)?;
    run.write_localize(&report, &settings)?;
    run.finish()?;

    out!(
        "fail level {}, pass level {}; {} pair(s), {} compilation(s)",
        report.fail_level,
        report.pass_level,
        report.pairs.len(),
        report.compilations
    );
    out!("rank\tfile\ttotal_vote");
    for e in report.aggregate.entries.iter().take(20) {
        out!("{}\t{}\t{:.6}", e.rank, e.file, e.total);
    }
    out!("artifacts in {}", args.out.display());
    Ok(())
}

fn cmd_triage(args: &TriageArgs) -> Result<(), Failure> {
    let loaded = load_driver(&args.driver)?;
    let driver = loaded.driver.as_ref();
    let o_fail = resolve_level(driver, &args.fail_level).map_err(Failure::localize)?;
    let o_pass = match &args.pass_level {
        Some(l) => resolve_level(driver, l),
        None => optiso_core::localize::level_below(driver, &o_fail),
    }
    .map_err(Failure::localize)?;

    let mut run = RunDir::create(&args.out, "triage", loaded.info.clone())?;
    let exec = Executor::new(driver, &loaded.program, args.jobs);
    let pass_result = exec
        .outcome(&optiso_core::config::Configuration::level_only(
            o_pass.clone(),
        ))
        .map_err(Failure::driver)?;
    let triage = triage_options(&exec, &o_fail, &pass_result).map_err(Failure::pipeline)?;
    run.write_triage(&triage, &o_pass)?;
    run.finish()?;

    let names = |opts: &[optiso_core::config::FineGrainedOption]| -> String {
        opts.iter()
            .map(|o| o.name.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    out!(
        "bug-triggering ({}): {}",
        triage.triage.bug_triggering.len(),
        names(&triage.triage.bug_triggering)
    );
    out!(
        "bug-free ({}): {}",
        triage.triage.bug_free.len(),
        names(&triage.triage.bug_free)
    );
    if triage.triage.bug_triggering.is_empty() {
        out!("no single bug-triggering option; level-granularity fallback will apply");
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let (corpus, errors) = load_corpus(&args.corpus)
        .map_err(|e| Failure::io(format!("cannot read corpus {}: {e}", args.corpus.display())))?;
    for (path, e) in &errors {
        eprintln!("error: {}: {e}", path.display());
    }
    if !errors.is_empty() && !args.keep_going {
        return Err(Failure::data_msg(format!(
            "{} model(s) failed to load; rerun with --keep-going to skip them",
            errors.len()
        )));
    }
    let settings = BenchSettings {
        ablation: args.ablate,
        jobs: args.jobs,
    };
    let report = run_ablations(&corpus, &settings).map_err(Failure::eval)?;
    artifacts::write_json(&args.out, &report)?;
    out!("{}", report.to_table().trim_end_matches('\n'));
    for r in &report.results {
        for (bug, e) in &r.failures {
            eprintln!("warning: {} on {bug}: {e}", r.variant.name);
        }
    }
    out!("report written to {}", args.out.display());
    if !errors.is_empty() {
        return Err(Failure::data_msg(format!(
            "{} model(s) skipped because they failed to load",
            errors.len()
        )));
    }
    Ok(())
}

fn cmd_gen_corpus(args: &GenCorpusArgs) -> Result<(), Failure> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::io(format!("{}: {e}", args.out.display())))?;
    for (i, doc) in generate_corpus(args.seed, args.count)
        .into_iter()
        .enumerate()
    {
        let path = args
            .out
            .join(format!("{}{:02}.json", args.prefix, args.start + i));
        artifacts::write_json(&path, &doc)?;
        out!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Localize(a) => cmd_localize(a),
        Command::Triage(a) => cmd_triage(a),
        Command::Bench(a) => cmd_bench(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("optiso: {}: {}", f.class(), f.message);
            ExitCode::from(f.code)
        }
    }
}
