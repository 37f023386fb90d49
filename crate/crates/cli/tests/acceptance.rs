//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines always reach the terminal.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use optiso_core::aggregation::{aggregate, vote_weight};
use optiso_core::config::{Configuration, TestProgram};
use optiso_core::drivers::{simulate, BugModel, SimulatedDriver};
use optiso_core::evaluation::bench::failing_level;
use optiso_core::evaluation::stats::{a12, mann_whitney_u, PValueMethod};
use optiso_core::evaluation::{
    generate_model_with, load_corpus, run_ablations, Ablation, BenchReport, BenchSettings, BugShape,
};
use optiso_core::pipeline::{triage_options, Executor};
use optiso_core::sbfl::{
    statement_suspiciousness, FileRanking, Formula, RankedFile, SpectrumCounts,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn ranking(pair: &str, ranked: &[(&str, u32)]) -> FileRanking {
    FileRanking {
        pair_id: pair.to_string(),
        entries: ranked
            .iter()
            .map(|(f, r)| RankedFile {
                file: f.to_string(),
                score: 1.0 / f64::from(*r),
                rank: *r,
            })
            .collect(),
    }
}

fn voting_case_study() -> Outcome {
    let rankings = [
        ranking("p1", &[("a.c", 1), ("b.c", 4)]),
        ranking("p2", &[("a.c", 1), ("b.c", 3)]),
        ranking("p3", &[("b.c", 4), ("a.c", 67)]),
    ];
    let agg = aggregate(&rankings).map_err(|e| e.to_string())?;
    let a = agg.total_of("a.c").ok_or("a.c missing")?;
    let b = agg.total_of("b.c").ok_or("b.c missing")?;
    ensure(
        (a - (10.0 + 1.0 / 67.0)).abs() < 1e-9,
        format!("(1,1,67) total {a}"),
    )?;
    ensure(b == 12.0, format!("(4,3,4) total {b}"))?;
    ensure(
        agg.rank_of("b.c") < agg.rank_of("a.c"),
        "(4,3,4) file not above (1,1,67) file",
    )?;
    Ok(format!("totals {a:.4} and {b}; (4,3,4) ranks first"))
}

fn vote_weights() -> Outcome {
    let table = [
        (1, 5.0),
        (5, 4.0),
        (6, 3.0),
        (10, 3.0),
        (11, 2.0),
        (20, 2.0),
        (21, 1.0 / 21.0),
        (50, 0.02),
    ];
    for (rank, want) in table {
        let got = vote_weight(rank).map_err(|e| e.to_string())?;
        ensure(got == want, format!("rank {rank}: {got} != {want}"))?;
    }
    Ok("8 ranks exact".into())
}

fn ochiai_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for ep in 0..=1000u32 {
        let got = statement_suspiciousness(SpectrumCounts::new(1, 0, ep, 0), Formula::Ochiai);
        let want = 1.0 / f64::from(1 + ep).sqrt();
        worst = worst.max((got - want).abs());
    }
    ensure(worst < 1e-12, format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:e} over ep 0..=1000"))
}

fn formula_suite() -> Outcome {
    let inf = f64::INFINITY;
    let s15 = 15f64.sqrt();
    // (ef, nf, ep, np) -> Ochiai, Tarantula, DStar, Dice, Barinel, Op2
    type Case = ((u32, u32, u32, u32), [f64; 6]);
    let cases: [Case; 7] = [
        ((1, 0, 0, 0), [1.0, 1.0, inf, 2.0, 1.0, 1.0]),
        ((1, 0, 1, 0), [1.0 / 2f64.sqrt(), 0.5, 1.0, 1.0, 0.5, 0.5]),
        ((0, 1, 0, 1), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ((0, 0, 0, 0), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        (
            (2, 1, 3, 4),
            [2.0 / s15, 14.0 / 23.0, 1.0, 2.0 / 3.0, 0.4, 1.625],
        ),
        ((1, 0, 3, 0), [0.5, 0.5, 1.0 / 3.0, 0.5, 0.25, 0.25]),
        ((0, 2, 5, 1), [0.0, 0.0, 0.0, 0.0, 0.0, -5.0 / 7.0]),
    ];
    let mut checked = 0;
    for ((ef, nf, ep, np), want) in cases {
        for (formula, w) in Formula::ALL.iter().zip(want) {
            let got = statement_suspiciousness(SpectrumCounts::new(ef, nf, ep, np), *formula);
            let ok = if w.is_infinite() {
                got == w
            } else {
                (got - w).abs() < 1e-12
            };
            ensure(
                ok,
                format!("{formula} on ({ef},{nf},{ep},{np}): {got} != {w}"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} values, 7 count vectors per formula"))
}

fn triage_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let program = TestProgram::inert();
    let shapes = [
        BugShape::Single,
        BugShape::Conjunction,
        BugShape::Disjunction,
    ];
    let mut options_seen = 0;
    for i in 0..60 {
        let doc = generate_model_with(&mut rng, shapes[i % 3]);
        let model = BugModel::from_document(doc, &format!("r{i}")).map_err(|e| e.to_string())?;
        let fail_label = failing_level(&model).map_err(|e| e.to_string())?;
        let o_fail = model.level(&fail_label).ok_or("no level")?.clone();
        let below = model
            .levels
            .iter()
            .rfind(|l| *l < &o_fail)
            .ok_or("no lower level")?;
        let space = model.option_space(&fail_label).ok_or("no space")?;
        let n = space.len();
        ensure(n <= 12, format!("{} has {n} options", model.id))?;

        // every disable set at the failing level
        let mut table = Vec::with_capacity(1 << n);
        for mask in 0u32..1 << n {
            let disabled = space
                .options
                .iter()
                .enumerate()
                .filter(|(j, _)| mask & (1 << j) != 0);
            let conf = Configuration::from_options(space, disabled.map(|(_, o)| o))
                .map_err(|e| e.to_string())?;
            table.push(
                simulate(&model, &program, &conf)
                    .map_err(|e| e.to_string())?
                    .0,
            );
        }
        let pass = simulate(&model, &program, &Configuration::level_only(below.clone()))
            .map_err(|e| e.to_string())?
            .0;

        let driver = SimulatedDriver::new(model.clone());
        let exec = Executor::new(&driver, &program, 1);
        let run = triage_options(&exec, &o_fail, &pass).map_err(|e| e.to_string())?;
        ensure(
            run.triage.bug_triggering.len() + run.triage.bug_free.len() == n,
            "partition broken",
        )?;
        for (j, opt) in space.options.iter().enumerate() {
            let flips = table[0] != pass && table[1 << j] == pass;
            let labelled = run.triage.bug_triggering.contains(opt);
            ensure(
                flips == labelled,
                format!("{}: {} disagrees", model.id, opt.name),
            )?;
        }
        options_seen += n;
    }
    Ok(format!("60 models, {options_seen} options, 100% agreement"))
}

fn structure(report: &BenchReport) -> Outcome {
    ensure(report.pairs_checked > 0, "no pairs checked")?;
    ensure(
        report.structure_violations == 0,
        format!("{} violations", report.structure_violations),
    )?;
    let failures: usize = report.results.iter().map(|r| r.failures.len()).sum();
    ensure(failures == 0, format!("{failures} runs failed"))?;
    Ok(format!(
        "{} pairs checked, 0 violations",
        report.pairs_checked
    ))
}

fn filter_safety(report: &BenchReport) -> Outcome {
    let c = report.candidates.as_ref().ok_or("no candidate summary")?;
    ensure(c.bugs == 20, format!("{} bugs", c.bugs))?;
    ensure(
        c.faulty_kept == c.bugs,
        format!("faulty kept in {}/{}", c.faulty_kept, c.bugs),
    )?;
    ensure(
        c.mean_suspicious < c.mean_covered,
        format!(
            "suspicious {} >= covered {}",
            c.mean_suspicious, c.mean_covered
        ),
    )?;
    Ok(format!(
        "all {:.1} -> covered {:.1} -> suspicious {:.1}; faulty kept {}/{}",
        c.mean_all, c.mean_covered, c.mean_suspicious, c.faulty_kept, c.bugs
    ))
}

fn multi_pair_benefit(report: &BenchReport) -> Outcome {
    let top1 = |name: &str| {
        report
            .result(name)
            .map(|r| r.metrics.top(1))
            .ok_or(format!("no {name}"))
    };
    let k3 = top1("k=3")?;
    let mut singles = Vec::new();
    for name in ["k=1", "single(1)", "single(1/2)", "single(0)"] {
        let t = top1(name)?;
        ensure(k3 >= t, format!("k=3 Top-1 {k3} < {name} Top-1 {t}"))?;
        singles.push(format!("{name} {t}"));
    }
    ensure(
        !report.aggregation_only_top1.is_empty(),
        "no bug reaches Top-1 only through aggregation",
    )?;
    Ok(format!(
        "k=3 Top-1 {k3} vs {}; aggregation-only Top-1: {}",
        singles.join(", "),
        report.aggregation_only_top1.join(" ")
    ))
}

fn pairwise_a12(x: &[f64], y: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in x {
        for b in y {
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (x.len() * y.len()) as f64
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..rng.gen_range(1..20))
            .map(|_| rng.gen_range(1..10) as f64)
            .collect();
        let y: Vec<f64> = (0..rng.gen_range(1..20))
            .map(|_| rng.gen_range(1..10) as f64)
            .collect();
        let got = a12(&x, &y).map_err(|e| e.to_string())?;
        ensure(
            (got - pairwise_a12(&x, &y)).abs() < 1e-12,
            format!("A12 {x:?} {y:?}"),
        )?;
        ensure(
            a12(&x, &x).map_err(|e| e.to_string())? == 0.5,
            "A12(x,x) != 0.5",
        )?;
    }

    let mut arrangements_checked = 0;
    for m in 1..=6usize {
        for n in 1..=6usize {
            let total = m + n;
            let masks: Vec<u32> = (0u32..1 << total)
                .filter(|k| k.count_ones() as usize == m)
                .collect();
            let u_of = |mask: u32| -> usize {
                (0..total)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| (0..i).filter(|j| mask & (1 << j) == 0).count())
                    .sum()
            };
            let all_u: Vec<usize> = masks.iter().map(|&k| u_of(k)).collect();
            for (&mask, &u) in masks.iter().zip(&all_u) {
                let lo = all_u.iter().filter(|&&v| v <= u).count() as f64 / masks.len() as f64;
                let hi = all_u.iter().filter(|&&v| v >= u).count() as f64 / masks.len() as f64;
                let p = (2.0 * lo.min(hi)).min(1.0);
                let x: Vec<f64> = (0..total)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| i as f64)
                    .collect();
                let y: Vec<f64> = (0..total)
                    .filter(|i| mask & (1 << i) == 0)
                    .map(|i| i as f64)
                    .collect();
                let mw = mann_whitney_u(&x, &y).map_err(|e| e.to_string())?;
                ensure(mw.method == PValueMethod::Exact, "normal path used")?;
                ensure(
                    mw.u == u as f64 && (mw.p_value - p).abs() < 1e-12,
                    format!("m={m} n={n} mask={mask:b}"),
                )?;
                arrangements_checked += 1;
            }
        }
    }
    Ok(format!(
        "1000 A12 samples; exact U matches {arrangements_checked} enumerated arrangements"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = corpus_dir().join("m08.json");
    let mut outputs = Vec::new();
    for (i, jobs) in ["1", "1", "8", "8"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_optiso"))
            .args(["localize", "--fail-level", "O1", "--jobs", jobs])
            .arg("--model")
            .arg(&model)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            status.status.success(),
            format!("localize exited with {}", status.status),
        )?;
        outputs.push(std::fs::read(out.join("aggregate.tsv")).map_err(|e| e.to_string())?);
    }
    ensure(
        outputs.windows(2).all(|w| w[0] == w[1]),
        "aggregate.tsv differs",
    )?;
    Ok(format!(
        "4 runs ({} bytes each) identical across --jobs 1 and 8",
        outputs[0].len()
    ))
}

fn formula_robustness(report: &BenchReport) -> Outcome {
    let mut tops = Vec::new();
    for f in Formula::ALL {
        let r = report.result(f.name()).ok_or(format!("no {f} row"))?;
        ensure(
            r.failures.is_empty(),
            format!("{f} failed on {:?}", r.failures.keys()),
        )?;
        ensure(
            r.metrics.bugs == 20,
            format!("{f} scored {} bugs", r.metrics.bugs),
        )?;
        tops.push(format!("{f} {}", r.metrics.top(1)));
    }
    let spread = report.formula_top1_spread.ok_or("spread not reported")?;
    Ok(format!("Top-1 spread {spread} ({})", tops.join(", ")))
}

fn bench_report() -> Result<BenchReport, String> {
    let (corpus, errors) = load_corpus(Path::new(&corpus_dir())).map_err(|e| e.to_string())?;
    ensure(
        errors.is_empty(),
        format!("{} corpus models failed to load", errors.len()),
    )?;
    ensure(
        corpus.len() == 20,
        format!("corpus has {} models", corpus.len()),
    )?;
    run_ablations(
        &corpus,
        &BenchSettings {
            ablation: Ablation::All,
            jobs: 4,
        },
    )
    .map_err(|e| e.to_string())
}

/// Prints the criterion line; `extra` is time already spent on shared work.
fn check(
    n: u32,
    name: &str,
    limit: Duration,
    extra: Duration,
    f: impl FnOnce() -> Outcome,
) -> bool {
    let start = Instant::now();
    let mut result = f();
    let took = start.elapsed() + extra;
    if result.is_ok() && took > limit {
        result = Err(format!("took {took:.2?}, limit {limit:?}"));
    }
    match result {
        Ok(detail) => {
            println!("criterion {n:>2} PASS  {name}: {detail} [{took:.2?}]");
            true
        }
        Err(why) => {
            println!("criterion {n:>2} FAIL  {name}: {why} [{took:.2?}]");
            false
        }
    }
}

fn main() {
    let secs = Duration::from_secs;
    let none = Duration::ZERO;
    let mut passed = vec![
        check(1, "voting case study", secs(1), none, voting_case_study),
        check(2, "vote-weight table", secs(1), none, vote_weights),
        check(
            3,
            "Ochiai single-failure identity",
            secs(1),
            none,
            ochiai_identity,
        ),
        check(4, "formula unit suite", secs(1), none, formula_suite),
        check(
            5,
            "triage oracle equivalence",
            secs(60),
            none,
            triage_equivalence,
        ),
    ];

    // criteria 6, 7, 8 and 11 read one shared benchmark run, charged to each
    let start = Instant::now();
    let bench = bench_report();
    let bench_time = start.elapsed();
    let on_bench = |f: fn(&BenchReport) -> Outcome| {
        let bench = &bench;
        move || match bench {
            Ok(r) => f(r),
            Err(e) => Err(format!("benchmark failed: {e}")),
        }
    };

    passed.push(check(
        6,
        "pair structural invariant",
        secs(60),
        bench_time,
        on_bench(structure),
    ));
    passed.push(check(
        7,
        "filter safety",
        secs(60),
        bench_time,
        on_bench(filter_safety),
    ));
    passed.push(check(
        8,
        "multi-pair benefit",
        secs(300),
        bench_time,
        on_bench(multi_pair_benefit),
    ));
    passed.push(check(9, "statistics", secs(60), none, statistics));
    passed.push(check(10, "determinism", secs(30), none, determinism));
    passed.push(check(
        11,
        "formula-robustness ablation",
        secs(300),
        bench_time,
        on_bench(formula_robustness),
    ));

    let failed = passed.iter().filter(|p| !**p).count();
    if failed > 0 {
        println!("{failed} of {} criteria failed", passed.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", passed.len());
}
