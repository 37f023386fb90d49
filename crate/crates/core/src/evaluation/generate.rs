//! Seeded generator for synthetic bug models.
//!
//! A generated compiler has three levels. `O0` enables nothing, `O1` a
//! handful of passes and `O2` a few more on top. Every pass owns one source
//! file whose lines run only while the pass is enabled (apart from a couple
//! of gate lines the pass manager always reaches), and it also touches a
//! private line plus a few shared lines in the middle-end infrastructure
//! files. Some passes also run a stretch of another pass's file, as passes
//! sharing helper code do. Front-end files run at every level and never look
//! suspicious.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::OutcomeStatus;
use crate::drivers::{ModelDocument, OutcomeDoc};

const PASS_NAMES: [&str; 24] = [
    "tree-pre",
    "tree-vrp",
    "tree-fre",
    "tree-dce",
    "tree-dse",
    "tree-ccp",
    "tree-sra",
    "tree-pta",
    "tree-sink",
    "tree-ch",
    "tree-loop-im",
    "tree-slp-vectorize",
    "tree-loop-vectorize",
    "ipa-cp",
    "ipa-sra",
    "ipa-icf",
    "inline-small-functions",
    "expensive-optimizations",
    "gcse",
    "cse-follow-jumps",
    "schedule-insns2",
    "peephole2",
    "code-hoisting",
    "strict-aliasing",
];

const FRONTEND: [&str; 5] = ["c-parser.c", "c-decl.c", "toplev.c", "tree.c", "gimplify.c"];
const INFRA: [&str; 5] = [
    "cfg.c",
    "tree-ssa.c",
    "df-core.c",
    "emit-rtl.c",
    "fold-const.c",
];
const UNUSED: [&str; 4] = [
    "lto-streamer.c",
    "fortran-parse.c",
    "ada-decl.c",
    "go-lang.c",
];

/// Shape of the bug a generated model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BugShape {
    /// One pass is wrong whenever it runs.
    Single,
    /// Two passes must both run.
    Conjunction,
    /// Either of two passes provokes the failure.
    Disjunction,
}

fn file_for(pass: &str) -> String {
    format!("{pass}.c")
}

fn outcomes(rng: &mut ChaCha8Rng) -> (OutcomeDoc, OutcomeDoc) {
    let pass = OutcomeDoc {
        status: OutcomeStatus::RunOk,
        exit_code: 0,
        stdout: Some(format!("{}\n", rng.gen_range(0..100_000u32))),
        output_digest: None,
    };
    let fail = match rng.gen_range(0..3) {
        0 => OutcomeDoc {
            status: OutcomeStatus::CompilerCrash,
            exit_code: 4,
            stdout: None,
            output_digest: None,
        },
        1 => OutcomeDoc {
            status: OutcomeStatus::RunAbort,
            exit_code: 134,
            stdout: None,
            output_digest: None,
        },
        _ => OutcomeDoc {
            status: OutcomeStatus::RunOk,
            exit_code: 0,
            stdout: Some(format!("{}\n", rng.gen_range(100_000..200_000u32))),
            output_digest: None,
        },
    };
    (pass, fail)
}

/// Generates one model with the requested bug shape.
pub fn generate_model_with(rng: &mut ChaCha8Rng, shape: BugShape) -> ModelDocument {
    let n1 = rng.gen_range(5..=8);
    let n2 = rng.gen_range(2..=4);
    let mut names: Vec<&str> = PASS_NAMES.to_vec();
    names.shuffle(rng);
    let o1: Vec<String> = names[..n1].iter().map(|s| s.to_string()).collect();
    let o2: Vec<String> = names[..n1 + n2].iter().map(|s| s.to_string()).collect();

    let mut files: Vec<String> = FRONTEND.iter().map(|s| s.to_string()).collect();
    files.extend(INFRA.iter().map(|s| s.to_string()));
    files.extend(o2.iter().map(|p| file_for(p)));
    files.extend(UNUSED.iter().map(|s| s.to_string()));

    let mut base: BTreeMap<String, BTreeMap<String, Vec<u32>>> = BTreeMap::new();
    for (li, level) in ["O0", "O1", "O2"].iter().enumerate() {
        let mut per_file: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for f in FRONTEND {
            per_file.insert(f.to_string(), (1..=rng.gen_range(4..=12)).collect());
        }
        if li > 0 {
            for f in INFRA {
                per_file.insert(f.to_string(), (1..=5).collect());
            }
            let enabled = if li == 1 { &o1 } else { &o2 };
            for p in enabled {
                per_file.insert(file_for(p), vec![1, 2]);
            }
        }
        base.insert(level.to_string(), per_file);
    }

    let mut option_coverage: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
    for (i, p) in o2.iter().enumerate() {
        let mut stmts: BTreeSet<(String, u32)> = BTreeSet::new();
        let own = rng.gen_range(6..=30u32);
        for line in 3..3 + own {
            if rng.gen_bool(0.85) {
                stmts.insert((file_for(p), line));
            }
        }
        stmts.insert((file_for(p), 3));
        let touched = rng.gen_range(1..=3);
        let mut infra: Vec<&str> = INFRA.to_vec();
        infra.shuffle(rng);
        for f in &infra[..touched] {
            stmts.insert((f.to_string(), 100 + i as u32));
            for _ in 0..rng.gen_range(1..=4) {
                stmts.insert((f.to_string(), rng.gen_range(50..60)));
            }
        }
        option_coverage.insert(p.clone(), stmts.into_iter().collect());
    }
    // passes that share helper code with another pass also run part of its file
    for (i, p) in o2.iter().enumerate() {
        for _ in 0..rng.gen_range(0..=2) {
            let partner = &o2[rng.gen_range(0..o2.len())];
            if partner == p {
                continue;
            }
            let width = rng.gen_range(2..=8u32);
            let start = 3 + rng.gen_range(0..6u32);
            let cov = option_coverage
                .get_mut(partner)
                .expect("every pass has coverage");
            for line in start..start + width {
                cov.push((file_for(p), line));
            }
            cov.push((file_for(p), 200 + i as u32));
            cov.sort();
            cov.dedup();
        }
    }

    let a = o2[rng.gen_range(0..o2.len())].clone();
    let (predicate, faulty) = match shape {
        BugShape::Single => {
            let faulty = if rng.gen_bool(0.7) {
                file_for(&a)
            } else {
                let own = &option_coverage[&a];
                own.iter()
                    .find(|(f, l)| *l >= 100 && INFRA.contains(&f.as_str()))
                    .map(|(f, _)| f.clone())
                    .unwrap_or_else(|| file_for(&a))
            };
            (format!("opt({a})"), faulty)
        }
        BugShape::Conjunction | BugShape::Disjunction => {
            let mut pool = o1.clone();
            pool.shuffle(rng);
            let (x, y) = (&pool[0], &pool[1]);
            let op = if shape == BugShape::Conjunction {
                "AND"
            } else {
                "OR"
            };
            (format!("opt({x}) {op} opt({y})"), file_for(x))
        }
    };

    let (pass_outcome, fail_outcome) = outcomes(rng);
    ModelDocument {
        id: None,
        description: Some(format!("generated; bug predicate {predicate}")),
        levels: vec!["O0".into(), "O1".into(), "O2".into()],
        options: BTreeMap::from([
            ("O0".to_string(), Vec::new()),
            ("O1".to_string(), o1),
            ("O2".to_string(), o2),
        ]),
        files,
        base_coverage: base,
        option_coverage,
        bug_predicate: predicate,
        faulty_files: vec![faulty],
        pass_outcome,
        fail_outcome,
    }
}

/// Generates one model; most carry a single faulty pass, some a conjunction
/// and a few a disjunction.
pub fn generate_model(rng: &mut ChaCha8Rng) -> ModelDocument {
    let shape = match rng.gen_range(0..10) {
        0..=5 => BugShape::Single,
        6..=8 => BugShape::Conjunction,
        _ => BugShape::Disjunction,
    };
    generate_model_with(rng, shape)
}

/// `count` models from one seed.
pub fn generate_corpus(seed: u64, count: usize) -> Vec<ModelDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| generate_model(&mut rng)).collect()
}
