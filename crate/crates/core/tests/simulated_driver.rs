use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use optiso_core::config::{Configuration, TestProgram};
use optiso_core::drivers::{load_bug_model_file, simulate, BugModel, ModelDocument};
use optiso_core::evaluation::generate_corpus;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_models() -> Vec<BugModel> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| load_bug_model_file(p).unwrap())
        .collect()
}

/// Straight from the raw document: base lines of the level plus the lines of
/// every enabled option, counting one per source.
fn expected_counts(
    doc: &ModelDocument,
    level: &str,
    disabled: &BTreeSet<String>,
) -> BTreeMap<(String, u32), u64> {
    let mut out = BTreeMap::new();
    if let Some(base) = doc.base_coverage.get(level) {
        for (file, lines) in base {
            for line in lines.iter().collect::<BTreeSet<_>>() {
                *out.entry((file.clone(), *line)).or_insert(0) += 1;
            }
        }
    }
    for opt in &doc.options[level] {
        if disabled.contains(opt) {
            continue;
        }
        let stmts: BTreeSet<&(String, u32)> = doc
            .option_coverage
            .get(opt)
            .map(|v| v.iter().collect())
            .unwrap_or_default();
        for s in stmts {
            *out.entry(s.clone()).or_insert(0) += 1;
        }
    }
    out
}

fn random_conf(model: &BugModel, rng: &mut ChaCha8Rng) -> (Configuration, BTreeSet<String>) {
    let level = &model.levels[rng.gen_range(0..model.levels.len())];
    let space = model.option_space(&level.label).unwrap();
    let disabled: BTreeSet<String> = space
        .options
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|o| o.name.clone())
        .collect();
    let conf = Configuration::new(space, disabled.iter().map(String::as_str)).unwrap();
    (conf, disabled)
}

#[test]
fn spectra_match_set_union_oracle() {
    let models = corpus_models();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let program = TestProgram::inert();
    for i in 0..100 {
        let model = &models[i % models.len()];
        let (conf, disabled) = random_conf(model, &mut rng);
        let (_, spectrum) = simulate(model, &program, &conf).unwrap();
        let expected = expected_counts(model.document(), &conf.level.label, &disabled);
        let actual: BTreeMap<(String, u32), u64> = spectrum
            .records()
            .into_iter()
            .map(|r| ((r.file, r.line), r.count))
            .collect();
        assert_eq!(actual, expected, "model {} under {conf}", model.id);
    }
}

#[test]
fn outcome_follows_predicate_on_corpus_examples() {
    let program = TestProgram::inert();
    for model in corpus_models() {
        let top = model.levels.last().unwrap();
        let space = model.option_space(&top.label).unwrap();
        let (outcome, _) =
            simulate(&model, &program, &Configuration::level_only(top.clone())).unwrap();
        let bottom = &model.levels[0];
        let (low, _) =
            simulate(&model, &program, &Configuration::level_only(bottom.clone())).unwrap();
        assert_eq!(low, model.pass_outcome, "{} at {}", model.id, bottom);
        let all_off = Configuration::from_options(space, &space.options).unwrap();
        let (off, _) = simulate(&model, &program, &all_off).unwrap();
        // every corpus predicate needs at least one option enabled
        assert_eq!(
            off, model.pass_outcome,
            "{} with everything disabled",
            model.id
        );
        assert_eq!(outcome, model.fail_outcome, "{} at {}", model.id, top);
    }
}

fn generated() -> Vec<BugModel> {
    generate_corpus(99, 8)
        .into_iter()
        .enumerate()
        .map(|(i, d)| BugModel::from_document(d, &format!("g{i}")).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulate_is_pure(which in 0usize..8, seed in any::<u64>()) {
        let models = generated();
        let model = &models[which];
        let (conf, _) = random_conf(model, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = simulate(model, &TestProgram::inert(), &conf).unwrap();
        let b = simulate(model, &TestProgram::inert(), &conf).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn enabling_more_options_grows_the_spectrum(which in 0usize..8, seed in any::<u64>()) {
        let models = generated();
        let model = &models[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (wide, disabled) = random_conf(model, &mut rng);
        let space = model.option_space(&wide.level.label).unwrap();
        let more: Vec<&str> = disabled
            .iter()
            .map(String::as_str)
            .chain(space.options.iter().filter(|_| rng.gen_bool(0.5)).map(|o| o.name.as_str()))
            .collect();
        let narrow = Configuration::new(space, more).unwrap();
        let (_, big) = simulate(model, &TestProgram::inert(), &wide).unwrap();
        let (_, small) = simulate(model, &TestProgram::inert(), &narrow).unwrap();
        prop_assert!(small.executed_set().is_subset(&big.executed_set()));
    }
}
