//! Run-directory persistence. Every artifact goes through one [`RunDir`],
//! which records it and writes `manifest.json` last.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

use optiso_core::config::OptimizationLevel;
use optiso_core::localize::{LocalizeReport, LocalizeSettings, PairRecord};
use optiso_core::pipeline::TriageRun;

use crate::exit::Failure;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverInfo {
    Simulated {
        model: String,
        model_id: String,
    },
    External {
        compiler: String,
        program: String,
        coverage_flags: Vec<String>,
        coverage_cmd: Option<String>,
        timeout_secs: u64,
    },
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Failure::io(format!("{}: {e}", parent.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub struct RunDir {
    dir: PathBuf,
    command: &'static str,
    driver: DriverInfo,
    started: u64,
    artifacts: Map<String, Value>,
    settings: Map<String, Value>,
}

impl RunDir {
    pub fn create(dir: &Path, command: &'static str, driver: DriverInfo) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            driver,
            started: unix_now(),
            artifacts: Map::new(),
            settings: Map::new(),
        })
    }

    fn record(&mut self, key: &str, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.artifacts
            .insert(key.to_string(), Value::String(path.display().to_string()));
        path
    }

    fn text(&mut self, key: &str, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.record(key, name);
        write_text(&path, text)
    }

    fn json<T: Serialize + ?Sized>(
        &mut self,
        key: &str,
        name: &str,
        value: &T,
    ) -> Result<(), Failure> {
        let path = self.record(key, name);
        write_json(&path, value)
    }

    pub fn write_triage(
        &mut self,
        run: &TriageRun,
        pass_level: &OptimizationLevel,
    ) -> Result<(), Failure> {
        let mut options = Map::new();
        for (opt, class) in run.triage.classes() {
            options.insert(
                opt.name.clone(),
                serde_json::to_value(class).expect("plain enum"),
            );
        }
        let doc = json!({
            "fail_level": run.triage.level.label,
            "pass_level": pass_level.label,
            "fail_result": run.fail_result,
            "pass_result": run.pass_result,
            "options": options,
        });
        self.settings
            .insert("fail_level".into(), json!(run.triage.level.label));
        self.settings
            .insert("pass_level".into(), json!(pass_level.label));
        self.json("triage", "triage.json", &doc)
    }

    pub fn write_localize(
        &mut self,
        report: &LocalizeReport,
        settings: &LocalizeSettings,
    ) -> Result<(), Failure> {
        self.json("candidates", "candidates.json", &report.candidates)?;
        self.write_triage(&report.triage, &report.pass_level)?;

        let records: Vec<PairRecord<'_>> = report
            .pairs
            .iter()
            .map(|pair| PairRecord {
                pair,
                fail_outcome: &report.fail_result,
                pass_outcome: &report.pass_result,
                verified: true,
            })
            .collect();
        self.json(
            "pairs",
            "pairs.json",
            &json!({ "pairs": records, "log": report.suite_log }),
        )?;

        for (conf, spectrum) in &report.spectra {
            let name = format!("spectrum.{}.tsv", conf.hash_id());
            self.text(&format!("spectrum {conf}"), &name, &spectrum.to_canonical())?;
        }
        for ranking in &report.rankings {
            let name = format!("rank.{}.tsv", ranking.pair_id);
            self.text(
                &format!("rank {}", ranking.pair_id),
                &name,
                &ranking.to_tsv(),
            )?;
        }
        self.text("aggregate", "aggregate.tsv", &report.aggregate.to_tsv())?;

        self.settings.insert("pairs".into(), json!(settings.pairs));
        self.settings
            .insert("formula".into(), json!(settings.formula.name()));
        self.settings
            .insert("filter".into(), json!(settings.filter));
        self.settings.insert(
            "diff_mode".into(),
            serde_json::to_value(settings.diff_mode).expect("plain enum"),
        );
        self.settings.insert("jobs".into(), json!(settings.jobs));
        Ok(())
    }

    pub fn finish(self) -> Result<(), Failure> {
        let mut manifest = Map::new();
        manifest.insert("tool".into(), json!("optiso"));
        manifest.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        manifest.insert("command".into(), json!(self.command));
        manifest.insert(
            "driver".into(),
            serde_json::to_value(&self.driver).expect("plain data"),
        );
        for (k, v) in self.settings {
            manifest.insert(k, v);
        }
        manifest.insert("seed".into(), Value::Null);
        manifest.insert("started_unix".into(), json!(self.started));
        manifest.insert("finished_unix".into(), json!(unix_now()));
        manifest.insert("artifacts".into(), Value::Object(self.artifacts));
        write_json(&self.dir.join("manifest.json"), &Value::Object(manifest))
    }
}
