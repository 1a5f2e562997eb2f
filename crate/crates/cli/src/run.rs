//! Run directories, manifests and the cross-run report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lrscatter::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::suites::{self, Assertion};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub files: Vec<String>,
    pub passed: bool,
    pub error: Option<String>,
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("lrscatter".to_string(), lrscatter::VERSION.to_string()),
        ("lrscatter-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

/// `<root>/<experiment>-<first 12 hex digits of the config hash>`.
pub fn run_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(format!("{}-{}", cfg.experiment.slug(), &cfg.hash()[..12]))
}

/// Validates, runs the suite and writes `config.toml`, one CSV per table and the manifest.
/// The run directory must not exist unless `force` is set.
pub fn execute(cfg: &ExperimentConfig, root: &Path, force: bool) -> Result<(PathBuf, RunRecord)> {
    let warnings = cfg.validate()?;
    let dir = run_dir(root, cfg);
    if dir.exists() {
        if !force {
            return Err(Error::Io(format!("{} exists; pass --force to replace it", dir.display())));
        }
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(root)?;
    fs::create_dir(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let mut record = RunRecord {
        experiment: cfg.experiment.slug().to_string(),
        config_hash: cfg.hash(),
        seed: cfg.numerics.seed,
        versions: versions(),
        warnings,
        assertions: Vec::new(),
        files: vec!["config.toml".into()],
        passed: false,
        error: None,
    };
    match suites::run(cfg) {
        Ok(outcome) => {
            for t in &outcome.tables {
                let name = format!("{}.csv", t.name);
                fs::write(dir.join(&name), t.to_csv())?;
                record.files.push(name);
            }
            record.passed = outcome.passed();
            record.assertions = outcome.assertions;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json + "\n")?;
    Ok((dir, record))
}

/// Collects every manifest below `root` into `report.md` and `runs.csv`.
pub fn report(root: &Path) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(MANIFEST).is_file()).collect();
    dirs.sort();
    for d in &dirs {
        let s = fs::read_to_string(d.join(MANIFEST))?;
        let r: RunRecord = serde_json::from_str(&s).map_err(|e| Error::Io(format!("{}: {e}", d.display())))?;
        records.push(r);
    }
    let mut md = String::from("# Runs\n\n| run | experiment | passed | failing assertions |\n|---|---|---|---|\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "experiment", "config_hash", "seed", "assertion", "passed", "value", "limit"]).map_err(|e| Error::Io(e.to_string()))?;
    for (d, r) in dirs.iter().zip(&records) {
        let name = d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let failing: Vec<&str> = r.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
        let failing = match &r.error {
            Some(e) => format!("error: {e}"),
            None => failing.join("; "),
        };
        md.push_str(&format!("| {name} | {} | {} | {failing} |\n", r.experiment, r.passed));
        for a in &r.assertions {
            w.write_record([&name, &r.experiment, &r.config_hash, &r.seed.to_string(), &a.name, &a.passed.to_string(), &format!("{:e}", a.value), &format!("{:e}", a.limit)])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    fs::write(root.join("report.md"), md)?;
    fs::write(root.join("runs.csv"), w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    Ok(records)
}
