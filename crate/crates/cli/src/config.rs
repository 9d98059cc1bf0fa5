use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::Cli;

pub const TOLERANCES_ENV: &str = "TVLAB_TOLERANCES";

/// Names accepted in a tolerance map, with their defaults.
pub const TOLERANCE_DEFAULTS: [(&str, f64); 5] = [
    ("fit.tol", 1e-13),
    ("fit.perturbation", 0.05),
    ("q.collar", tvlab_core::excess::COLLAR),
    ("decay.q_gate", 1.0),
    // multiple of L·h below which two values count as coincident
    ("decompose.double_factor", 4.0),
];

/// Everything that determines a run; serialized into every report.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: serde_json::Value,
    pub seed: u64,
    pub workers: Option<usize>,
    pub tolerances: BTreeMap<String, f64>,
    pub tolerance_source: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(cli: &Cli) -> Result<RunConfig> {
        if let Some(w) = cli.workers {
            if w == 0 {
                bail!("--workers must be positive");
            }
            tvlab_core::par::set_workers(w);
        }
        let source = cli.tolerances.clone().or_else(|| std::env::var_os(TOLERANCES_ENV).map(PathBuf::from));
        let mut tolerances: BTreeMap<String, f64> =
            TOLERANCE_DEFAULTS.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        if let Some(path) = &source {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading tolerances {}", path.display()))?;
            let map: BTreeMap<String, f64> =
                serde_json::from_str(&text).with_context(|| format!("parsing tolerances {}", path.display()))?;
            for (k, v) in map {
                if !tolerances.contains_key(&k) {
                    bail!("unknown tolerance '{k}'");
                }
                tolerances.insert(k, v);
            }
        }
        Ok(RunConfig {
            command: serde_json::to_value(&cli.command)?,
            seed: cli.seed,
            workers: cli.workers,
            tolerances,
            tolerance_source: source,
        })
    }

    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }
}
