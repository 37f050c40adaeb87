use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run, TrainConfig};
use crate::error::{Result, SaaError};
use crate::select::SelectionPolicy;

/// One row of an ablation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: String,
    pub policy: String,
    pub patchwise: bool,
    pub seed: u64,
    pub final_acc: f64,
    pub peak_acc: f64,
    pub final_naive_fraction: f64,
    pub run_dir: String,
}

/// Human-readable row label for a selection policy.
pub fn method_label(policy: &SelectionPolicy) -> String {
    match policy {
        SelectionPolicy::None => "Baseline-1: A on all samples".into(),
        SelectionPolicy::All => "Baseline-2: A' on all samples".into(),
        SelectionPolicy::FixedThreshold(t) => format!("Fixed threshold ({t})"),
        SelectionPolicy::FixedProportion(p) => format!("Fixed proportion ({p})"),
        SelectionPolicy::Otsu => "OTSU threshold".into(),
        SelectionPolicy::RandomFraction(p) => format!("Random selection ({p})"),
    }
}

fn dir_name(policy: &SelectionPolicy) -> String {
    policy.to_string().replace(':', "_")
}

/// Runs `base` once per policy, all with the same seed, each into `out_root/<policy>`.
pub fn ablate(base: &TrainConfig, policies: &[SelectionPolicy], out_root: &Path) -> Result<Vec<AblationRow>> {
    if policies.is_empty() {
        return Err(SaaError::config("ablation needs at least one policy"));
    }
    let mut rows = Vec::with_capacity(policies.len());
    for policy in policies {
        let mut cfg = base.clone();
        cfg.policy = *policy;
        cfg.name = format!("{}-{}", base.name, dir_name(policy));
        let run_dir = out_root.join(&cfg.name);
        let outcome = run(&cfg, &run_dir)?;
        rows.push(AblationRow {
            method: method_label(policy),
            policy: policy.to_string(),
            patchwise: cfg.aug.patchwise,
            seed: cfg.seed,
            final_acc: outcome.final_record().test_acc,
            peak_acc: outcome.peak_accuracy(),
            final_naive_fraction: outcome.final_record().naive_fraction,
            run_dir: run_dir.display().to_string(),
        });
    }
    Ok(rows)
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row).map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| SaaError::io(path, e))
}

pub fn read_ablation_csv(path: &Path) -> Result<Vec<AblationRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))
}
