//! The metrics report and its JSON and CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jsonfmt;
use crate::metrics::DataEfficiency;
use crate::ope::OpeEstimate;
use crate::safety::SafetyReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetySection {
    /// Violations during evaluation of the reported policy.
    pub eval: SafetyReport,
    /// Violations present in the training data (behavior logs and rollouts).
    pub train: SafetyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerEnvResult {
    pub params: BTreeMap<String, f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub policy_id: String,
    pub gamma: f64,
    pub warm_start: f64,
    pub data_efficiency: DataEfficiency,
    pub safety: SafetySection,
    pub robust: f64,
    pub worst_case: f64,
    pub per_env: Vec<PerEnvResult>,
    pub mean_return: f64,
    pub multi_objective: Vec<f64>,
    /// Keyed by the level as written in the config.
    pub cvar: BTreeMap<String, f64>,
    pub realtime_misses: usize,
    pub realtime_decisions: usize,
    pub ope: Vec<OpeEstimate>,
    pub notes: Vec<String>,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = jsonfmt::to_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("schema_version".into(), self.schema_version.to_string()),
            ("config_hash".into(), self.config_hash.clone()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("policy_id".into(), self.policy_id.clone()),
            ("warm_start".into(), num(self.warm_start)),
            (
                "data_efficiency".into(),
                self.data_efficiency
                    .value
                    .map_or_else(|| "not_reached".to_string(), |v| v.to_string()),
            ),
            ("data_efficiency.r_min".into(), num(self.data_efficiency.r_min)),
        ];
        for p in &self.data_efficiency.per_prefix {
            rows.push((format!("data_efficiency.prefix.{}", p.size), num(p.mean_return)));
        }
        for (phase, report) in [("eval", &self.safety.eval), ("train", &self.safety.train)] {
            for (j, id) in report.constraint_ids.iter().enumerate() {
                rows.push((format!("safety.{phase}.{id}.total"), num(report.totals[j])));
                rows.push((format!("safety.{phase}.{id}.discounted"), num(report.discounted[j])));
            }
        }
        rows.push(("robust".into(), num(self.robust)));
        rows.push(("worst_case".into(), num(self.worst_case)));
        for (k, e) in self.per_env.iter().enumerate() {
            rows.push((format!("per_env.{k}"), num(e.value)));
        }
        rows.push(("mean_return".into(), num(self.mean_return)));
        for (j, v) in self.multi_objective.iter().enumerate() {
            rows.push((format!("multi_objective.{j}"), num(*v)));
        }
        for (a, v) in &self.cvar {
            rows.push((format!("cvar.{a}"), num(*v)));
        }
        rows.push(("realtime_misses".into(), self.realtime_misses.to_string()));
        for e in &self.ope {
            let name = serde_json::to_value(e.estimator)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            rows.push((format!("ope.{name}.value"), num(e.value)));
            rows.push((format!("ope.{name}.effective_sample_size"), num(e.effective_sample_size)));
        }
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}
