//! Logged experience: transitions, trajectories and datasets, plus the
//! `.rwrl.jsonl` file format.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvSpec, Info};
use crate::error::{Error, Result};
use crate::jsonfmt;

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const DATASET_SUFFIX: &str = ".rwrl.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub step_index: usize,
    pub observation: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub reward_components: Vec<f64>,
    pub constraint_costs: Vec<f64>,
    pub next_observation: Vec<f64>,
    pub behavior_propensity: Option<f64>,
    pub terminal: bool,
    pub truncated: bool,
    pub info: Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<TransitionRecord>,
    pub episode_seed: u64,
    pub perturbation_params: BTreeMap<String, f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.reward)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.step_index != i {
                return Err(Error::Data(format!(
                    "episode {}: step index {} at position {i}",
                    self.episode_seed, r.step_index
                )));
            }
            if r.terminal && i + 1 != self.records.len() {
                return Err(Error::Data(format!(
                    "episode {}: terminal record before the end",
                    self.episode_seed
                )));
            }
            if let Some(p) = r.behavior_propensity {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::Data(format!(
                        "episode {}: propensity {p} outside (0, 1]",
                        self.episode_seed
                    )));
                }
            }
            if r.constraint_costs.iter().any(|c| *c < 0.0) {
                return Err(Error::Data("negative constraint cost".into()));
            }
        }
        Ok(())
    }
}

/// Where a dataset or report came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub producing_policy_id: String,
    pub environment_config_hash: String,
    pub provenance: Provenance,
    pub env: EnvSpec,
}

impl Dataset {
    pub fn new(
        producing_policy_id: impl Into<String>,
        environment_config_hash: impl Into<String>,
        provenance: Provenance,
        env: EnvSpec,
    ) -> Self {
        Self {
            trajectories: Vec::new(),
            producing_policy_id: producing_policy_id.into(),
            environment_config_hash: environment_config_hash.into(),
            provenance,
            env,
        }
    }

    pub fn transition_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.trajectories.iter().flat_map(|t| t.records.iter())
    }

    pub fn has_propensities(&self) -> bool {
        self.transitions().any(|r| r.behavior_propensity.is_some())
    }

    /// Checks per-trajectory invariants and uniform propensity presence.
    pub fn validate(&self) -> Result<()> {
        let mut presence = None;
        for t in &self.trajectories {
            t.validate()?;
            for r in &t.records {
                let p = r.behavior_propensity.is_some();
                match presence {
                    None => presence = Some(p),
                    Some(q) if q != p => {
                        return Err(Error::Data(
                            "dataset mixes records with and without propensities".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// The leading `n` transitions in logged order. A trajectory cut short is
    /// marked truncated at its new last record.
    pub fn prefix(&self, n: usize) -> Dataset {
        let mut out = Dataset {
            trajectories: Vec::new(),
            ..self.clone_header()
        };
        let mut remaining = n;
        for t in &self.trajectories {
            if remaining == 0 {
                break;
            }
            if t.len() <= remaining {
                remaining -= t.len();
                out.trajectories.push(t.clone());
            } else {
                let mut cut = t.clone();
                cut.records.truncate(remaining);
                if let Some(last) = cut.records.last_mut() {
                    if !last.terminal {
                        last.truncated = true;
                    }
                }
                remaining = 0;
                out.trajectories.push(cut);
            }
        }
        out
    }

    /// Concatenate trajectories of datasets sharing an environment.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a Dataset>, policy_id: &str) -> Result<Dataset> {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Data("union of zero datasets".into()))?;
        let mut out = first.clone();
        out.producing_policy_id = policy_id.to_string();
        for d in iter {
            if d.environment_config_hash != out.environment_config_hash {
                return Err(Error::Data("union across different environments".into()));
            }
            out.trajectories.extend(d.trajectories.iter().cloned());
        }
        out.validate()?;
        Ok(out)
    }

    fn clone_header(&self) -> Dataset {
        Dataset {
            trajectories: Vec::new(),
            producing_policy_id: self.producing_policy_id.clone(),
            environment_config_hash: self.environment_config_hash.clone(),
            provenance: self.provenance.clone(),
            env: self.env.clone(),
        }
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let header = Line::Dataset(DatasetHeader {
            schema_version: DATASET_SCHEMA_VERSION,
            producing_policy_id: self.producing_policy_id.clone(),
            environment_config_hash: self.environment_config_hash.clone(),
            config_hash: self.provenance.config_hash.clone(),
            master_seed: self.provenance.master_seed,
            env: self.env.clone(),
            trajectories: self.trajectories.len(),
        });
        push_line(&mut out, &header)?;
        for t in &self.trajectories {
            push_line(
                &mut out,
                &Line::Trajectory(TrajectoryHeader {
                    episode_seed: t.episode_seed,
                    perturbation_params: t.perturbation_params.clone(),
                    length: t.len(),
                }),
            )?;
            for r in &t.records {
                push_line(&mut out, &LineRef::Transition(r))?;
            }
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Dataset> {
        Self::from_lines(text.lines().map(|l| Ok(l.to_string())))
    }

    fn from_lines(lines: impl Iterator<Item = Result<String>>) -> Result<Dataset> {
        let mut lines = lines.enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let parse = |n: usize, s: &str| -> Result<Line> {
            serde_json::from_str(s).map_err(|e| Error::Data(format!("line {}: {e}", n + 1)))
        };
        let (n, first) = lines
            .next()
            .ok_or_else(|| Error::Data("empty dataset file".into()))?;
        let header = match parse(n, &first?)? {
            Line::Dataset(h) => h,
            _ => return Err(Error::Data("line 1: expected dataset header".into())),
        };
        if header.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported dataset schema version {}",
                header.schema_version
            )));
        }
        let mut ds = Dataset::new(
            header.producing_policy_id,
            header.environment_config_hash,
            Provenance {
                config_hash: header.config_hash,
                master_seed: header.master_seed,
            },
            header.env,
        );
        let mut expected = None;
        for (n, line) in lines {
            match parse(n, &line?)? {
                Line::Dataset(_) => {
                    return Err(Error::Data(format!("line {}: repeated dataset header", n + 1)))
                }
                Line::Trajectory(h) => {
                    check_length(&ds, expected)?;
                    expected = Some(h.length);
                    ds.trajectories.push(Trajectory {
                        records: Vec::with_capacity(h.length),
                        episode_seed: h.episode_seed,
                        perturbation_params: h.perturbation_params,
                    });
                }
                Line::Transition(r) => match ds.trajectories.last_mut() {
                    Some(t) => t.records.push(r),
                    None => {
                        return Err(Error::Data(format!(
                            "line {}: transition before any trajectory header",
                            n + 1
                        )))
                    }
                },
            }
        }
        check_length(&ds, expected)?;
        if ds.trajectories.len() != header.trajectories {
            return Err(Error::Data(format!(
                "header announces {} trajectories, file has {}",
                header.trajectories,
                ds.trajectories.len()
            )));
        }
        ds.validate()?;
        Ok(ds)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_jsonl()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_lines(
            BufReader::new(f)
                .lines()
                .map(|l| l.map_err(|e| Error::io(path, e))),
        )
    }
}

fn check_length(ds: &Dataset, expected: Option<usize>) -> Result<()> {
    if let (Some(n), Some(t)) = (expected, ds.trajectories.last()) {
        if t.len() != n {
            return Err(Error::Data(format!(
                "trajectory {} announces {n} records, has {}",
                t.episode_seed,
                t.len()
            )));
        }
    }
    Ok(())
}

fn push_line<T: Serialize>(out: &mut String, value: &T) -> Result<()> {
    out.push_str(&jsonfmt::to_line(value)?);
    out.push('\n');
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    schema_version: u32,
    producing_policy_id: String,
    environment_config_hash: String,
    config_hash: String,
    master_seed: u64,
    env: EnvSpec,
    trajectories: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryHeader {
    episode_seed: u64,
    perturbation_params: BTreeMap<String, f64>,
    length: usize,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Dataset(DatasetHeader),
    Trajectory(TrajectoryHeader),
    Transition(TransitionRecord),
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Transition(&'a TransitionRecord),
}

/// `Σ_t γ^t r_t` over a reward sequence.
pub fn discounted_sum(rewards: impl IntoIterator<Item = f64>, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let mut total = 0.0;
    let mut discount = 1.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    Ok(total)
}

pub fn discounted_return(trajectory: &Trajectory, gamma: f64) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::Data("discounted return of an empty trajectory".into()));
    }
    discounted_sum(trajectory.rewards(), gamma)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Domain(format!("discount {gamma} outside [0, 1]")))
    }
}
