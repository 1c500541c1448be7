//! Resumable trainer snapshots: a feature file whose comment header carries
//! the iteration, curriculum level, master seed, locked signs and last
//! training success.

use std::collections::BTreeMap;

use crate::avi::TrainerState;
use crate::feature::{
    parse_feature_file, write_feature_file, FeatureExpr, FeatureFileError, Signature,
};
use crate::rollout::LinearValueFn;

pub const SNAPSHOT_HEADER: &str = "# relavi snapshot v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SnapshotError {
    #[error("missing `{SNAPSHOT_HEADER}` header line")]
    MissingHeader,
    #[error("line {line}: bad header field: {text}")]
    BadField { line: usize, text: String },
    #[error(transparent)]
    Features(#[from] FeatureFileError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub level: usize,
    pub seed: u64,
    pub locked_signs: BTreeMap<usize, i8>,
    pub last_training_success: f64,
    pub features: Vec<FeatureExpr>,
    pub weights: Vec<f64>,
}

impl Snapshot {
    pub fn of_state(state: &TrainerState<Vec<FeatureExpr>>, level: usize, seed: u64) -> Self {
        Snapshot {
            iteration: state.k,
            level,
            seed,
            locked_signs: state.locked_signs.clone(),
            last_training_success: state.last_training_success,
            features: state.value_fn.features.clone(),
            weights: state.value_fn.weights.clone(),
        }
    }

    pub fn value_fn(&self) -> LinearValueFn<Vec<FeatureExpr>> {
        LinearValueFn {
            features: self.features.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn trainer_state(&self) -> TrainerState<Vec<FeatureExpr>> {
        TrainerState {
            value_fn: self.value_fn(),
            k: self.iteration,
            locked_signs: self.locked_signs.clone(),
            last_training_success: self.last_training_success,
        }
    }

    pub fn to_text(&self) -> String {
        let locks: Vec<String> = self
            .locked_signs
            .iter()
            .map(|(i, s)| format!("{i}:{s}"))
            .collect();
        format!(
            "{SNAPSHOT_HEADER}\n# iteration {}\n# level {}\n# seed {}\n# locked {}\n# last_training_success {:?}\n{}",
            self.iteration,
            self.level,
            self.seed,
            locks.join(" "),
            self.last_training_success,
            write_feature_file(self.weights.iter().copied().zip(&self.features)),
        )
    }

    pub fn parse(text: &str, sig: &Signature) -> Result<Self, SnapshotError> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l.trim_end()) != Some(SNAPSHOT_HEADER) {
            return Err(SnapshotError::MissingHeader);
        }
        let mut snap = Snapshot {
            iteration: 0,
            level: 0,
            seed: 0,
            locked_signs: BTreeMap::new(),
            last_training_success: 0.0,
            features: Vec::new(),
            weights: Vec::new(),
        };
        for (i, line) in lines {
            let Some(rest) = line.strip_prefix("# ") else {
                continue;
            };
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            let bad = || SnapshotError::BadField {
                line: i + 1,
                text: line.to_string(),
            };
            match key {
                "iteration" => snap.iteration = value.parse().map_err(|_| bad())?,
                "level" => snap.level = value.parse().map_err(|_| bad())?,
                "seed" => snap.seed = value.parse().map_err(|_| bad())?,
                "last_training_success" => {
                    snap.last_training_success = value.parse().map_err(|_| bad())?
                }
                "locked" => {
                    for item in value.split_whitespace() {
                        let (idx, sign) = item.split_once(':').ok_or_else(bad)?;
                        let sign: i8 = sign.parse().map_err(|_| bad())?;
                        if !(-1..=1).contains(&sign) {
                            return Err(bad());
                        }
                        snap.locked_signs
                            .insert(idx.parse().map_err(|_| bad())?, sign);
                    }
                }
                _ => {}
            }
        }
        for (w, f) in parse_feature_file(text, sig)? {
            snap.weights.push(w);
            snap.features.push(f);
        }
        if let Some(&i) = snap
            .locked_signs
            .keys()
            .find(|&&i| i >= snap.features.len())
        {
            return Err(SnapshotError::BadField {
                line: 5,
                text: format!("locked index {i} out of range"),
            });
        }
        Ok(snap)
    }
}
