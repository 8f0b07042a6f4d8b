//! Trajectories and the delimited-text interchange format.
//!
//! Every tool reads and writes the same CSV schema:
//!
//! ```text
//! subject_id,trial,action_type,box_id,key_id,outcome
//! s01,1,attempt,white,white7,0
//! s01,2,observe,purple,,3
//! ```
//!
//! `action_type` is `attempt` or `observe`; `key_id` is empty for observes;
//! `outcome` is 0/1 for attempts and the revealed shape count for observes.
//! Rows of one subject are contiguous and their trials run 1, 2, 3, ...

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{oracle_predicts, Action, Layout, Outcome, MAX_COUNT};
use crate::hypothesis::{Hypothesis, RuleClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub action: Action,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub env_seed: Option<u64>,
    pub agent_seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub completed: bool,
    /// Several particles shared the maximal weight at the end of the episode.
    #[serde(default)]
    pub final_tie: bool,
    #[serde(default)]
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub subject_id: String,
    pub variant: String,
    pub records: Vec<TrialRecord>,
    pub final_hypothesis: Option<Hypothesis>,
    pub final_rule: Option<RuleClass>,
    /// Chosen key id for each generalization trial.
    pub generalization: Vec<Option<String>>,
    pub metadata: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(subject_id: impl Into<String>, variant: impl Into<String>) -> Self {
        Trajectory {
            subject_id: subject_id.into(),
            variant: variant.into(),
            records: Vec::new(),
            final_hypothesis: None,
            final_rule: None,
            generalization: Vec::new(),
            metadata: TrajectoryMeta::default(),
        }
    }

    pub fn push(&mut self, action: Action, outcome: Outcome) {
        let trial = self.records.len() as u32 + 1;
        self.records.push(TrialRecord { trial, action, outcome });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.records.iter().map(|r| r.action)
    }

    pub fn n_attempts(&self) -> usize {
        self.records.iter().filter(|r| r.action.is_attempt()).count()
    }

    pub fn n_observes(&self) -> usize {
        self.records.len() - self.n_attempts()
    }

    /// Trials (1-based) on which the action was an observe.
    pub fn observe_trials(&self) -> Vec<u32> {
        self.records.iter().filter(|r| !r.action.is_attempt()).map(|r| r.trial).collect()
    }

    pub fn n_opened(&self) -> usize {
        trajectory_counts(self).last().copied().unwrap_or(0) as usize
    }
}

/// Cumulative number of distinct boxes opened up to and including each trial.
pub fn trajectory_counts(traj: &Trajectory) -> Vec<u8> {
    let mut opened: Vec<usize> = Vec::new();
    traj.records
        .iter()
        .map(|r| {
            if let (Action::Attempt { box_, .. }, Outcome::Attempt { success: true }) = (r.action, r.outcome) {
                if !opened.contains(&box_.0) {
                    opened.push(box_.0);
                }
            }
            opened.len() as u8
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("no trajectory rows")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    subject_id: String,
    trial: String,
    action_type: String,
    box_id: String,
    key_id: String,
    outcome: String,
}

/// Writes trajectories as CSV with a header row.
pub fn write_csv<W: Write>(trajectories: &[Trajectory], layout: &Layout, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "trial", "action_type", "box_id", "key_id", "outcome"])?;
    for t in trajectories {
        for r in &t.records {
            let (kind, key) = match r.action {
                Action::Observe { .. } => ("observe", String::new()),
                Action::Attempt { key, .. } => ("attempt", layout.key(key).id.clone()),
            };
            w.write_record([
                t.subject_id.as_str(),
                &r.trial.to_string(),
                kind,
                &layout.boxdef(r.action.target()).id,
                &key,
                &r.outcome.code().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(trajectories: &[Trajectory], layout: &Layout) -> String {
    let mut buf = Vec::new();
    write_csv(trajectories, layout, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Reads and validates trajectories. Errors carry the 1-based line number.
///
/// Beyond the schema, rows must respect the task: no attempt on an already
/// opened box, no success with a key that cannot open the box, and observes
/// must reveal the true count.
pub fn read_csv<R: Read>(input: R, layout: &Layout) -> Result<Vec<Trajectory>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let expected = ["subject_id", "trial", "action_type", "box_id", "key_id", "outcome"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(IngestError::Row { line: 1, message: format!("expected header {}", expected.join(",")) });
    }
    let mut out: Vec<Trajectory> = Vec::new();
    let mut open: Vec<bool> = Vec::new();
    for result in reader.deserialize::<Row>() {
        let row = result?;
        let line = out.iter().map(|t| t.len() as u64).sum::<u64>() + 2;
        let err = |message: String| IngestError::Row { line, message };
        if row.subject_id.is_empty() {
            return Err(err("empty subject_id".into()));
        }
        let new_subject = out.last().is_none_or(|t| t.subject_id != row.subject_id);
        if new_subject {
            if out.iter().any(|t| t.subject_id == row.subject_id) {
                return Err(err(format!("rows of subject `{}` are not contiguous", row.subject_id)));
            }
            out.push(Trajectory::new(row.subject_id.clone(), "observed"));
            open = vec![false; layout.n_boxes()];
        }
        let traj = out.last_mut().unwrap();
        let trial: u32 = row.trial.parse().map_err(|_| err(format!("bad trial `{}`", row.trial)))?;
        if trial != traj.len() as u32 + 1 {
            return Err(err(format!("trial {trial} out of sequence, expected {}", traj.len() + 1)));
        }
        let b = layout.box_index(&row.box_id).map_err(|e| err(e.to_string()))?;
        let outcome: u8 = row.outcome.parse().map_err(|_| err(format!("bad outcome `{}`", row.outcome)))?;
        let (action, outcome) = match row.action_type.as_str() {
            "attempt" => {
                let k = layout.key_index(&row.key_id).map_err(|e| err(e.to_string()))?;
                if outcome > 1 {
                    return Err(err(format!("attempt outcome must be 0 or 1, got {outcome}")));
                }
                if open[b.0] {
                    return Err(err(format!("attempt on box `{}` after it was opened", row.box_id)));
                }
                if outcome == 1 && !oracle_predicts(layout.key(k), layout.boxdef(b)) {
                    return Err(err(format!("`{}` cannot open `{}`", row.key_id, row.box_id)));
                }
                open[b.0] |= outcome == 1;
                (Action::Attempt { box_: b, key: k }, Outcome::Attempt { success: outcome == 1 })
            }
            "observe" => {
                if !row.key_id.is_empty() {
                    return Err(err("observe rows must leave key_id empty".into()));
                }
                if !(1..=MAX_COUNT).contains(&outcome) || outcome != layout.boxdef(b).true_number {
                    return Err(err(format!("observe of `{}` revealed {outcome}", row.box_id)));
                }
                (Action::Observe { box_: b }, Outcome::Observe { revealed: outcome })
            }
            other => return Err(err(format!("unknown action_type `{other}`"))),
        };
        traj.push(action, outcome);
        traj.metadata.completed = open.iter().all(|&o| o);
    }
    if out.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BoxIndex, KeyIndex};

    fn attempt(b: usize, k: usize, s: bool) -> (Action, Outcome) {
        (Action::Attempt { box_: BoxIndex(b), key: KeyIndex(k) }, Outcome::Attempt { success: s })
    }

    fn traj(rows: &[(Action, Outcome)]) -> Trajectory {
        let mut t = Trajectory::new("s", "test");
        for &(a, o) in rows {
            t.push(a, o);
        }
        t
    }

    #[test]
    fn counts() {
        let five = traj(&[attempt(0, 0, true), attempt(1, 2, true), attempt(2, 4, true), attempt(3, 5, true), attempt(4, 7, true)]);
        assert_eq!(trajectory_counts(&five), vec![1, 2, 3, 4, 5]);
        let fails = traj(&[attempt(0, 1, false), attempt(0, 1, false)]);
        assert_eq!(trajectory_counts(&fails), vec![0, 0]);
        let mixed = traj(&[attempt(1, 1, false), attempt(0, 0, true), attempt(1, 1, false), attempt(1, 2, true), attempt(2, 1, false)]);
        assert_eq!(trajectory_counts(&mixed), vec![0, 1, 1, 2, 2]);
    }

    #[test]
    fn csv_roundtrip() {
        let l = Layout::standard();
        let mut t = traj(&[attempt(2, 9, false), (Action::Observe { box_: BoxIndex(3) }, Outcome::Observe { revealed: 3 }), attempt(0, 0, true)]);
        t.subject_id = "kid-7".into();
        let text = to_csv_string(&[t.clone()], &l);
        assert!(text.starts_with("subject_id,trial,action_type,box_id,key_id,outcome\nkid-7,1,attempt,white,white7,0\nkid-7,2,observe,purple,,3\n"));
        let back = read_csv(text.as_bytes(), &l).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].records, t.records);
        assert_eq!(back[0].subject_id, "kid-7");
    }

    #[test]
    fn ingestion_errors_carry_line_numbers() {
        let l = Layout::standard();
        let head = "subject_id,trial,action_type,box_id,key_id,outcome\n";
        let cases = [
            ("a,1,attempt,red,red1,1\na,3,attempt,pink,grey2,1\n", 3),
            ("a,1,jump,red,red1,1\n", 2),
            ("a,1,attempt,red,red1,1\na,2,attempt,red,red1,1\n", 3),
            ("a,1,attempt,red,pink6,1\n", 2),
            ("a,1,observe,red,red1,1\n", 2),
            ("a,1,observe,purple,,4\n", 2),
            ("a,1,attempt,teal,red1,0\n", 2),
            ("a,1,attempt,red,red1,0\nb,1,attempt,red,red1,0\na,2,attempt,red,red1,0\n", 4),
        ];
        for (body, line) in cases {
            match read_csv(format!("{head}{body}").as_bytes(), &l) {
                Err(IngestError::Row { line: got, .. }) => assert_eq!(got, line, "{body}"),
                other => panic!("{body}: {other:?}"),
            }
        }
        assert!(matches!(read_csv(head.as_bytes(), &l), Err(IngestError::Empty)));
        assert!(read_csv("".as_bytes(), &l).is_err());
    }
}
