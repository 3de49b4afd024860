//! Accuracy of sense assignments against a hand-checked gold file.
//!
//! Gold files are JSON-lines of `{"entry_id": "...", "sense_id": "..."}`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::ids::{EntryId, SenseId};
use crate::lexicon::{Snapshot, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("reading gold file: {0}")]
    Io(#[from] std::io::Error),
    #[error("gold line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Which entries exist and which sense each one is assigned to.
#[derive(Debug, Clone, Default)]
pub struct AssignmentSet {
    known: HashSet<EntryId>,
    assigned: HashMap<EntryId, SenseId>,
}

impl AssignmentSet {
    pub fn from_snapshot(snapshot: &Snapshot<'_>) -> Result<Self, StoreError> {
        let mut set = Self::default();
        for entry in snapshot.entries()? {
            set.known.insert(entry.entry_id);
            if let Some(sense) = entry.sense_id {
                set.assigned.insert(entry.entry_id, sense);
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, entry: EntryId, sense: Option<SenseId>) {
        self.known.insert(entry);
        match sense {
            Some(sense) => {
                self.assigned.insert(entry, sense);
            }
            None => {
                self.assigned.remove(&entry);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub gold: SenseId,
    pub predicted: SenseId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Gold pairs whose entry exists and is mapped.
    pub total: u64,
    pub correct: u64,
    /// `correct / total`; 0 when `total` is 0.
    pub accuracy: f64,
    /// Sorted by (gold, predicted); includes the diagonal.
    pub confusion: Vec<ConfusionCell>,
    /// Gold lines naming entries the store does not have.
    pub unknown_entries: Vec<EntryId>,
    /// Gold lines naming entries that exist but carry no assignment.
    pub unmapped_entries: Vec<EntryId>,
}

#[derive(Deserialize)]
struct GoldLine {
    entry_id: EntryId,
    sense_id: SenseId,
}

pub fn evaluate_mapping<R: BufRead>(gold: R, assignments: &AssignmentSet) -> Result<EvalReport, EvalError> {
    let mut total = 0;
    let mut correct = 0;
    let mut confusion: BTreeMap<(SenseId, SenseId), u64> = BTreeMap::new();
    let mut unknown_entries = Vec::new();
    let mut unmapped_entries = Vec::new();
    for (index, line) in gold.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: GoldLine = serde_json::from_str(&line).map_err(|e| EvalError::Malformed {
            line: index as u64 + 1,
            reason: e.to_string(),
        })?;
        if !assignments.known.contains(&pair.entry_id) {
            unknown_entries.push(pair.entry_id);
            continue;
        }
        let Some(&predicted) = assignments.assigned.get(&pair.entry_id) else {
            unmapped_entries.push(pair.entry_id);
            continue;
        };
        total += 1;
        if predicted == pair.sense_id {
            correct += 1;
        }
        *confusion.entry((pair.sense_id, predicted)).or_default() += 1;
    }
    Ok(EvalReport {
        total,
        correct,
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        confusion: confusion
            .into_iter()
            .map(|((gold, predicted), count)| ConfusionCell { gold, predicted, count })
            .collect(),
        unknown_entries,
        unmapped_entries,
    })
}
