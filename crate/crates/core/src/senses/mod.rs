//! Reference sense inventory and the mapping of dictionary entries onto it.
//!
//! The inventory is JSON-lines, one sense per line:
//!
//! ```text
//! {"term": "adsorption", "ordinal": 1, "gloss": "...", "domain": "physics"}
//! ```
//!
//! `domain` is optional, as is `lang` (defaults to `en`). Ordinals are
//! 1-based positions in the reference dictionary's sense list.

mod eval;
mod lexical;
mod llm;

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use chrono::Utc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ids::EntryId;
use crate::lang::Lang;
use crate::lexicon::{MappingAssignment, MappingMethod, NewSense, Sense, Store, StoreError, TermEntry};
use crate::normalize::canonical_key;

pub use eval::{evaluate_mapping, AssignmentSet, ConfusionCell, EvalError, EvalReport};
pub use lexical::LexicalBackend;
pub use llm::{LlmBackend, LlmConfig};

/// Assignments scoring below this are reported as low confidence.
pub const LOW_CONFIDENCE_SCORE: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum InventoryError {
    #[error("reading sense inventory: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: sense {ordinal} of '{term}' is listed twice")]
    Duplicate { line: u64, term: String, ordinal: u32 },
}

#[derive(Deserialize)]
struct InventoryLine {
    term: String,
    ordinal: u32,
    gloss: String,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    lang: Option<String>,
}

/// Senses per source-term key, ordered by ordinal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SenseInventory {
    terms: BTreeMap<(Lang, String), Vec<NewSense>>,
}

impl SenseInventory {
    pub fn senses_for(&self, lang: Lang, term: &str) -> &[NewSense] {
        self.terms
            .get(&(lang, canonical_key(term, lang)))
            .map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn len(&self) -> usize {
        self.terms.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// All senses, by term key then ordinal.
    pub fn senses(&self) -> impl Iterator<Item = &NewSense> {
        self.terms.values().flatten()
    }
}

pub fn load_sense_inventory<R: BufRead>(reader: R) -> Result<SenseInventory, InventoryError> {
    let mut inventory = SenseInventory::default();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| InventoryError::Malformed { line: line_no, reason };
        let raw: InventoryLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let lang = match raw.lang.as_deref() {
            None => Lang::En,
            Some(tag) => tag.parse().map_err(|e: crate::lang::UnsupportedLanguage| malformed(e.to_string()))?,
        };
        let key = canonical_key(&raw.term, lang);
        if key.is_empty() {
            return Err(malformed("term is empty after normalization".into()));
        }
        if raw.ordinal == 0 {
            return Err(malformed("ordinal must be at least 1".into()));
        }
        let gloss = raw.gloss.trim().to_string();
        if gloss.is_empty() {
            return Err(malformed("gloss is empty".into()));
        }
        let senses = inventory.terms.entry((lang, key.clone())).or_default();
        if senses.iter().any(|s| s.ordinal == raw.ordinal) {
            return Err(InventoryError::Duplicate { line: line_no, term: key, ordinal: raw.ordinal });
        }
        let at = senses.partition_point(|s| s.ordinal < raw.ordinal);
        senses.insert(
            at,
            NewSense {
                lang,
                term_key: key,
                ordinal: raw.ordinal,
                gloss,
                domain_tag: raw.domain.map(|d| d.trim().to_string()).filter(|d| !d.is_empty()),
            },
        );
    }
    Ok(inventory)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Network trouble, throttling, or a response that never parsed.
    /// Retrying later may succeed.
    #[error("backend unavailable: {0}")]
    Transport(String),
    #[error("backend rejected the request: {0}")]
    Rejected(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// What a backend sees when scoring one entry.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub source_term: &'a str,
    pub target_term: &'a str,
    pub lang: Lang,
    pub definition: Option<&'a str>,
    /// Ordered by ordinal, never empty.
    pub senses: &'a [Sense],
}

/// Scores an entry against each candidate sense.
pub trait MapperBackend: Send + Sync {
    fn name(&self) -> &str;

    fn method(&self) -> MappingMethod;

    /// Whether entries without a definition can be scored at all.
    fn requires_definition(&self) -> bool;

    /// One score in `[0, 1]` per element of `request.senses`, same order.
    fn score_batch(&self, request: &ScoreRequest<'_>) -> Result<Vec<f64>, BackendError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("entry {0}: no reference senses for its term")]
    NoSenses(EntryId),
    #[error("entry {0}: has no definition and the backend needs one")]
    NoDefinition(EntryId),
    #[error("entry {entry}: {source}")]
    Backend {
        entry: EntryId,
        #[source]
        source: BackendError,
    },
    #[error("entry {entry}: backend returned unusable scores: {reason}")]
    BadScores { entry: EntryId, reason: String },
}

impl MapError {
    pub fn entry(&self) -> EntryId {
        match self {
            MapError::NoSenses(id) | MapError::NoDefinition(id) => *id,
            MapError::Backend { entry, .. } | MapError::BadScores { entry, .. } => *entry,
        }
    }
}

/// Picks the highest-scoring sense for `entry`; ties go to the lowest
/// ordinal.
pub fn map_entry(
    entry: &TermEntry,
    senses: &[Sense],
    backend: &dyn MapperBackend,
) -> Result<MappingAssignment, MapError> {
    if senses.is_empty() {
        return Err(MapError::NoSenses(entry.entry_id));
    }
    if entry.definition.is_none() && backend.requires_definition() {
        return Err(MapError::NoDefinition(entry.entry_id));
    }
    let mut ordered: Vec<Sense> = senses.to_vec();
    ordered.sort_by_key(|s| s.ordinal);
    let request = ScoreRequest {
        source_term: &entry.source_term,
        target_term: &entry.target_term,
        lang: entry.source_lang,
        definition: entry.definition.as_deref(),
        senses: &ordered,
    };
    let scores = backend
        .score_batch(&request)
        .map_err(|source| MapError::Backend { entry: entry.entry_id, source })?;
    if scores.len() != ordered.len() {
        return Err(MapError::BadScores {
            entry: entry.entry_id,
            reason: format!("{} scores for {} senses", scores.len(), ordered.len()),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MapError::BadScores {
            entry: entry.entry_id,
            reason: format!("score {bad} outside [0, 1]"),
        });
    }
    let mut best = 0;
    for (i, &score) in scores.iter().enumerate() {
        if score > scores[best] {
            best = i;
        }
    }
    Ok(MappingAssignment {
        entry_id: entry.entry_id,
        sense_id: ordered[best].sense_id,
        score: scores[best],
        method: backend.method(),
        mapped_at: Utc::now(),
    })
}

pub fn is_low_confidence(assignment: &MappingAssignment) -> bool {
    assignment.score < LOW_CONFIDENCE_SCORE
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub backend: String,
    /// Newly mapped in this run.
    pub mapped: u64,
    pub low_confidence: Vec<EntryId>,
    /// Entries whose term has no reference senses.
    pub without_senses: u64,
    /// Entries the backend cannot map (for example, no definition).
    pub unmappable: Vec<(EntryId, String)>,
    /// Backend failures; these entries stay unmapped and are retried next run.
    pub failed: Vec<(EntryId, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum MapAllError {
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Stores the inventory's senses, then maps every entry that has none yet.
/// Resumable: entries mapped by an earlier run are left alone. Per-entry
/// failures are collected, never fatal.
pub fn map_all(
    store: &mut Store,
    inventory: &SenseInventory,
    backend: &dyn MapperBackend,
    batch_size: usize,
) -> Result<MapReport, MapAllError> {
    if batch_size == 0 {
        return Err(MapAllError::InvalidBatchSize);
    }
    let new: Vec<NewSense> = inventory.senses().cloned().collect();
    store.put_senses(&new)?;
    let mut senses: HashMap<(Lang, String), Vec<Sense>> = HashMap::new();
    for sense in store.snapshot()?.senses()? {
        senses
            .entry((sense.lang, sense.source_term_key.clone()))
            .or_default()
            .push(sense);
    }

    let mut report = MapReport { backend: backend.name().to_string(), ..MapReport::default() };
    let mut after = None;
    loop {
        let batch = store.snapshot()?.unmapped_entries(after, batch_size)?;
        let Some(last) = batch.last() else { break };
        after = Some(last.entry_id);

        let outcomes: Vec<Result<MappingAssignment, MapError>> = batch
            .par_iter()
            .map(|entry| {
                let key = (entry.source_lang, canonical_key(&entry.source_term, entry.source_lang));
                let candidates = senses.get(&key).map_or(&[][..], Vec::as_slice);
                map_entry(entry, candidates, backend)
            })
            .collect();

        let mut assignments = Vec::new();
        for outcome in outcomes {
            match outcome {
                Ok(assignment) => {
                    if is_low_confidence(&assignment) {
                        report.low_confidence.push(assignment.entry_id);
                    }
                    assignments.push(assignment);
                }
                Err(MapError::NoSenses(_)) => report.without_senses += 1,
                Err(MapError::NoDefinition(id)) => {
                    report.unmappable.push((id, "no definition".into()))
                }
                Err(e) => report.failed.push((e.entry(), e.to_string())),
            }
        }
        report.mapped += store.put_assignments(&assignments)? as u64;
    }
    tracing::info!(
        backend = backend.name(),
        mapped = report.mapped,
        unmappable = report.unmappable.len(),
        failed = report.failed.len(),
        "sense mapping finished"
    );
    Ok(report)
}
