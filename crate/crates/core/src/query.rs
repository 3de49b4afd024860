//! The five-step lookup.
//!
//! 1. candidate lookup in the [`Index`];
//! 2. the exact-match group is selected, else the top candidate (the result
//!    is then flagged `approximate`);
//! 3. the group's entries are bucketed by assigned sense and the buckets
//!    sorted by instance count descending, then sense ordinal; entries with
//!    no assignment form a trailing `unassigned` bucket;
//! 4. within a bucket, Arabic equivalents are grouped by canonical key and
//!    sorted by count descending, then key;
//! 5. the recommendation is the display form of the first equivalent of the
//!    first bucket.
//!
//! An equivalent's display form is its most frequent stored spelling, ties
//! going to the smallest string.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ids::{EntryId, GroupId, SenseId, SourceId};
use crate::lang::Lang;
use crate::lexicon::{Attestation, DictionarySource, MappingMethod, Sense, Store, StoreError, TermGroup};
use crate::normalize::canonical_key;
use crate::search::{Candidate, Index, MatchKind, SearchConfig, SearchError};

pub const UNASSIGNED_LABEL: &str = "unassigned";

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("query '{0}' is empty after normalization")]
    InvalidQuery(String),
    #[error("limit must be at least 1")]
    InvalidLimit,
    #[error("term group {0} does not exist")]
    NotFound(GroupId),
    #[error("index refers to group {0}, which is not in the store; rebuild the index")]
    StaleIndex(GroupId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<SearchError> for QueryError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::InvalidQuery(q) => Self::InvalidQuery(q),
            SearchError::InvalidLimit => Self::InvalidLimit,
            SearchError::Store(e) => Self::Store(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryOptions {
    /// Maximum number of candidates in the candidate stage.
    pub limit: usize,
    /// Whether the candidate list is returned.
    pub include_candidates: bool,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self { limit: 10, include_candidates: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub entry_id: EntryId,
    pub source_id: SourceId,
    pub dictionary: String,
    pub citation: String,
    /// The equivalent as spelled in this dictionary.
    pub spelling: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalentGroup {
    pub normalized_form: String,
    pub display_form: String,
    pub count: u64,
    /// Ordered by entry id.
    pub citations: Vec<Citation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseBucket {
    /// Absent for the unassigned bucket.
    pub sense_id: Option<SenseId>,
    pub ordinal: Option<u32>,
    /// Domain tag, else `sense N`, else `unassigned`.
    pub label: String,
    pub gloss: Option<String>,
    pub domain_tag: Option<String>,
    pub instance_count: u64,
    pub equivalents: Vec<EquivalentGroup>,
}

impl SenseBucket {
    pub fn is_unassigned(&self) -> bool {
        self.sense_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub lang: Lang,
    pub query_key: String,
    /// True when the selected group is not an exact match.
    pub approximate: bool,
    pub matched_group: Option<TermGroup>,
    pub candidates: Vec<Candidate>,
    pub senses: Vec<SenseBucket>,
    pub recommendation: Option<String>,
    pub timing_ms: u64,
}

impl QueryResult {
    /// Compact JSON with non-ASCII text left unescaped.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("query results always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingInfo {
    pub score: f64,
    pub method: MappingMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDetailRow {
    pub entry_id: EntryId,
    pub source_term: String,
    pub target_term: String,
    pub definition: Option<String>,
    pub source: DictionarySource,
    pub sense: Option<Sense>,
    pub sense_label: String,
    pub mapping: Option<MappingInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDetail {
    pub group: TermGroup,
    /// Ordered by entry id.
    pub entries: Vec<TermDetailRow>,
}

impl TermDetail {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("term details always serialize")
    }
}

/// Answers queries from an immutable index; cheap to clone and share.
#[derive(Debug, Clone)]
pub struct QueryEngine {
    index: Arc<Index>,
    config: SearchConfig,
}

impl QueryEngine {
    pub fn new(index: Arc<Index>, config: SearchConfig) -> Self {
        Self { index, config }
    }

    /// Builds a fresh index from the store's current contents.
    pub fn from_store(store: &Store, config: SearchConfig) -> Result<Self, StoreError> {
        let index = Index::from_snapshot(&store.snapshot()?)?;
        Ok(Self::new(Arc::new(index), config))
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn query(&self, store: &Store, term: &str, lang: Lang, options: &QueryOptions) -> Result<QueryResult, QueryError> {
        let started = Instant::now();
        let candidates = self.index.lookup_with(term, lang, options.limit, &self.config)?;
        let query_key = canonical_key(term, lang);

        let mut result = QueryResult {
            query: term.to_string(),
            lang,
            query_key,
            approximate: false,
            matched_group: None,
            candidates: Vec::new(),
            senses: Vec::new(),
            recommendation: None,
            timing_ms: 0,
        };
        if let Some(top) = candidates.first() {
            let snapshot = store.snapshot()?;
            let group = snapshot.group(top.term_group_id)?.ok_or(QueryError::StaleIndex(top.term_group_id))?;
            let attestations = snapshot.attestations(group.term_group_id)?;
            result.approximate = top.match_kind != MatchKind::Exact;
            result.senses = rank_senses(attestations);
            result.recommendation = result
                .senses
                .first()
                .and_then(|b| b.equivalents.first())
                .map(|e| e.display_form.clone());
            result.matched_group = Some(group);
        }
        if options.include_candidates {
            result.candidates = candidates;
        }
        result.timing_ms = started.elapsed().as_millis() as u64;
        Ok(result)
    }

    pub fn term_detail(&self, store: &Store, group: GroupId) -> Result<TermDetail, QueryError> {
        term_detail(store, group)
    }
}

pub fn term_detail(store: &Store, group: GroupId) -> Result<TermDetail, QueryError> {
    let snapshot = store.snapshot()?;
    let found = snapshot.group(group)?.ok_or(QueryError::NotFound(group))?;
    let entries = snapshot
        .attestations(group)?
        .into_iter()
        .map(|a| TermDetailRow {
            entry_id: a.entry.entry_id,
            source_term: a.entry.source_term,
            target_term: a.entry.target_term,
            definition: a.entry.definition,
            sense_label: match &a.sense {
                Some(s) => sense_label(s),
                None => UNASSIGNED_LABEL.to_string(),
            },
            sense: a.sense,
            mapping: a.mapping.map(|m| MappingInfo { score: m.score, method: m.method }),
            source: a.source,
        })
        .collect();
    Ok(TermDetail { group: found, entries })
}

fn sense_label(sense: &Sense) -> String {
    match &sense.domain_tag {
        Some(tag) => tag.clone(),
        None => format!("sense {}", sense.ordinal),
    }
}

/// Steps 3 and 4 over one group's attestations.
fn rank_senses(attestations: Vec<Attestation>) -> Vec<SenseBucket> {
    let mut by_sense: BTreeMap<Option<SenseId>, (Option<Sense>, Vec<Attestation>)> = BTreeMap::new();
    for a in attestations {
        let slot = by_sense.entry(a.entry.sense_id).or_insert_with(|| (a.sense.clone(), Vec::new()));
        slot.1.push(a);
    }
    let mut buckets: Vec<SenseBucket> = by_sense
        .into_values()
        .map(|(sense, members)| SenseBucket {
            sense_id: sense.as_ref().map(|s| s.sense_id),
            ordinal: sense.as_ref().map(|s| s.ordinal),
            label: sense.as_ref().map_or_else(|| UNASSIGNED_LABEL.to_string(), sense_label),
            gloss: sense.as_ref().map(|s| s.gloss.clone()),
            domain_tag: sense.as_ref().and_then(|s| s.domain_tag.clone()),
            instance_count: members.len() as u64,
            equivalents: group_equivalents(members),
        })
        .collect();
    buckets.sort_by(|a, b| {
        a.is_unassigned()
            .cmp(&b.is_unassigned())
            .then(b.instance_count.cmp(&a.instance_count))
            .then(a.ordinal.cmp(&b.ordinal))
    });
    buckets
}

fn group_equivalents(members: Vec<Attestation>) -> Vec<EquivalentGroup> {
    let mut by_key: BTreeMap<String, Vec<Attestation>> = BTreeMap::new();
    for a in members {
        by_key.entry(canonical_key(&a.entry.target_term, a.entry.target_lang)).or_default().push(a);
    }
    let mut groups: Vec<EquivalentGroup> = by_key
        .into_iter()
        .map(|(normalized_form, mut members)| {
            members.sort_by_key(|a| a.entry.entry_id);
            let mut spellings: BTreeMap<&str, u64> = BTreeMap::new();
            for a in &members {
                *spellings.entry(a.entry.target_term.as_str()).or_default() += 1;
            }
            // BTreeMap iterates ascending, so the first maximum is the smallest spelling.
            let mut display_form = "";
            let mut best = 0;
            for (spelling, n) in spellings {
                if n > best {
                    best = n;
                    display_form = spelling;
                }
            }
            let display_form = display_form.to_string();
            EquivalentGroup {
                normalized_form,
                display_form,
                count: members.len() as u64,
                citations: members
                    .into_iter()
                    .map(|a| Citation {
                        entry_id: a.entry.entry_id,
                        source_id: a.source.source_id,
                        dictionary: a.source.key,
                        citation: a.source.citation,
                        spelling: a.entry.target_term,
                    })
                    .collect(),
            }
        })
        .collect();
    groups.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.normalized_form.cmp(&b.normalized_form)));
    groups
}
