use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{EntryId, GroupId, SenseId, SourceId};
use crate::lang::Lang;

/// Bibliographic payload of a dictionary, as found in a source manifest.
///
/// `key` is the short handle corpus files use in their `dictionary` field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub key: String,
    pub title: String,
    pub languages: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub publisher: Option<String>,
    pub citation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionarySource {
    pub source_id: SourceId,
    pub key: String,
    pub title: String,
    pub languages: Vec<String>,
    pub year: Option<i32>,
    pub publisher: Option<String>,
    pub citation: String,
}

impl DictionarySource {
    pub fn record(&self) -> SourceRecord {
        SourceRecord {
            key: self.key.clone(),
            title: self.title.clone(),
            languages: self.languages.clone(),
            year: self.year,
            publisher: self.publisher.clone(),
            citation: self.citation.clone(),
        }
    }
}

/// An entry before the store has assigned its id and term group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewEntry {
    pub source_term: String,
    pub source_lang: Lang,
    pub target_term: String,
    pub target_lang: Lang,
    pub definition: Option<String>,
    pub source_id: SourceId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermEntry {
    pub entry_id: EntryId,
    pub source_term: String,
    pub source_lang: Lang,
    pub target_term: String,
    pub target_lang: Lang,
    pub definition: Option<String>,
    pub source_id: SourceId,
    pub term_group_id: GroupId,
    pub sense_id: Option<SenseId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermGroup {
    pub term_group_id: GroupId,
    pub canonical_key: String,
    pub display_form: String,
    pub lang: Lang,
    pub member_count: u64,
}

/// One sense of a source-language term, as listed by the reference dictionary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sense {
    pub sense_id: SenseId,
    pub lang: Lang,
    pub source_term_key: String,
    pub ordinal: u32,
    pub gloss: String,
    pub domain_tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingMethod {
    Lexical,
    Llm,
    Manual,
}

impl MappingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MappingMethod::Lexical => "lexical",
            MappingMethod::Llm => "llm",
            MappingMethod::Manual => "manual",
        }
    }

    pub(crate) fn parse(s: &str) -> Option<Self> {
        match s {
            "lexical" => Some(MappingMethod::Lexical),
            "llm" => Some(MappingMethod::Llm),
            "manual" => Some(MappingMethod::Manual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingAssignment {
    pub entry_id: EntryId,
    pub sense_id: SenseId,
    /// In `[0, 1]`.
    pub score: f64,
    pub method: MappingMethod,
    pub mapped_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub entry_count: u64,
    pub source_count: u64,
    pub group_count: u64,
    pub sense_count: u64,
    pub mapped_entry_count: u64,
    pub duplicate_count: u64,
}

/// A group member joined with everything the query path shows for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Attestation {
    pub entry: TermEntry,
    pub source: DictionarySource,
    pub sense: Option<Sense>,
    pub mapping: Option<MappingAssignment>,
}

/// A sense before the store has assigned its id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSense {
    pub lang: Lang,
    pub term_key: String,
    pub ordinal: u32,
    pub gloss: String,
    pub domain_tag: Option<String>,
}
