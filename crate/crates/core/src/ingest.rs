//! Corpus parsing, duplicate detection and loading.
//!
//! Two line-oriented formats are accepted:
//!
//! * `jsonl`: one object per line with the fields `source_term`,
//!   `target_term`, `definition` (optional), `dictionary` and `lang`.
//! * `tsv`: the same five fields as tab-separated columns in that order, no
//!   header. An empty definition column means "no definition".
//!
//! `dictionary` is the key of a source registered beforehand (see
//! [`register_manifest`]), `lang` is the source-language tag. The target
//! language is always Arabic.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::SourceId;
use crate::lang::Lang;
use crate::lexicon::{NewEntry, SourceRecord, Store, StoreError};
use crate::normalize::canonical_key;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json-lines" | "ndjson" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            _ => Err(IngestError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("unknown corpus format '{0}' (expected jsonl or tsv)")]
    UnknownFormat(String),
    #[error("reading corpus: {0}")]
    Io(#[from] io::Error),
    #[error("malformed source manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub source_term: String,
    pub target_term: String,
    pub definition: Option<String>,
    pub source_dictionary_key: String,
    pub source_lang: String,
    pub line_number: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_number: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parsed {
    Record(RawRecord),
    Reject(Reject),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub read_count: u64,
    pub stored_count: u64,
    pub duplicate_count: u64,
    pub rejected_count: u64,
    pub rejects: Vec<Reject>,
}

#[derive(Deserialize)]
struct JsonLine {
    source_term: String,
    target_term: String,
    #[serde(default)]
    definition: Option<String>,
    dictionary: String,
    lang: String,
}

/// Lazily parses a corpus stream. Malformed lines come out as
/// [`Parsed::Reject`]; only I/O failures end the stream early. Blank lines
/// are skipped.
pub fn parse_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> CorpusLines<R> {
    CorpusLines {
        reader,
        format,
        line_number: 0,
        buf: Vec::new(),
    }
}

pub struct CorpusLines<R> {
    reader: R,
    format: CorpusFormat,
    line_number: u64,
    buf: Vec<u8>,
}

impl<R: BufRead> Iterator for CorpusLines<R> {
    type Item = io::Result<Parsed>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
            self.line_number += 1;
            let line_number = self.line_number;
            let line = match std::str::from_utf8(&self.buf) {
                Ok(line) => line.trim_end_matches(['\n', '\r']),
                Err(_) => {
                    return Some(Ok(Parsed::Reject(Reject {
                        line_number,
                        reason: "invalid UTF-8".into(),
                    })))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let parsed = match self.format {
                CorpusFormat::Jsonl => parse_json_line(line, line_number),
                CorpusFormat::Tsv => parse_tsv_line(line, line_number),
            };
            return Some(Ok(match parsed {
                Ok(record) => Parsed::Record(record),
                Err(reason) => Parsed::Reject(Reject { line_number, reason }),
            }));
        }
    }
}

fn parse_json_line(line: &str, line_number: u64) -> Result<RawRecord, String> {
    let raw: JsonLine = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    build_record(
        raw.source_term,
        raw.target_term,
        raw.definition,
        raw.dictionary,
        raw.lang,
        line_number,
    )
}

fn parse_tsv_line(line: &str, line_number: u64) -> Result<RawRecord, String> {
    let columns: Vec<&str> = line.split('\t').collect();
    let [source, target, definition, dictionary, lang] = columns[..] else {
        return Err(format!("expected 5 tab-separated columns, found {}", columns.len()));
    };
    build_record(
        source.into(),
        target.into(),
        Some(definition.to_string()),
        dictionary.into(),
        lang.into(),
        line_number,
    )
}

fn build_record(
    source_term: String,
    target_term: String,
    definition: Option<String>,
    dictionary: String,
    lang: String,
    line_number: u64,
) -> Result<RawRecord, String> {
    for (field, value) in [
        ("source_term", &source_term),
        ("target_term", &target_term),
        ("dictionary", &dictionary),
        ("lang", &lang),
    ] {
        if value.trim().is_empty() {
            return Err(format!("{field} is empty"));
        }
    }
    Ok(RawRecord {
        source_term: source_term.trim().to_string(),
        target_term: target_term.trim().to_string(),
        definition: definition
            .map(|d| d.trim().to_string())
            .filter(|d| !d.is_empty()),
        source_dictionary_key: dictionary.trim().to_string(),
        source_lang: lang.trim().to_string(),
        line_number,
    })
}

/// Identity of one attestation: (source key, target key, dictionary).
fn attestation_key(record: &RawRecord) -> (String, String, String) {
    let source = match record.source_lang.parse::<Lang>() {
        Ok(lang) => format!("{}\u{0}{}", lang.code(), canonical_key(&record.source_term, lang)),
        // unkeyable records only collide with byte-identical repeats
        Err(_) => format!("{}\u{0}{}", record.source_lang, record.source_term.trim()),
    };
    (
        source,
        canonical_key(&record.target_term, Lang::Ar),
        record.source_dictionary_key.trim().to_string(),
    )
}

/// Drops every record whose attestation key was already seen earlier in
/// `records`. First occurrence wins; order is otherwise kept.
pub fn deduplicate(records: Vec<RawRecord>) -> (Vec<RawRecord>, u64) {
    let mut seen = HashSet::new();
    let mut duplicates = 0;
    let unique = records
        .into_iter()
        .filter(|record| {
            let fresh = seen.insert(attestation_key(record));
            if !fresh {
                duplicates += 1;
            }
            fresh
        })
        .collect();
    (unique, duplicates)
}

/// Reads a JSON array of source records and registers each one.
pub fn register_manifest<R: io::Read>(store: &mut Store, reader: R) -> Result<Vec<SourceId>, IngestError> {
    let records: Vec<SourceRecord> = serde_json::from_reader(reader)?;
    records
        .iter()
        .map(|record| store.put_source(record).map_err(IngestError::from))
        .collect()
}

/// Parses, validates, deduplicates and stores a corpus in one transaction.
///
/// A record duplicates another when it repeats an attestation already in
/// the store or earlier in the same stream.
pub fn ingest<R: BufRead>(
    store: &mut Store,
    reader: R,
    format: CorpusFormat,
) -> Result<IngestReport, IngestError> {
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for parsed in parse_corpus(reader, format) {
        report.read_count += 1;
        match parsed? {
            Parsed::Record(record) => records.push(record),
            Parsed::Reject(reject) => report.rejects.push(reject),
        }
    }

    let mut batch = Vec::with_capacity(records.len());
    {
        let snapshot = store.snapshot()?;
        let mut sources: HashMap<String, Option<SourceId>> = HashMap::new();
        let mut seen = HashSet::new();
        for record in records {
            let reject = |reason: String| Reject { line_number: record.line_number, reason };
            let lang = match record.source_lang.parse::<Lang>() {
                Ok(Lang::Ar) => {
                    report.rejects.push(reject("source language must not be the target language (ar)".into()));
                    continue;
                }
                Ok(lang) => lang,
                Err(e) => {
                    report.rejects.push(reject(e.to_string()));
                    continue;
                }
            };
            let key = record.source_dictionary_key.as_str();
            let source_id = match sources.get(key) {
                Some(id) => *id,
                None => {
                    let id = snapshot.source_by_key(key)?.map(|s| s.source_id);
                    sources.insert(key.to_string(), id);
                    id
                }
            };
            let Some(source_id) = source_id else {
                report.rejects.push(reject(format!("unknown dictionary '{key}'")));
                continue;
            };
            let source_key = canonical_key(&record.source_term, lang);
            let target_key = canonical_key(&record.target_term, Lang::Ar);
            if source_key.is_empty() {
                report.rejects.push(reject("source_term is empty after normalization".into()));
                continue;
            }
            if target_key.is_empty() {
                report.rejects.push(reject("target_term has no Arabic text after normalization".into()));
                continue;
            }
            let fresh = seen.insert((source_key.clone(), lang, target_key.clone(), source_id));
            if !fresh || snapshot.has_attestation(&source_key, lang, &target_key, source_id)? {
                report.duplicate_count += 1;
                continue;
            }
            batch.push(NewEntry {
                source_term: record.source_term,
                source_lang: lang,
                target_term: record.target_term,
                target_lang: Lang::Ar,
                definition: record.definition,
                source_id,
            });
        }
    }
    report.rejected_count = report.rejects.len() as u64;
    report.stored_count = store.record_ingest(&batch, report.duplicate_count)? as u64;
    tracing::info!(
        read = report.read_count,
        stored = report.stored_count,
        duplicates = report.duplicate_count,
        rejected = report.rejected_count,
        "ingest finished"
    );
    Ok(report)
}
