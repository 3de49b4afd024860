//! Dumps a store back into the JSON-lines corpus format it was ingested
//! from, plus the source manifest as a sidecar. Ingesting both into an
//! empty store reproduces the same entries, sources and groups.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use termbase::lexicon::SourceRecord;
use termbase::Store;

use crate::error::AppError;

#[derive(Serialize)]
struct CorpusLine<'a> {
    source_term: &'a str,
    target_term: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    definition: Option<&'a str>,
    dictionary: &'a str,
    lang: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExportReport {
    pub corpus: PathBuf,
    pub manifest: PathBuf,
    pub entries: u64,
    pub sources: u64,
}

/// `corpus.jsonl` gets `corpus.manifest.json` beside it.
pub fn manifest_path(corpus: &Path) -> PathBuf {
    corpus.with_extension("manifest.json")
}

pub fn export(store: &Store, out: &Path) -> Result<ExportReport, AppError> {
    let snapshot = store.snapshot()?;
    let sources = snapshot.sources()?;
    let keys: HashMap<_, _> = sources.iter().map(|s| (s.source_id, s.key.as_str())).collect();
    let records: Vec<SourceRecord> = sources.iter().map(|s| s.record()).collect();

    let manifest = manifest_path(out);
    let mut writer = BufWriter::new(File::create(&manifest)?);
    serde_json::to_writer_pretty(&mut writer, &records).map_err(std::io::Error::from)?;
    writeln!(writer)?;
    writer.flush()?;

    let entries = snapshot.entries()?;
    let mut writer = BufWriter::new(File::create(out)?);
    for entry in &entries {
        let line = CorpusLine {
            source_term: &entry.source_term,
            target_term: &entry.target_term,
            definition: entry.definition.as_deref(),
            dictionary: keys[&entry.source_id],
            lang: entry.source_lang.code(),
        };
        serde_json::to_writer(&mut writer, &line).map_err(std::io::Error::from)?;
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(ExportReport { corpus: out.into(), manifest, entries: entries.len() as u64, sources: sources.len() as u64 })
}
