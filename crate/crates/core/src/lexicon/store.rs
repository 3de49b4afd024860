use std::collections::BTreeSet;
use std::fs::{File, OpenOptions, TryLockError};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OpenFlags, OptionalExtension, Row, Transaction};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use super::types::*;
use crate::ids::{EntryId, GroupId, SenseId, SourceId};
use crate::lang::Lang;
use crate::normalize::canonical_key;

/// Schema version written to (and checked against) the file header.
pub const SCHEMA_VERSION: i64 = 1;
const APPLICATION_ID: i64 = 0x5442_4153;
const SCHEMA: &str = include_str!("schema.sql");

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} has schema version {found}; this build supports up to {supported}")]
    UnsupportedSchema {
        path: PathBuf,
        found: i64,
        supported: i64,
    },
    #[error("{0} is not a term base store")]
    NotATermBase(PathBuf),
    #[error("{0} is held by another writer")]
    Locked(PathBuf),
    #[error("store was opened read-only")]
    ReadOnly,
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("entry #{index} references unknown source {source_id}")]
    DanglingSource { index: usize, source_id: SourceId },
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("corrupt row: {0}")]
    Corrupt(String),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

fn text(s: &str) -> String {
    s.trim().nfc().collect()
}

fn opt_text(s: Option<&str>) -> Option<String> {
    s.map(text).filter(|t| !t.is_empty())
}

/// Exclusive advisory lock on `<store>.lock`. Held by every process that
/// mutates the store, and by the query service for its whole lifetime.
#[derive(Debug)]
pub struct WriterLock {
    _file: File,
    path: PathBuf,
}

impl WriterLock {
    pub fn acquire(store_path: &Path) -> Result<Self> {
        let mut path = store_path.as_os_str().to_owned();
        path.push(".lock");
        let path = PathBuf::from(path);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|source| StoreError::Io { path: path.clone(), source })?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file, path }),
            Err(TryLockError::WouldBlock) => Err(StoreError::Locked(store_path.to_path_buf())),
            Err(TryLockError::Error(source)) => Err(StoreError::Io { path, source }),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Writer,
    Reader,
}

/// The system of record: a single SQLite file with one writer at a time.
///
/// All reads go through a [`Snapshot`], which sees the store as of one
/// committed transaction.
pub struct Store {
    conn: Connection,
    mode: Mode,
    path: Option<PathBuf>,
    _lock: Option<WriterLock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("mode", &self.mode)
            .finish()
    }
}

impl Store {
    /// Opens (creating if needed) a store for writing. Fails with
    /// [`StoreError::Locked`] when another writer holds it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let lock = WriterLock::acquire(path)?;
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        let mut store = Self {
            conn,
            mode: Mode::Writer,
            path: Some(path.to_path_buf()),
            _lock: Some(lock),
        };
        store.prepare_schema()?;
        Ok(store)
    }

    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(StoreError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "store file does not exist"),
            });
        }
        let conn = Connection::open_with_flags(
            path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )?;
        let mut store = Self {
            conn,
            mode: Mode::Reader,
            path: Some(path.to_path_buf()),
            _lock: None,
        };
        store.prepare_schema()?;
        Ok(store)
    }

    pub fn in_memory() -> Result<Self> {
        let mut store = Self {
            conn: Connection::open_in_memory()?,
            mode: Mode::Writer,
            path: None,
            _lock: None,
        };
        store.prepare_schema()?;
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn is_writer(&self) -> bool {
        self.mode == Mode::Writer
    }

    fn display_path(&self) -> PathBuf {
        self.path.clone().unwrap_or_else(|| PathBuf::from(":memory:"))
    }

    fn prepare_schema(&mut self) -> Result<()> {
        self.conn.pragma_update(None, "foreign_keys", "ON")?;
        let version: i64 = self.conn.pragma_query_value(None, "user_version", |r| r.get(0))?;
        let app_id: i64 = self.conn.pragma_query_value(None, "application_id", |r| r.get(0))?;
        let tables: i64 =
            self.conn
                .query_row("SELECT COUNT(*) FROM sqlite_master", [], |r| r.get(0))?;
        if version == 0 && app_id == 0 && tables == 0 {
            if self.mode == Mode::Reader {
                return Err(StoreError::NotATermBase(self.display_path()));
            }
            let tx = self.conn.transaction()?;
            tx.execute_batch(SCHEMA)?;
            tx.pragma_update(None, "application_id", APPLICATION_ID)?;
            tx.pragma_update(None, "user_version", SCHEMA_VERSION)?;
            tx.commit()?;
            return Ok(());
        }
        if app_id != APPLICATION_ID {
            return Err(StoreError::NotATermBase(self.display_path()));
        }
        if version > SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema {
                path: self.display_path(),
                found: version,
                supported: SCHEMA_VERSION,
            });
        }
        Ok(())
    }

    fn writer(&mut self) -> Result<Transaction<'_>> {
        if self.mode != Mode::Writer {
            return Err(StoreError::ReadOnly);
        }
        Ok(self.conn.transaction()?)
    }

    /// Registers a dictionary. Storing an identical payload again returns the
    /// existing id; a different payload under the same key is a conflict.
    pub fn put_source(&mut self, record: &SourceRecord) -> Result<SourceId> {
        let tx = self.writer()?;
        let id = insert_source(&tx, record)?;
        tx.commit()?;
        Ok(id)
    }

    /// Stores a batch atomically: either every entry lands or none does.
    pub fn put_entries(&mut self, batch: &[NewEntry]) -> Result<usize> {
        self.record_ingest(batch, 0)
    }

    /// [`put_entries`](Self::put_entries) plus the duplicate tally of the
    /// ingest that produced `batch`, committed together.
    pub fn record_ingest(&mut self, batch: &[NewEntry], duplicates: u64) -> Result<usize> {
        let tx = self.writer()?;
        let stored = insert_entries(&tx, batch)?;
        if duplicates > 0 {
            tx.execute(
                "UPDATE counters SET value = value + ?1 WHERE name = 'duplicates'",
                params![duplicates as i64],
            )?;
        }
        tx.commit()?;
        Ok(stored)
    }

    /// Upserts reference senses, returning the stored rows in input order.
    pub fn put_senses(&mut self, senses: &[NewSense]) -> Result<Vec<Sense>> {
        let tx = self.writer()?;
        let mut stored = Vec::with_capacity(senses.len());
        for sense in senses {
            stored.push(insert_sense(&tx, sense)?);
        }
        tx.commit()?;
        Ok(stored)
    }

    /// Records sense assignments, replacing earlier ones for the same entries.
    pub fn put_assignments(&mut self, assignments: &[MappingAssignment]) -> Result<usize> {
        let tx = self.writer()?;
        for a in assignments {
            insert_assignment(&tx, a)?;
        }
        tx.commit()?;
        Ok(assignments.len())
    }

    /// Starts a read transaction pinned to the latest committed state.
    pub fn snapshot(&self) -> Result<Snapshot<'_>> {
        let tx = self.conn.unchecked_transaction()?;
        // A deferred transaction only takes its read mark on first access.
        tx.query_row("SELECT value FROM counters WHERE name = 'duplicates'", [], |_| Ok(()))?;
        Ok(Snapshot { tx })
    }

    pub fn stats(&self) -> Result<StoreStats> {
        self.snapshot()?.stats()
    }

    pub fn entries_by_group(&self, group: GroupId) -> Result<Vec<TermEntry>> {
        self.snapshot()?.entries_by_group(group)
    }
}

fn insert_source(tx: &Transaction<'_>, record: &SourceRecord) -> Result<SourceId> {
    let key = text(&record.key);
    let title = text(&record.title);
    let citation = text(&record.citation);
    let languages: Vec<String> = record
        .languages
        .iter()
        .map(|l| text(l))
        .filter(|l| !l.is_empty())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let publisher = opt_text(record.publisher.as_deref());
    for (field, value) in [("key", &key), ("title", &title), ("citation", &citation)] {
        if value.is_empty() {
            return Err(StoreError::Validation {
                what: "source",
                reason: format!("{field} must not be empty"),
            });
        }
    }
    if languages.is_empty() {
        return Err(StoreError::Validation {
            what: "source",
            reason: format!("source '{key}' lists no languages"),
        });
    }
    let normalized = SourceRecord {
        key: key.clone(),
        title,
        languages,
        year: record.year,
        publisher,
        citation,
    };
    let existing = tx
        .query_row(
            &format!("SELECT {SOURCE_COLUMNS} FROM sources WHERE key = ?1"),
            params![key],
            source_from_row,
        )
        .optional()?;
    if let Some(existing) = existing {
        let existing = existing?;
        if existing.record() == normalized {
            return Ok(existing.source_id);
        }
        return Err(StoreError::Conflict(format!(
            "source '{key}' already registered with a different payload"
        )));
    }
    let languages_json = serde_json::to_string(&normalized.languages)
        .map_err(|e| StoreError::Corrupt(e.to_string()))?;
    tx.execute(
        "INSERT INTO sources (key, title, languages, year, publisher, citation)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
        params![
            normalized.key,
            normalized.title,
            languages_json,
            normalized.year,
            normalized.publisher,
            normalized.citation
        ],
    )?;
    Ok(SourceId::from_raw(tx.last_insert_rowid()))
}

fn insert_entries(tx: &Transaction<'_>, batch: &[NewEntry]) -> Result<usize> {
    let mut touched = BTreeSet::new();
    {
        let mut source_exists = tx.prepare_cached("SELECT 1 FROM sources WHERE source_id = ?1")?;
        let mut find_group = tx.prepare_cached(
            "SELECT term_group_id FROM term_groups WHERE canonical_key = ?1 AND lang = ?2",
        )?;
        let mut new_group = tx.prepare_cached(
            "INSERT INTO term_groups (canonical_key, lang, display_form, member_count)
             VALUES (?1, ?2, ?3, 0)",
        )?;
        let mut new_entry = tx.prepare_cached(
            "INSERT INTO entries (source_term, source_lang, target_term, target_lang, target_key,
                                  definition, source_id, term_group_id)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
        )?;
        for (index, entry) in batch.iter().enumerate() {
            let source_term = text(&entry.source_term);
            let target_term = text(&entry.target_term);
            let source_key = canonical_key(&source_term, entry.source_lang);
            let target_key = canonical_key(&target_term, entry.target_lang);
            if source_key.is_empty() || target_key.is_empty() {
                return Err(StoreError::Validation {
                    what: "entry",
                    reason: format!("entry #{index} has a term that is empty after normalization"),
                });
            }
            if !source_exists.exists(params![entry.source_id.raw()])? {
                return Err(StoreError::DanglingSource {
                    index,
                    source_id: entry.source_id,
                });
            }
            let lang = entry.source_lang.code();
            let group: i64 = match find_group
                .query_row(params![source_key, lang], |r| r.get(0))
                .optional()?
            {
                Some(id) => id,
                None => {
                    new_group.execute(params![source_key, lang, source_term])?;
                    tx.last_insert_rowid()
                }
            };
            touched.insert(group);
            let definition = opt_text(entry.definition.as_deref());
            match new_entry.execute(params![
                source_term,
                lang,
                target_term,
                entry.target_lang.code(),
                target_key,
                definition,
                entry.source_id.raw(),
                group
            ]) {
                Ok(_) => {}
                Err(rusqlite::Error::SqliteFailure(e, _))
                    if e.code == rusqlite::ErrorCode::ConstraintViolation =>
                {
                    return Err(StoreError::Conflict(format!(
                        "entry #{index} ('{source_term}' → '{target_term}') duplicates an attestation from the same dictionary"
                    )));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if !touched.is_empty() {
        refresh_groups(tx, &touched)?;
    }
    Ok(batch.len())
}

/// Recomputes member_count and display_form (the modal original spelling,
/// ties to the smallest string).
fn refresh_groups(tx: &Transaction<'_>, groups: &BTreeSet<i64>) -> Result<()> {
    let mut count = tx.prepare_cached("SELECT COUNT(*) FROM entries WHERE term_group_id = ?1")?;
    let mut modal = tx.prepare_cached(
        "SELECT source_term FROM entries WHERE term_group_id = ?1
         GROUP BY source_term ORDER BY COUNT(*) DESC, source_term ASC LIMIT 1",
    )?;
    let mut update = tx.prepare_cached(
        "UPDATE term_groups SET member_count = ?2, display_form = ?3 WHERE term_group_id = ?1",
    )?;
    for &group in groups {
        let members: i64 = count.query_row(params![group], |r| r.get(0))?;
        let display: String = modal.query_row(params![group], |r| r.get(0))?;
        update.execute(params![group, members, display])?;
    }
    Ok(())
}

fn insert_sense(tx: &Transaction<'_>, sense: &NewSense) -> Result<Sense> {
    let key = canonical_key(&sense.term_key, sense.lang);
    let gloss = text(&sense.gloss);
    let domain = opt_text(sense.domain_tag.as_deref());
    if key.is_empty() {
        return Err(StoreError::Validation {
            what: "sense",
            reason: format!("term '{}' is empty after normalization", sense.term_key),
        });
    }
    if gloss.is_empty() || sense.ordinal == 0 {
        return Err(StoreError::Validation {
            what: "sense",
            reason: format!("'{key}' sense {} needs a gloss and an ordinal ≥ 1", sense.ordinal),
        });
    }
    let existing = tx
        .query_row(
            &format!("SELECT {SENSE_COLUMNS} FROM senses WHERE lang = ?1 AND term_key = ?2 AND ordinal = ?3"),
            params![sense.lang.code(), key, sense.ordinal],
            sense_from_row,
        )
        .optional()?;
    if let Some(existing) = existing {
        let existing = existing?;
        if existing.gloss == gloss && existing.domain_tag == domain {
            return Ok(existing);
        }
        return Err(StoreError::Conflict(format!(
            "sense {} of '{key}' already stored with a different gloss",
            sense.ordinal
        )));
    }
    tx.execute(
        "INSERT INTO senses (lang, term_key, ordinal, gloss, domain_tag) VALUES (?1, ?2, ?3, ?4, ?5)",
        params![sense.lang.code(), key, sense.ordinal, gloss, domain],
    )?;
    Ok(Sense {
        sense_id: SenseId::from_raw(tx.last_insert_rowid()),
        lang: sense.lang,
        source_term_key: key,
        ordinal: sense.ordinal,
        gloss,
        domain_tag: domain,
    })
}

fn insert_assignment(tx: &Transaction<'_>, a: &MappingAssignment) -> Result<()> {
    if !(0.0..=1.0).contains(&a.score) {
        return Err(StoreError::Validation {
            what: "assignment",
            reason: format!("score {} for entry {} is outside [0, 1]", a.score, a.entry_id),
        });
    }
    let owner: Option<(String, String)> = tx
        .query_row(
            "SELECT g.canonical_key, g.lang FROM entries e
             JOIN term_groups g ON g.term_group_id = e.term_group_id WHERE e.entry_id = ?1",
            params![a.entry_id.raw()],
            |r| Ok((r.get(0)?, r.get(1)?)),
        )
        .optional()?;
    let Some((group_key, group_lang)) = owner else {
        return Err(StoreError::NotFound { kind: "entry", id: a.entry_id.to_string() });
    };
    let sense: Option<(String, String)> = tx
        .query_row(
            "SELECT term_key, lang FROM senses WHERE sense_id = ?1",
            params![a.sense_id.raw()],
            |r| Ok((r.get(0)?, r.get(1)?)),
        )
        .optional()?;
    let Some((sense_key, sense_lang)) = sense else {
        return Err(StoreError::NotFound { kind: "sense", id: a.sense_id.to_string() });
    };
    if sense_key != group_key || sense_lang != group_lang {
        return Err(StoreError::Validation {
            what: "assignment",
            reason: format!(
                "sense {} belongs to '{sense_key}', not to entry {}'s term '{group_key}'",
                a.sense_id, a.entry_id
            ),
        });
    }
    tx.execute(
        "INSERT INTO mappings (entry_id, sense_id, score, method, mapped_at)
         VALUES (?1, ?2, ?3, ?4, ?5)
         ON CONFLICT (entry_id) DO UPDATE SET
           sense_id = excluded.sense_id, score = excluded.score,
           method = excluded.method, mapped_at = excluded.mapped_at",
        params![
            a.entry_id.raw(),
            a.sense_id.raw(),
            a.score,
            a.method.as_str(),
            a.mapped_at.to_rfc3339()
        ],
    )?;
    Ok(())
}

const SOURCE_COLUMNS: &str = "source_id, key, title, languages, year, publisher, citation";
const GROUP_COLUMNS: &str = "term_group_id, canonical_key, display_form, lang, member_count";
const SENSE_COLUMNS: &str = "sense_id, lang, term_key, ordinal, gloss, domain_tag";
const ENTRY_COLUMNS: &str = "e.entry_id, e.source_term, e.source_lang, e.target_term, e.target_lang,
     e.definition, e.source_id, e.term_group_id, m.sense_id";
const MAPPING_COLUMNS: &str = "m.entry_id, m.sense_id, m.score, m.method, m.mapped_at";

type RowResult<T> = rusqlite::Result<Result<T>>;

fn lang_column(row: &Row<'_>, idx: usize) -> rusqlite::Result<Result<Lang>> {
    let code: String = row.get(idx)?;
    Ok(code
        .parse()
        .map_err(|_| StoreError::Corrupt(format!("unknown language code '{code}'"))))
}

fn source_from_row(row: &Row<'_>) -> RowResult<DictionarySource> {
    source_from_offset(row, 0)
}

fn group_from_row(row: &Row<'_>) -> RowResult<TermGroup> {
    let lang = match lang_column(row, 3)? {
        Ok(l) => l,
        Err(e) => return Ok(Err(e)),
    };
    Ok(Ok(TermGroup {
        term_group_id: GroupId::from_raw(row.get(0)?),
        canonical_key: row.get(1)?,
        display_form: row.get(2)?,
        lang,
        member_count: row.get::<_, i64>(4)? as u64,
    }))
}

fn sense_from_row(row: &Row<'_>) -> RowResult<Sense> {
    sense_from_offset(row, 0)
}

fn entry_from_row(row: &Row<'_>) -> RowResult<TermEntry> {
    let (source_lang, target_lang) = match (lang_column(row, 2)?, lang_column(row, 4)?) {
        (Ok(s), Ok(t)) => (s, t),
        (Err(e), _) | (_, Err(e)) => return Ok(Err(e)),
    };
    Ok(Ok(TermEntry {
        entry_id: EntryId::from_raw(row.get(0)?),
        source_term: row.get(1)?,
        source_lang,
        target_term: row.get(3)?,
        target_lang,
        definition: row.get(5)?,
        source_id: SourceId::from_raw(row.get(6)?),
        term_group_id: GroupId::from_raw(row.get(7)?),
        sense_id: row.get::<_, Option<i64>>(8)?.map(SenseId::from_raw),
    }))
}

fn mapping_from_row(row: &Row<'_>, offset: usize) -> RowResult<Option<MappingAssignment>> {
    let Some(entry) = row.get::<_, Option<i64>>(offset)? else {
        return Ok(Ok(None));
    };
    let method: String = row.get(offset + 3)?;
    let mapped_at: String = row.get(offset + 4)?;
    let Some(method) = MappingMethod::parse(&method) else {
        return Ok(Err(StoreError::Corrupt(format!("unknown mapping method '{method}'"))));
    };
    let mapped_at = match DateTime::parse_from_rfc3339(&mapped_at) {
        Ok(t) => t.with_timezone(&Utc),
        Err(e) => return Ok(Err(StoreError::Corrupt(format!("mapped_at: {e}")))),
    };
    Ok(Ok(Some(MappingAssignment {
        entry_id: EntryId::from_raw(entry),
        sense_id: SenseId::from_raw(row.get(offset + 1)?),
        score: row.get(offset + 2)?,
        method,
        mapped_at,
    })))
}

fn collect<T>(
    conn: &Connection,
    sql: &str,
    params: impl rusqlite::Params,
    map: impl FnMut(&Row<'_>) -> RowResult<T>,
) -> Result<Vec<T>> {
    let mut stmt = conn.prepare_cached(sql)?;
    let rows = stmt.query_map(params, map)?;
    let mut out = Vec::new();
    for row in rows {
        out.push(row??);
    }
    Ok(out)
}

/// A consistent read view of the store.
pub struct Snapshot<'a> {
    tx: Transaction<'a>,
}

impl Snapshot<'_> {
    pub fn stats(&self) -> Result<StoreStats> {
        let count = |sql: &str| -> Result<u64> {
            Ok(self.tx.query_row(sql, [], |r| r.get::<_, i64>(0))? as u64)
        };
        Ok(StoreStats {
            entry_count: count("SELECT COUNT(*) FROM entries")?,
            source_count: count("SELECT COUNT(*) FROM sources")?,
            group_count: count("SELECT COUNT(*) FROM term_groups")?,
            sense_count: count("SELECT COUNT(*) FROM senses")?,
            mapped_entry_count: count("SELECT COUNT(*) FROM mappings")?,
            duplicate_count: count("SELECT value FROM counters WHERE name = 'duplicates'")?,
        })
    }

    pub fn sources(&self) -> Result<Vec<DictionarySource>> {
        collect(
            &self.tx,
            &format!("SELECT {SOURCE_COLUMNS} FROM sources ORDER BY source_id"),
            [],
            source_from_row,
        )
    }

    pub fn source(&self, id: SourceId) -> Result<Option<DictionarySource>> {
        Ok(collect(
            &self.tx,
            &format!("SELECT {SOURCE_COLUMNS} FROM sources WHERE source_id = ?1"),
            params![id.raw()],
            source_from_row,
        )?
        .pop())
    }

    pub fn source_by_key(&self, key: &str) -> Result<Option<DictionarySource>> {
        Ok(collect(
            &self.tx,
            &format!("SELECT {SOURCE_COLUMNS} FROM sources WHERE key = ?1"),
            params![text(key)],
            source_from_row,
        )?
        .pop())
    }

    /// Every term group, ordered by id.
    pub fn groups(&self) -> Result<Vec<TermGroup>> {
        collect(
            &self.tx,
            &format!("SELECT {GROUP_COLUMNS} FROM term_groups ORDER BY term_group_id"),
            [],
            group_from_row,
        )
    }

    pub fn group(&self, id: GroupId) -> Result<Option<TermGroup>> {
        Ok(collect(
            &self.tx,
            &format!("SELECT {GROUP_COLUMNS} FROM term_groups WHERE term_group_id = ?1"),
            params![id.raw()],
            group_from_row,
        )?
        .pop())
    }

    pub fn group_by_key(&self, key: &str, lang: Lang) -> Result<Option<TermGroup>> {
        Ok(collect(
            &self.tx,
            &format!("SELECT {GROUP_COLUMNS} FROM term_groups WHERE canonical_key = ?1 AND lang = ?2"),
            params![key, lang.code()],
            group_from_row,
        )?
        .pop())
    }

    /// Every entry, ordered by id.
    pub fn entries(&self) -> Result<Vec<TermEntry>> {
        collect(
            &self.tx,
            &format!(
                "SELECT {ENTRY_COLUMNS} FROM entries e LEFT JOIN mappings m ON m.entry_id = e.entry_id
                 ORDER BY e.entry_id"
            ),
            [],
            entry_from_row,
        )
    }

    /// Members of a term group in entry-id order.
    pub fn entries_by_group(&self, group: GroupId) -> Result<Vec<TermEntry>> {
        if self.group(group)?.is_none() {
            return Err(StoreError::NotFound { kind: "term group", id: group.to_string() });
        }
        collect(
            &self.tx,
            &format!(
                "SELECT {ENTRY_COLUMNS} FROM entries e LEFT JOIN mappings m ON m.entry_id = e.entry_id
                 WHERE e.term_group_id = ?1 ORDER BY e.entry_id"
            ),
            params![group.raw()],
            entry_from_row,
        )
    }

    /// Entries without a sense assignment and with id greater than `after`.
    pub fn unmapped_entries(&self, after: Option<EntryId>, limit: usize) -> Result<Vec<TermEntry>> {
        collect(
            &self.tx,
            &format!(
                "SELECT {ENTRY_COLUMNS} FROM entries e LEFT JOIN mappings m ON m.entry_id = e.entry_id
                 WHERE m.entry_id IS NULL AND e.entry_id > ?1 ORDER BY e.entry_id LIMIT ?2"
            ),
            params![after.map_or(0, |id| id.raw()), limit as i64],
            entry_from_row,
        )
    }

    pub fn senses(&self) -> Result<Vec<Sense>> {
        collect(
            &self.tx,
            &format!("SELECT {SENSE_COLUMNS} FROM senses ORDER BY sense_id"),
            [],
            sense_from_row,
        )
    }

    /// Senses of one term key, by ordinal.
    pub fn senses_for(&self, lang: Lang, term_key: &str) -> Result<Vec<Sense>> {
        collect(
            &self.tx,
            &format!(
                "SELECT {SENSE_COLUMNS} FROM senses WHERE lang = ?1 AND term_key = ?2 ORDER BY ordinal"
            ),
            params![lang.code(), term_key],
            sense_from_row,
        )
    }

    pub fn assignments(&self) -> Result<Vec<MappingAssignment>> {
        let rows = collect(
            &self.tx,
            &format!("SELECT {MAPPING_COLUMNS} FROM mappings m ORDER BY m.entry_id"),
            [],
            |row| mapping_from_row(row, 0),
        )?;
        Ok(rows.into_iter().flatten().collect())
    }

    /// Members of a group joined with their source, sense and mapping rows.
    pub fn attestations(&self, group: GroupId) -> Result<Vec<Attestation>> {
        if self.group(group)?.is_none() {
            return Err(StoreError::NotFound { kind: "term group", id: group.to_string() });
        }
        let sql = format!(
            "SELECT {ENTRY_COLUMNS},
                    s.source_id, s.key, s.title, s.languages, s.year, s.publisher, s.citation,
                    n.sense_id, n.lang, n.term_key, n.ordinal, n.gloss, n.domain_tag,
                    {MAPPING_COLUMNS}
             FROM entries e
             JOIN sources s ON s.source_id = e.source_id
             LEFT JOIN mappings m ON m.entry_id = e.entry_id
             LEFT JOIN senses n ON n.sense_id = m.sense_id
             WHERE e.term_group_id = ?1
             ORDER BY e.entry_id"
        );
        collect(&self.tx, &sql, params![group.raw()], |row| {
            let entry = match entry_from_row(row)? {
                Ok(e) => e,
                Err(e) => return Ok(Err(e)),
            };
            let source = match source_from_offset(row, 9)? {
                Ok(s) => s,
                Err(e) => return Ok(Err(e)),
            };
            let sense = if row.get::<_, Option<i64>>(16)?.is_some() {
                match sense_from_offset(row, 16)? {
                    Ok(s) => Some(s),
                    Err(e) => return Ok(Err(e)),
                }
            } else {
                None
            };
            let mapping = match mapping_from_row(row, 22)? {
                Ok(m) => m,
                Err(e) => return Ok(Err(e)),
            };
            Ok(Ok(Attestation { entry, source, sense, mapping }))
        })
    }

    /// True when the dictionary already attests this (term, equivalent) pair.
    pub fn has_attestation(
        &self,
        source_key: &str,
        lang: Lang,
        target_key: &str,
        source: SourceId,
    ) -> Result<bool> {
        let mut stmt = self.tx.prepare_cached(
            "SELECT 1 FROM entries e JOIN term_groups g ON g.term_group_id = e.term_group_id
             WHERE g.canonical_key = ?1 AND g.lang = ?2 AND e.target_key = ?3 AND e.source_id = ?4",
        )?;
        Ok(stmt.exists(params![source_key, lang.code(), target_key, source.raw()])?)
    }

    /// Digest of the term-group table; the search index is a pure function
    /// of it.
    pub fn snapshot_hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(format!("schema:{SCHEMA_VERSION}\n"));
        for group in self.groups()? {
            hasher.update(format!(
                "{}\t{}\t{}\t{}\t{}\n",
                group.term_group_id, group.lang, group.canonical_key, group.display_form, group.member_count
            ));
        }
        Ok(hex::encode(hasher.finalize()))
    }

    /// Full-scan check of referential integrity and derived columns.
    /// Returns one message per violation.
    pub fn integrity_violations(&self) -> Result<Vec<String>> {
        let mut problems = Vec::new();
        let checks = [
            ("entries with unknown source",
             "SELECT COUNT(*) FROM entries e LEFT JOIN sources s ON s.source_id = e.source_id WHERE s.source_id IS NULL"),
            ("entries with unknown group",
             "SELECT COUNT(*) FROM entries e LEFT JOIN term_groups g ON g.term_group_id = e.term_group_id WHERE g.term_group_id IS NULL"),
            ("mappings with unknown sense",
             "SELECT COUNT(*) FROM mappings m LEFT JOIN senses n ON n.sense_id = m.sense_id WHERE n.sense_id IS NULL"),
            ("groups with stale member_count",
             "SELECT COUNT(*) FROM term_groups g WHERE g.member_count != (SELECT COUNT(*) FROM entries e WHERE e.term_group_id = g.term_group_id)"),
        ];
        for (label, sql) in checks {
            let n: i64 = self.tx.query_row(sql, [], |r| r.get(0))?;
            if n > 0 {
                problems.push(format!("{n} {label}"));
            }
        }
        for group in self.groups()? {
            if canonical_key(&group.canonical_key, group.lang) != group.canonical_key {
                problems.push(format!("group {} key is not canonical", group.term_group_id));
            }
        }
        for entry in self.entries()? {
            let group = self.group(entry.term_group_id)?;
            if let Some(group) = group {
                if canonical_key(&entry.source_term, entry.source_lang) != group.canonical_key
                    || entry.source_lang != group.lang
                {
                    problems.push(format!("entry {} sits in the wrong group", entry.entry_id));
                }
            }
        }
        Ok(problems)
    }
}

fn source_from_offset(row: &Row<'_>, offset: usize) -> RowResult<DictionarySource> {
    let languages: String = row.get(offset + 3)?;
    let languages = match serde_json::from_str(&languages) {
        Ok(l) => l,
        Err(e) => return Ok(Err(StoreError::Corrupt(format!("source languages: {e}")))),
    };
    Ok(Ok(DictionarySource {
        source_id: SourceId::from_raw(row.get(offset)?),
        key: row.get(offset + 1)?,
        title: row.get(offset + 2)?,
        languages,
        year: row.get(offset + 4)?,
        publisher: row.get(offset + 5)?,
        citation: row.get(offset + 6)?,
    }))
}

fn sense_from_offset(row: &Row<'_>, offset: usize) -> RowResult<Sense> {
    let lang = match lang_column(row, offset + 1)? {
        Ok(l) => l,
        Err(e) => return Ok(Err(e)),
    };
    Ok(Ok(Sense {
        sense_id: SenseId::from_raw(row.get(offset)?),
        lang,
        source_term_key: row.get(offset + 2)?,
        ordinal: row.get(offset + 3)?,
        gloss: row.get(offset + 4)?,
        domain_tag: row.get(offset + 5)?,
    }))
}
