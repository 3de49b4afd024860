//! Read-side operations shared by the command line and the HTTP API, so
//! both validate and render requests the same way.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use termbase::lexicon::StoreStats;
use termbase::query::{QueryEngine, QueryOptions, QueryResult, TermDetail};
use termbase::search::Index;
use termbase::{GroupId, Lang, Store};

use crate::config::ServiceConfig;
use crate::error::{code, AppError};

/// `terms.db` caches its index in `terms.db.index`.
pub fn index_path(store_path: &Path) -> PathBuf {
    let mut name = store_path.as_os_str().to_owned();
    name.push(".index");
    PathBuf::from(name)
}

/// Loads the cached index when it matches the store, else builds one.
pub fn load_index(store: &Store, store_path: &Path) -> Result<(Index, bool), AppError> {
    let snapshot = store.snapshot()?;
    let hash = snapshot.snapshot_hash()?;
    if let Some(index) = Index::load_cached(&index_path(store_path), &hash) {
        return Ok((index, true));
    }
    Ok((Index::build(snapshot.groups()?, hash), false))
}

/// Read-only connections handed out one request at a time.
#[derive(Debug)]
pub struct ReaderPool {
    path: PathBuf,
    idle: Mutex<Vec<Store>>,
}

impl ReaderPool {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), idle: Mutex::new(Vec::new()) }
    }

    pub fn with<T>(&self, f: impl FnOnce(&Store) -> Result<T, AppError>) -> Result<T, AppError> {
        let pooled = self.idle.lock().expect("reader pool poisoned").pop();
        let store = match pooled {
            Some(store) => store,
            None => Store::open_read_only(&self.path)?,
        };
        let result = f(&store);
        self.idle.lock().expect("reader pool poisoned").push(store);
        result
    }
}

#[derive(Debug)]
struct Inner {
    engine: QueryEngine,
    readers: ReaderPool,
    max_results: usize,
    default_limit: usize,
}

/// Cheap to clone; all clones share one index and one reader pool.
#[derive(Debug, Clone)]
pub struct QueryService {
    inner: Arc<Inner>,
}

impl QueryService {
    pub fn open(config: &ServiceConfig) -> Result<Self, AppError> {
        let store = Store::open_read_only(&config.store_path)?;
        let (index, _) = load_index(&store, &config.store_path)?;
        let readers = ReaderPool::new(&config.store_path);
        readers.idle.lock().expect("reader pool poisoned").push(store);
        Ok(Self {
            inner: Arc::new(Inner {
                engine: QueryEngine::new(Arc::new(index), config.search()),
                readers,
                max_results: config.max_results,
                default_limit: config.default_limit(),
            }),
        })
    }

    pub fn search(&self, term: Option<&str>, lang: Option<&str>, limit: Option<&str>) -> Result<QueryResult, AppError> {
        let term = term.ok_or_else(|| AppError::new(code::INVALID_QUERY, "missing query parameter 'q'"))?;
        let lang = parse_query_lang(lang.unwrap_or("en"))?;
        let limit = match limit {
            None => self.inner.default_limit,
            Some(raw) => parse_limit(raw, self.inner.max_results)?,
        };
        let options = QueryOptions { limit, include_candidates: true };
        self.inner
            .readers
            .with(|store| Ok(self.inner.engine.query(store, term, lang, &options)?))
    }

    pub fn term(&self, id: &str) -> Result<TermDetail, AppError> {
        let id: GroupId = id
            .parse()
            .map_err(|_| AppError::new(code::NOT_FOUND, format!("term group {id} does not exist")))?;
        self.inner.readers.with(|store| Ok(self.inner.engine.term_detail(store, id)?))
    }

    pub fn stats(&self) -> Result<StoreStats, AppError> {
        self.inner.readers.with(|store| Ok(store.stats()?))
    }
}

/// Queries are about source terms, so only source languages are accepted.
pub fn parse_query_lang(raw: &str) -> Result<Lang, AppError> {
    match raw.parse::<Lang>()? {
        Lang::Ar => Err(AppError::new(
            code::UNSUPPORTED_LANG,
            "queries take a source language (en or fr); Arabic is the target language",
        )),
        lang => Ok(lang),
    }
}

pub fn parse_limit(raw: &str, max_results: usize) -> Result<usize, AppError> {
    match raw.trim().parse::<usize>() {
        Ok(n) if (1..=max_results).contains(&n) => Ok(n),
        _ => Err(AppError::new(
            code::INVALID_LIMIT,
            format!("limit must be an integer between 1 and {max_results}, got '{raw}'"),
        )),
    }
}
