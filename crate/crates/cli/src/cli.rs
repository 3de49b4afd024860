use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use termbase::ingest::{self, CorpusFormat};
use termbase::search::Index;
use termbase::senses::{self, AssignmentSet, LexicalBackend, LlmBackend, MapperBackend};
use termbase::Store;

use crate::config::ServiceConfig;
use crate::error::{code, AppError};
use crate::service::{index_path, QueryService};
use crate::{export, render, server};

#[derive(Debug, Parser)]
#[command(name = "termbase", version, about = "Multilingual term base: ingest dictionaries, map senses, look up standard equivalents")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store file; overrides `store_path` from the configuration.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Lexical,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Tsv,
}

impl From<Format> for CorpusFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => CorpusFormat::Jsonl,
            Format::Tsv => CorpusFormat::Tsv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load dictionary corpora into the store.
    Ingest {
        /// Corpus format; inferred from each file's extension when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// JSON array of dictionary sources, registered before the corpora.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Corpus files (.jsonl or .tsv).
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build the lookup index and cache it beside the store.
    BuildIndex {
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Map unmapped entries onto a reference sense inventory.
    MapSenses {
        /// Sense inventory, JSON lines of {term, ordinal, gloss, domain}.
        #[arg(long)]
        inventory: PathBuf,
        /// Scoring backend.
        #[arg(long, value_enum, default_value_t = Backend::Lexical)]
        backend: Backend,
        /// Entries fetched and scored per round.
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score sense assignments against a gold file.
    Eval {
        /// Gold file, JSON lines of {entry_id, sense_id}.
        #[arg(long)]
        gold: PathBuf,
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Look up a term and print the staged result.
    Query {
        /// Source-language term.
        term: String,
        /// Source language (en or fr).
        #[arg(long, default_value = "en")]
        lang: String,
        /// Maximum candidates; defaults to min(10, max_results).
        #[arg(long)]
        limit: Option<String>,
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Every entry of one term group.
    Term {
        /// Term group id.
        id: String,
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write the store as a JSON-lines corpus plus a source manifest.
    Export {
        /// Corpus output path; the manifest is written beside it.
        #[arg(long)]
        out: PathBuf,
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Entry, group, source and mapping counts.
    Stats {
        /// Print machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP query service.
    Serve {
        /// Overrides `listen_address`.
        #[arg(long)]
        listen: Option<String>,
    },
}

impl Cli {
    pub fn resolve_config(&self) -> Result<ServiceConfig, AppError> {
        let mut config = match &self.config {
            Some(path) => ServiceConfig::load(path)?,
            None => ServiceConfig::default(),
        };
        if let Some(store) = &self.store {
            config.store_path = store.clone();
        }
        if let Command::Serve { listen: Some(addr) } = &self.command {
            config.listen_address = addr.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn open_file(path: &Path) -> Result<BufReader<File>, AppError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::new(code::INPUT, format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, human: impl FnOnce(&T) -> String) -> Result<(), AppError> {
    if json {
        writeln!(out, "{}", serde_json::to_string(value).map_err(std::io::Error::from)?)?;
    } else {
        write!(out, "{}", human(value))?;
    }
    Ok(())
}

fn infer_format(path: &Path) -> Result<CorpusFormat, AppError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    match ext {
        "jsonl" | "ndjson" => Ok(CorpusFormat::Jsonl),
        "tsv" => Ok(CorpusFormat::Tsv),
        _ => Err(AppError::new(
            code::INPUT,
            format!("cannot infer the format of {}; pass --format", path.display()),
        )),
    }
}

#[derive(Serialize)]
struct FileReport<'a> {
    path: &'a Path,
    #[serde(flatten)]
    report: ingest::IngestReport,
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let config = cli.resolve_config()?;
    match &cli.command {
        Command::Ingest { format, manifest, paths, json } => {
            let mut store = Store::open(&config.store_path)?;
            if let Some(manifest) = manifest {
                ingest::register_manifest(&mut store, open_file(manifest)?)?;
            }
            let mut reports = Vec::new();
            for path in paths {
                let format = match format {
                    Some(f) => (*f).into(),
                    None => infer_format(path)?,
                };
                let report = ingest::ingest(&mut store, open_file(path)?, format)?;
                reports.push(FileReport { path, report });
            }
            emit(out, *json, &reports, |reports| {
                reports
                    .iter()
                    .map(|r| format!("{}: {}", r.path.display(), render::ingest(&r.report)))
                    .collect()
            })
        }
        Command::BuildIndex { json } => {
            let store = Store::open_read_only(&config.store_path)?;
            let index = Index::from_snapshot(&store.snapshot()?)?;
            let path = index_path(&config.store_path);
            index.save(&path)?;
            let summary = json!({
                "index": path,
                "groups": index.group_count(),
                "snapshot": index.snapshot_hash(),
            });
            emit(out, *json, &summary, |_| {
                format!("indexed {} groups into {}\n", index.group_count(), path.display())
            })
        }
        Command::MapSenses { inventory, backend, batch_size, json } => {
            let inventory = senses::load_sense_inventory(open_file(inventory)?)?;
            let backend: Box<dyn MapperBackend> = match backend {
                Backend::Lexical => Box::new(LexicalBackend::new()),
                Backend::Llm => Box::new(LlmBackend::from_env(config.llm.clone())?),
            };
            let mut store = Store::open(&config.store_path)?;
            let report = senses::map_all(&mut store, &inventory, backend.as_ref(), *batch_size)?;
            emit(out, *json, &report, render::mapping)
        }
        Command::Eval { gold, json } => {
            let store = Store::open_read_only(&config.store_path)?;
            let assignments = AssignmentSet::from_snapshot(&store.snapshot()?)?;
            let report = senses::evaluate_mapping(open_file(gold)?, &assignments)?;
            emit(out, *json, &report, render::eval)
        }
        Command::Query { term, lang, limit, json } => {
            let service = QueryService::open(&config)?;
            let result = service.search(Some(term), Some(lang), limit.as_deref())?;
            if *json {
                writeln!(out, "{}", result.to_json())?;
            } else {
                write!(out, "{}", render::query(&result))?;
            }
            Ok(())
        }
        Command::Term { id, json } => {
            let detail = QueryService::open(&config)?.term(id)?;
            if *json {
                writeln!(out, "{}", detail.to_json())?;
            } else {
                write!(out, "{}", render::term_detail(&detail))?;
            }
            Ok(())
        }
        Command::Export { out: path, json } => {
            let store = Store::open_read_only(&config.store_path)?;
            let report = export::export(&store, path)?;
            emit(out, *json, &report, |r| {
                format!("exported {} entries to {} and {} sources to {}\n", r.entries, r.corpus.display(), r.sources, r.manifest.display())
            })
        }
        Command::Stats { json } => {
            let store = Store::open_read_only(&config.store_path)?;
            emit(out, *json, &store.stats()?, render::stats)
        }
        Command::Serve { .. } => server::serve(&config),
    }
}
