#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use termbase::ingest::{self, CorpusFormat};
use termbase::senses::{load_sense_inventory, map_all, LexicalBackend};
use termbase::Store;
use termbase_cli::ServiceConfig;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn open(path: &Path) -> BufReader<File> {
    BufReader::new(File::open(path).unwrap())
}

/// Ingests and maps the adsorption fixture into `dir/terms.db`.
pub fn adsorption_store(dir: &Path) -> ServiceConfig {
    let path = dir.join("terms.db");
    let fixtures = fixture_dir("adsorption");
    let mut store = Store::open(&path).unwrap();
    ingest::register_manifest(&mut store, open(&fixtures.join("manifest.json"))).unwrap();
    ingest::ingest(&mut store, open(&fixtures.join("corpus.jsonl")), CorpusFormat::Jsonl).unwrap();
    let inventory = load_sense_inventory(open(&fixtures.join("senses.jsonl"))).unwrap();
    map_all(&mut store, &inventory, &LexicalBackend::new(), 16).unwrap();
    ServiceConfig { store_path: path, ..ServiceConfig::default() }
}

/// Drops the `"timing_ms":N` field from a serialized query result.
pub fn without_timing(json: &str) -> String {
    let start = json.find(",\"timing_ms\":").expect("timing field");
    let rest = &json[start + 1..];
    let end = rest.find([',', '}']).unwrap();
    format!("{}{}", &json[..start], &rest[end..])
}
