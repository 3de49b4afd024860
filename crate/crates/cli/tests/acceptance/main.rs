//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod oracle;

use std::io::{BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use termbase::ingest::{self, CorpusFormat};
use termbase::normalize::{canonical_key, normalize, profile};
use termbase::query::{QueryEngine, QueryOptions, QueryResult};
use termbase::search::{Index, MatchKind, SearchConfig, SearchError};
use termbase::senses::{load_sense_inventory, map_all, LexicalBackend};
use termbase::{Lang, Store};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn reader(path: &Path) -> BufReader<std::fs::File> {
    BufReader::new(std::fs::File::open(path).unwrap())
}

fn adsorption_store(store: &mut Store) {
    let dir = fixtures().join("adsorption");
    ingest::register_manifest(store, reader(&dir.join("manifest.json"))).unwrap();
    ingest::ingest(store, reader(&dir.join("corpus.jsonl")), CorpusFormat::Jsonl).unwrap();
    let inventory = load_sense_inventory(reader(&dir.join("senses.jsonl"))).unwrap();
    map_all(store, &inventory, &LexicalBackend::new(), 16).unwrap();
}

fn adsorption() -> Outcome {
    let started = Instant::now();
    let mut store = Store::in_memory().unwrap();
    adsorption_store(&mut store);
    let engine = QueryEngine::from_store(&store, SearchConfig::default()).unwrap();
    let r = engine.query(&store, "adsorption", Lang::En, &QueryOptions::default()).unwrap();
    let elapsed = started.elapsed();

    let keys: Vec<&str> = r.candidates.iter().map(|c| c.canonical_key.as_str()).collect();
    for expected in ["adsorption", "carbon adsorption", "adsorption drying", "adsorption medium"] {
        ensure!(keys.contains(&expected), "candidate {expected} missing from {keys:?}");
    }
    ensure!(r.candidates[0].match_kind == MatchKind::Exact, "first candidate is not the exact match");
    let senses: Vec<(&str, u64)> = r.senses.iter().map(|b| (b.label.as_str(), b.instance_count)).collect();
    ensure!(senses == [("physics", 15), ("chemistry", 7), ("other", 3)], "sense counts {senses:?}");
    let physics: Vec<(&str, u64)> = r.senses[0].equivalents.iter().map(|e| (e.normalized_form.as_str(), e.count)).collect();
    ensure!(physics == [("امتزاز", 12), ("انمصاص", 2), ("تكثيف", 1)], "physics equivalents {physics:?}");
    ensure!(r.recommendation.as_deref() == Some("امتزاز"), "recommendation {:?}", r.recommendation);
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("15/7/3, 12/2/1, امتزاز in {} ms", elapsed.as_millis()))
}

fn search_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EA7C4);
    let mut checked = 0;
    let mut groups_total = 0;
    for store in 0..200 {
        let groups = gen::random_groups(&mut rng);
        groups_total += groups.len();
        let index = Index::build(groups.clone(), format!("random-{store}"));
        let ratio = [0.25, 0.25, 0.1, 0.5, 1.0][store % 5];
        let config = SearchConfig { fuzzy_threshold_ratio: ratio };
        for _ in 0..50 {
            let (query, lang) = gen::random_query(&mut rng, &groups);
            let limit = if rng.gen_bool(0.3) { 10_000 } else { rng.gen_range(1..=25) };
            let got = index.lookup_with(&query, lang, limit, &config);
            let want = oracle::lookup(&groups, &query, lang, limit, ratio);
            match (got, want) {
                (Ok(got), Ok(want)) => ensure!(got == want, "store {store} query {query:?} [{lang}] limit {limit}:\n got {got:?}\nwant {want:?}"),
                (Err(SearchError::InvalidQuery(_)), Err(oracle::RefError::InvalidQuery)) => {}
                (got, want) => return Err(format!("store {store} query {query:?}: got {got:?}, want {want:?}")),
            }
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{checked} queries over 200 stores ({groups_total} groups) in {:.1} s", elapsed.as_secs_f64()))
}

const STRIP_SET: &[char] = &[
    '\u{064B}', '\u{064C}', '\u{064D}', '\u{064E}', '\u{064F}', '\u{0650}', '\u{0651}', '\u{0652}', '\u{0670}', '\u{0640}',
];

fn text_strategy() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        5 => proptest::char::range('\u{0621}', '\u{064A}'),
        3 => proptest::sample::select(STRIP_SET.to_vec()),
        1 => proptest::sample::select(vec!['\u{0653}', '\u{0654}', '\u{0655}', ' ', '\t', '،', '؟', '(', ')', '-']),
        2 => proptest::char::range('a', 'z'),
        1 => proptest::char::range('\u{00C0}', '\u{017F}'),
        1 => any::<char>(),
    ];
    proptest::collection::vec(piece, 0..32).prop_map(|cs| cs.into_iter().collect())
}

fn normalization_properties() -> Outcome {
    const CASES: u32 = 10_000;
    let run = |name: &str, test: &dyn Fn(String, Vec<(usize, usize)>) -> Result<(), TestCaseError>| {
        let mut runner = TestRunner::new(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() });
        let input = (text_strategy(), proptest::collection::vec((any::<usize>(), any::<usize>()), 1..6));
        runner.run(&input, |(text, inserts)| test(text, inserts)).map_err(|e| format!("{name}: {e}"))
    };
    run("idempotence", &|text, _| {
        for lang in Lang::ALL {
            let once = normalize(&text, profile(lang));
            prop_assert_eq!(normalize(&once, profile(lang)), once);
        }
        Ok(())
    })?;
    run("strip-set completeness", &|text, _| {
        let out = normalize(&text, profile(Lang::Ar));
        prop_assert!(!out.chars().any(|c| STRIP_SET.contains(&c)), "{:?}", out);
        Ok(())
    })?;
    run("diacritic-insertion invariance", &|text, inserts| {
        let mut chars: Vec<char> = text.chars().collect();
        for (at, which) in inserts {
            let at = at % (chars.len() + 1);
            chars.insert(at, STRIP_SET[which % STRIP_SET.len()]);
        }
        let decorated: String = chars.into_iter().collect();
        for lang in Lang::ALL {
            prop_assert_eq!(canonical_key(&decorated, lang), canonical_key(&text, lang));
        }
        Ok(())
    })?;
    Ok(format!("3 properties x {CASES} cases, 0 failures"))
}

fn duplicate_accounting() -> Outcome {
    let dir = fixtures().join("duplicates");
    let mut store = Store::in_memory().unwrap();
    ingest::register_manifest(&mut store, reader(&dir.join("manifest.json"))).unwrap();
    let report = ingest::ingest(&mut store, reader(&dir.join("corpus.tsv")), CorpusFormat::Tsv).unwrap();
    let ratio = report.duplicate_count as f64 / report.read_count as f64;
    ensure!(ratio == 0.20, "ratio {ratio} ({}/{})", report.duplicate_count, report.read_count);
    Ok(format!("{}/{} = {ratio:.2}", report.duplicate_count, report.read_count))
}

fn tables(store: &Store) -> oracle::Tables {
    let snapshot = store.snapshot().unwrap();
    oracle::Tables {
        entries: snapshot.entries().unwrap(),
        sources: snapshot.sources().unwrap(),
        senses: snapshot.senses().unwrap(),
    }
}

fn pipeline_reference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0_7E);
    let mut compared = 0;
    for n in 0..50 {
        let mut store = Store::in_memory().unwrap();
        gen::random_store(&mut rng, &mut store);
        let tables = tables(&store);
        let stored_groups = store.snapshot().unwrap().groups().unwrap();
        ensure!(oracle::groups(&tables.entries) == stored_groups, "store {n}: groups differ from a rescan of the entries");
        let engine = QueryEngine::from_store(&store, SearchConfig::default()).unwrap();
        for _ in 0..20 {
            let (query, lang) = gen::pipeline_query(&mut rng);
            let options = QueryOptions { limit: rng.gen_range(1..=12), include_candidates: rng.gen_bool(0.8) };
            let want = oracle::query(&tables, &query, lang, options.limit, options.include_candidates, 0.25);
            match (engine.query(&store, &query, lang, &options), want) {
                (Ok(mut got), Ok(want)) => {
                    got.timing_ms = 0;
                    ensure!(got == want, "store {n} query {query:?}:\n got {got:?}\nwant {want:?}");
                }
                (Err(_), Err(oracle::RefError::InvalidQuery)) => {}
                (got, want) => return Err(format!("store {n} query {query:?}: got {got:?}, want {want:?}")),
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} queries over 50 stores match field for field"))
}

fn conservation() -> Outcome {
    let mut results: Vec<QueryResult> = Vec::new();
    let mut store = Store::in_memory().unwrap();
    adsorption_store(&mut store);
    let engine = QueryEngine::from_store(&store, SearchConfig::default()).unwrap();
    for q in ["adsorption", "carbon adsorption", "adsorption drying", "adsorption medium", "absorption", "adsorbtion", "carbon"] {
        results.push(engine.query(&store, q, Lang::En, &QueryOptions::default()).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0_5E);
    for _ in 0..50 {
        let mut store = Store::in_memory().unwrap();
        gen::random_store(&mut rng, &mut store);
        let engine = QueryEngine::from_store(&store, SearchConfig::default()).unwrap();
        for _ in 0..20 {
            let (query, lang) = gen::pipeline_query(&mut rng);
            if let Ok(r) = engine.query(&store, &query, lang, &QueryOptions::default()) {
                results.push(r);
            }
        }
    }
    let violations: Vec<String> = results.iter().flat_map(oracle::violations).collect();
    ensure!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    Ok(format!("{} results, 0 violations", results.len()))
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn http_get(addr: &str, path: &str) -> std::io::Result<(u16, String)> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n")?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw)?;
    let raw = String::from_utf8(raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let (head, body) = raw.split_once("\r\n\r\n").unwrap_or((&raw, ""));
    let status = head.split(' ').nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    Ok((status, body.to_string()))
}

/// The body with its `timing_ms` field cut out, leaving every other byte.
fn strip_timing(json: &str) -> String {
    let start = json.find(",\"timing_ms\":").unwrap();
    let end = start + 1 + json[start + 1..].find([',', '}']).unwrap();
    format!("{}{}", &json[..start], &json[end..])
}

fn api_cli_parity() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_termbase");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("terms.db");
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A_71);
    {
        let mut store = Store::open(&path).unwrap();
        adsorption_store(&mut store);
        gen::random_store(&mut rng, &mut store);
    }
    let built = Command::new(bin).arg("--store").arg(&path).arg("build-index").env("RUST_LOG", "error").output().unwrap();
    ensure!(built.status.success(), "build-index failed: {}", String::from_utf8_lossy(&built.stderr));

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let _server = Server(
        Command::new(bin)
            .arg("--store")
            .arg(&path)
            .args(["serve", "--listen", &addr])
            .env("RUST_LOG", "error")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(20);
    while !matches!(http_get(&addr, "/healthz"), Ok((200, _))) {
        ensure!(Instant::now() < deadline, "service did not come up on {addr}");
        std::thread::sleep(Duration::from_millis(50));
    }

    let mut terms: Vec<(String, Lang)> = ["adsorption", "carbon adsorption", "adsorbtion", "absorption", "Adsorption"]
        .iter()
        .map(|t| (t.to_string(), Lang::En))
        .collect();
    while terms.len() < 100 {
        terms.push(gen::pipeline_query(&mut rng));
    }
    let mut identical = 0;
    for (i, (term, lang)) in terms.iter().enumerate() {
        let limit = 1 + i % 12;
        let cli = Command::new(bin)
            .arg("--store")
            .arg(&path)
            .args(["query", term, "--lang", lang.code(), "--limit", &limit.to_string(), "--json"])
            .env("RUST_LOG", "error")
            .output()
            .unwrap();
        let uri = format!(
            "/api/v1/search?q={}&lang={}&limit={limit}",
            utf8_percent_encode(term, NON_ALPHANUMERIC),
            lang.code()
        );
        let (status, body) = http_get(&addr, &uri).map_err(|e| format!("{uri}: {e}"))?;
        if cli.status.success() {
            ensure!(status == 200, "{uri} gave {status} but the CLI succeeded");
            let cli_out = String::from_utf8(cli.stdout).unwrap();
            let cli_json = cli_out.strip_suffix('\n').unwrap_or(&cli_out);
            ensure!(strip_timing(cli_json) == strip_timing(&body), "{term:?}: CLI and HTTP bodies differ");
        } else {
            let stderr = String::from_utf8(cli.stderr).unwrap();
            let cli_err = stderr.lines().last().unwrap_or_default();
            ensure!(status == 400 && cli_err == body, "{term:?}: CLI error {cli_err} vs HTTP {status} {body}");
        }
        identical += 1;
    }
    Ok(format!("{identical}/100 queries byte-identical"))
}

fn latency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x100_000);
    let mut store = Store::in_memory().unwrap();
    let dictionaries = 40;
    for record in gen::dictionaries(dictionaries) {
        store.put_source(&record).unwrap();
    }
    let syllables = ["ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa", "qui", "dor", "fen", "gal", "hus", "jor"];
    let targets = ["حرارة", "فيض", "تدفق", "كتلة", "ميزان", "مقياس", "سلم", "امتزاز", "طاقة", "ضغط", "كثافة", "قوة"];
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.gen_range(2..=4)).map(|_| syllables[rng.gen_range(0..syllables.len())]).collect()
    };
    let mut terms: Vec<String> = (0..25_000)
        .map(|_| if rng.gen_bool(0.3) { format!("{} {}", word(&mut rng), word(&mut rng)) } else { word(&mut rng) })
        .collect();
    terms.sort();
    terms.dedup();

    let started = Instant::now();
    let mut corpus = String::new();
    let mut lines = 0;
    while lines < 100_000 {
        let term = &terms[rng.gen_range(0..terms.len())];
        let target = targets[rng.gen_range(0..targets.len())];
        let suffix = rng.gen_range(0..3);
        let target = if suffix == 0 { target.to_string() } else { format!("{target} {}", targets[rng.gen_range(0..targets.len())]) };
        let line = serde_json::json!({
            "source_term": term,
            "target_term": target,
            "dictionary": format!("R{:02}", rng.gen_range(1..=dictionaries)),
            "lang": "en",
        });
        corpus.push_str(&line.to_string());
        corpus.push('\n');
        lines += 1;
    }
    let report = ingest::ingest(&mut store, corpus.as_bytes(), CorpusFormat::Jsonl).unwrap();
    let stats = store.stats().unwrap();
    let engine = QueryEngine::from_store(&store, SearchConfig::default()).unwrap();
    let setup = started.elapsed();

    let mut samples = Vec::new();
    for i in 0..200 {
        let mut query = terms[rng.gen_range(0..terms.len())].clone();
        if i % 2 == 1 {
            let mut chars: Vec<char> = query.chars().collect();
            let at = rng.gen_range(0..chars.len());
            chars[at] = 'x';
            query = chars.into_iter().collect();
        }
        let t = Instant::now();
        engine.query(&store, &query, Lang::En, &QueryOptions::default()).unwrap();
        samples.push(t.elapsed());
    }
    samples.sort();
    let median = samples[samples.len() / 2];
    ensure!(stats.entry_count >= 95_000, "only {} entries stored", stats.entry_count);
    ensure!(median < Duration::from_millis(100), "median {median:?}");
    Ok(format!(
        "median {:.2} ms, p95 {:.2} ms over {} entries / {} groups ({} duplicates dropped, setup {:.1} s)",
        median.as_secs_f64() * 1e3,
        samples[samples.len() * 95 / 100].as_secs_f64() * 1e3,
        stats.entry_count,
        stats.group_count,
        report.duplicate_count,
        setup.as_secs_f64()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("adsorption reproduction", adsorption),
        ("search oracle equivalence", search_oracle),
        ("normalization properties", normalization_properties),
        ("duplicate accounting", duplicate_accounting),
        ("pipeline reference equivalence", pipeline_reference),
        ("conservation invariants", conservation),
        ("API/CLI parity", api_cli_parity),
        ("query latency", latency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {name}", n + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("{label}: PASS ({detail})"),
            Err(reason) => {
                failed += 1;
                println!("{label}: FAIL ({reason})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
