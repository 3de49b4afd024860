//! Straight-line reference implementations. Nothing here calls into the
//! engine's search or query code; only the normalization functions and the
//! public data types are shared.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use termbase::lexicon::{DictionarySource, Sense, TermEntry, TermGroup};
use termbase::normalize::canonical_key;
use termbase::query::{Citation, EquivalentGroup, QueryResult, SenseBucket};
use termbase::search::{Candidate, MatchKind};
use termbase::{Lang, SenseId};

/// Full-matrix edit distance over code points.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let substitution = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = substitution.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefError {
    InvalidQuery,
    InvalidLimit,
}

fn contains_run(key: &str, query: &str) -> bool {
    let key: Vec<&str> = key.split(' ').collect();
    let query: Vec<&str> = query.split(' ').collect();
    if query.len() > key.len() {
        return false;
    }
    (0..=key.len() - query.len()).any(|start| key[start..start + query.len()] == query[..])
}

/// Linear scan over every group: exact, then whole-token containment, then
/// fuzzy within `max(1, ceil(ratio * |query|))` edits.
pub fn lookup(groups: &[TermGroup], query: &str, lang: Lang, limit: usize, ratio: f64) -> Result<Vec<Candidate>, RefError> {
    if limit == 0 {
        return Err(RefError::InvalidLimit);
    }
    let key = canonical_key(query, lang);
    if key.is_empty() {
        return Err(RefError::InvalidQuery);
    }
    let threshold = ((ratio * key.chars().count() as f64).ceil() as usize).max(1);
    let candidate = |g: &TermGroup, kind: MatchKind| Candidate {
        term_group_id: g.term_group_id,
        canonical_key: g.canonical_key.clone(),
        display_form: g.display_form.clone(),
        match_kind: kind,
        edit_distance: edit_distance(&key, &g.canonical_key),
        member_count: g.member_count,
    };
    let mut exact = Vec::new();
    let mut contained = Vec::new();
    let mut fuzzy = Vec::new();
    for g in groups.iter().filter(|g| g.lang == lang) {
        if g.canonical_key == key {
            exact.push(candidate(g, MatchKind::Exact));
        } else if contains_run(&g.canonical_key, &key) {
            contained.push(candidate(g, MatchKind::Containment));
        } else if edit_distance(&key, &g.canonical_key) <= threshold {
            fuzzy.push(candidate(g, MatchKind::Fuzzy));
        }
    }
    contained.sort_by_key(|c| (c.canonical_key.split(' ').count(), c.canonical_key.clone()));
    fuzzy.sort_by_key(|c| (c.edit_distance, Reverse(c.member_count), c.canonical_key.clone()));
    let mut all: Vec<Candidate> = exact.into_iter().chain(contained).chain(fuzzy).collect();
    all.truncate(limit);
    Ok(all)
}

/// The most frequent string, ties going to the smallest.
fn modal<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for item in items {
        *counts.entry(item).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by_key(|&(s, n)| (Reverse(n), s));
    ranked[0].0.to_string()
}

/// Term groups re-derived from the raw entries.
pub fn groups(entries: &[TermEntry]) -> Vec<TermGroup> {
    let mut by_key: BTreeMap<(Lang, String), Vec<&TermEntry>> = BTreeMap::new();
    for e in entries {
        by_key.entry((e.source_lang, canonical_key(&e.source_term, e.source_lang))).or_default().push(e);
    }
    let mut out: Vec<TermGroup> = by_key
        .into_iter()
        .map(|((lang, key), members)| {
            let id = members[0].term_group_id;
            assert!(members.iter().all(|m| m.term_group_id == id), "group {key} is split across ids");
            TermGroup {
                term_group_id: id,
                canonical_key: key,
                display_form: modal(members.iter().map(|m| m.source_term.as_str())),
                lang,
                member_count: members.len() as u64,
            }
        })
        .collect();
    out.sort_by_key(|g| g.term_group_id);
    out
}

pub struct Tables {
    pub entries: Vec<TermEntry>,
    pub sources: Vec<DictionarySource>,
    pub senses: Vec<Sense>,
}

pub fn query(tables: &Tables, query: &str, lang: Lang, limit: usize, include_candidates: bool, ratio: f64) -> Result<QueryResult, RefError> {
    let groups = groups(&tables.entries);
    let candidates = lookup(&groups, query, lang, limit, ratio)?;
    let mut result = QueryResult {
        query: query.to_string(),
        lang,
        query_key: canonical_key(query, lang),
        approximate: false,
        matched_group: None,
        candidates: if include_candidates { candidates.clone() } else { Vec::new() },
        senses: Vec::new(),
        recommendation: None,
        timing_ms: 0,
    };
    let Some(top) = candidates.first() else { return Ok(result) };
    let group = groups.iter().find(|g| g.term_group_id == top.term_group_id).unwrap().clone();
    result.approximate = top.match_kind != MatchKind::Exact;

    let mut members: Vec<&TermEntry> = tables.entries.iter().filter(|e| e.term_group_id == group.term_group_id).collect();
    members.sort_by_key(|e| e.entry_id);
    let mut sense_ids: Vec<Option<SenseId>> = members.iter().map(|e| e.sense_id).collect();
    sense_ids.sort();
    sense_ids.dedup();

    let mut buckets = Vec::new();
    for sense_id in sense_ids {
        let in_bucket: Vec<&TermEntry> = members.iter().copied().filter(|e| e.sense_id == sense_id).collect();
        let sense = sense_id.map(|id| tables.senses.iter().find(|s| s.sense_id == id).unwrap());
        let mut forms: Vec<String> = in_bucket.iter().map(|e| canonical_key(&e.target_term, Lang::Ar)).collect();
        forms.sort();
        forms.dedup();
        let mut equivalents: Vec<EquivalentGroup> = forms
            .into_iter()
            .map(|form| {
                let cited: Vec<&TermEntry> = in_bucket
                    .iter()
                    .copied()
                    .filter(|e| canonical_key(&e.target_term, Lang::Ar) == form)
                    .collect();
                EquivalentGroup {
                    display_form: modal(cited.iter().map(|e| e.target_term.as_str())),
                    normalized_form: form,
                    count: cited.len() as u64,
                    citations: cited
                        .iter()
                        .map(|e| {
                            let source = tables.sources.iter().find(|s| s.source_id == e.source_id).unwrap();
                            Citation {
                                entry_id: e.entry_id,
                                source_id: e.source_id,
                                dictionary: source.key.clone(),
                                citation: source.citation.clone(),
                                spelling: e.target_term.clone(),
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        equivalents.sort_by_key(|eq| (Reverse(eq.count), eq.normalized_form.clone()));
        buckets.push(SenseBucket {
            sense_id,
            ordinal: sense.map(|s| s.ordinal),
            label: match sense {
                None => "unassigned".to_string(),
                Some(s) => s.domain_tag.clone().unwrap_or_else(|| format!("sense {}", s.ordinal)),
            },
            gloss: sense.map(|s| s.gloss.clone()),
            domain_tag: sense.and_then(|s| s.domain_tag.clone()),
            instance_count: in_bucket.len() as u64,
            equivalents,
        });
    }
    buckets.sort_by_key(|b| (b.sense_id.is_none(), Reverse(b.instance_count), b.ordinal));
    result.recommendation = buckets.first().and_then(|b| b.equivalents.first()).map(|e| e.display_form.clone());
    result.senses = buckets;
    result.matched_group = Some(group);
    Ok(result)
}

/// Descriptions of every conservation or ordering rule `result` breaks.
pub fn violations(result: &QueryResult) -> Vec<String> {
    let mut out = Vec::new();
    let sense_total: u64 = result.senses.iter().map(|b| b.instance_count).sum();
    match &result.matched_group {
        Some(g) if sense_total != g.member_count => {
            out.push(format!("{}: senses sum to {sense_total}, group has {}", result.query, g.member_count))
        }
        None if !result.senses.is_empty() => out.push(format!("{}: senses without a group", result.query)),
        _ => {}
    }
    for b in &result.senses {
        let eq_total: u64 = b.equivalents.iter().map(|e| e.count).sum();
        if eq_total != b.instance_count {
            out.push(format!("{} / {}: equivalents sum to {eq_total}, bucket has {}", result.query, b.label, b.instance_count));
        }
        for e in &b.equivalents {
            if e.count != e.citations.len() as u64 {
                out.push(format!("{} / {}: count differs from citations", result.query, e.normalized_form));
            }
            if canonical_key(&e.display_form, Lang::Ar) != e.normalized_form {
                out.push(format!("{} / {}: display form has another key", result.query, e.normalized_form));
            }
        }
        if b.equivalents.windows(2).any(|w| w[0].count < w[1].count) {
            out.push(format!("{} / {}: equivalents out of order", result.query, b.label));
        }
    }
    let assigned: Vec<&SenseBucket> = result.senses.iter().filter(|b| b.sense_id.is_some()).collect();
    if assigned.windows(2).any(|w| w[0].instance_count < w[1].instance_count) {
        out.push(format!("{}: senses out of order", result.query));
    }
    if result.senses.iter().position(|b| b.sense_id.is_none()).is_some_and(|p| p + 1 != result.senses.len()) {
        out.push(format!("{}: unassigned bucket is not last", result.query));
    }
    let top_non_empty = result.senses.first().is_some_and(|b| !b.equivalents.is_empty());
    if result.recommendation.is_some() != top_non_empty {
        out.push(format!("{}: recommendation presence mismatch", result.query));
    }
    out
}
