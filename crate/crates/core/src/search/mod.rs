//! Candidate lookup over term-group keys: exact match, whole-token
//! containment, and bounded edit distance.
//!
//! Ranking, applied to canonical keys of the query's language:
//!
//! 1. the exact match, if any;
//! 2. containment matches (the query's tokens appear as a contiguous run of
//!    whole tokens in the key), by ascending token count, then key;
//! 3. fuzzy matches within `max(1, ⌈ratio · |query|⌉)` code-point edits, by
//!    ascending distance, then descending member count, then key.
//!
//! A group is reported once, under the first kind it qualifies for. Keys
//! compare by code point.

mod bktree;
mod levenshtein;

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ids::GroupId;
use crate::lang::Lang;
use crate::lexicon::{Snapshot, StoreError, TermGroup};
use crate::normalize::canonical_key;

pub use bktree::BkTree;
pub use levenshtein::{levenshtein, levenshtein_str};

const CACHE_FORMAT: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("query '{0}' is empty after normalization")]
    InvalidQuery(String),
    #[error("limit must be at least 1")]
    InvalidLimit,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Containment,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub term_group_id: GroupId,
    pub canonical_key: String,
    pub display_form: String,
    pub match_kind: MatchKind,
    pub edit_distance: usize,
    pub member_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Fraction of the query length allowed as edits, in `(0, 1]`.
    pub fuzzy_threshold_ratio: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { fuzzy_threshold_ratio: 0.25 }
    }
}

impl SearchConfig {
    /// Largest edit distance a fuzzy candidate may have for a query key of
    /// `query_len` code points.
    pub fn fuzzy_threshold(&self, query_len: usize) -> usize {
        let scaled = (self.fuzzy_threshold_ratio * query_len as f64).ceil() as usize;
        scaled.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IndexedGroup {
    id: GroupId,
    key: String,
    display_form: String,
    member_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct LangIndex {
    /// Ordered by group id.
    groups: Vec<IndexedGroup>,
    /// Positions into `groups`, sorted by key.
    by_key: Vec<u32>,
    /// Token → positions of groups whose key contains it, ascending.
    tokens: BTreeMap<String, Vec<u32>>,
    tree: BkTree,
    #[serde(skip)]
    chars: Vec<Vec<char>>,
}

impl LangIndex {
    fn build(mut groups: Vec<IndexedGroup>) -> Self {
        groups.sort_by_key(|g| g.id);
        let chars: Vec<Vec<char>> = groups.iter().map(|g| g.key.chars().collect()).collect();
        let mut by_key: Vec<u32> = (0..groups.len() as u32).collect();
        by_key.sort_by(|&a, &b| groups[a as usize].key.cmp(&groups[b as usize].key));
        let mut tokens: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut tree = BkTree::default();
        for (pos, group) in groups.iter().enumerate() {
            let mut seen: Vec<&str> = Vec::new();
            for token in group.key.split(' ') {
                if !seen.contains(&token) {
                    seen.push(token);
                    tokens.entry(token.to_string()).or_default().push(pos as u32);
                }
            }
            tree.insert(pos as u32, &chars);
        }
        Self { groups, by_key, tokens, tree, chars }
    }

    fn exact(&self, key: &str) -> Option<usize> {
        self.by_key
            .binary_search_by(|&pos| self.groups[pos as usize].key.as_str().cmp(key))
            .ok()
            .map(|i| self.by_key[i] as usize)
    }
}

/// Immutable lookup structure over every term group of one store snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    format: u32,
    snapshot: String,
    langs: BTreeMap<Lang, LangIndex>,
}

impl Index {
    /// Builds from term groups. Keys are taken as stored (they are already
    /// canonical); the result does not depend on input order.
    pub fn build(groups: impl IntoIterator<Item = TermGroup>, snapshot: impl Into<String>) -> Self {
        let mut by_lang: BTreeMap<Lang, Vec<IndexedGroup>> = BTreeMap::new();
        for group in groups {
            by_lang.entry(group.lang).or_default().push(IndexedGroup {
                id: group.term_group_id,
                key: group.canonical_key,
                display_form: group.display_form,
                member_count: group.member_count,
            });
        }
        Self {
            format: CACHE_FORMAT,
            snapshot: snapshot.into(),
            langs: by_lang
                .into_iter()
                .map(|(lang, groups)| (lang, LangIndex::build(groups)))
                .collect(),
        }
    }

    pub fn from_snapshot(snapshot: &Snapshot<'_>) -> Result<Self, StoreError> {
        Ok(Self::build(snapshot.groups()?, snapshot.snapshot_hash()?))
    }

    /// Hash of the store snapshot this index was built from.
    pub fn snapshot_hash(&self) -> &str {
        &self.snapshot
    }

    pub fn group_count(&self) -> usize {
        self.langs.values().map(|l| l.groups.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.group_count() == 0
    }

    /// Indexed keys of one language, sorted.
    pub fn keys(&self, lang: Lang) -> Vec<&str> {
        self.langs.get(&lang).map_or_else(Vec::new, |l| {
            l.by_key.iter().map(|&p| l.groups[p as usize].key.as_str()).collect()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let mut index: Index = serde_json::from_str(json)?;
        for lang in index.langs.values_mut() {
            lang.chars = lang.groups.iter().map(|g| g.key.chars().collect()).collect();
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(tmp, path)
    }

    /// Loads a cached index if it exists, parses, and was built from the
    /// snapshot with hash `expected`. Anything else yields `None`.
    pub fn load_cached(path: &Path, expected: &str) -> Option<Self> {
        let json = fs::read_to_string(path).ok()?;
        let index = Self::from_json(&json).ok()?;
        (index.format == CACHE_FORMAT && index.snapshot == expected).then_some(index)
    }

    pub fn lookup(&self, query: &str, lang: Lang, limit: usize) -> Result<Vec<Candidate>, SearchError> {
        self.lookup_with(query, lang, limit, &SearchConfig::default())
    }

    pub fn lookup_with(
        &self,
        query: &str,
        lang: Lang,
        limit: usize,
        config: &SearchConfig,
    ) -> Result<Vec<Candidate>, SearchError> {
        if limit == 0 {
            return Err(SearchError::InvalidLimit);
        }
        let key = canonical_key(query, lang);
        if key.is_empty() {
            return Err(SearchError::InvalidQuery(query.to_string()));
        }
        let Some(index) = self.langs.get(&lang) else {
            return Ok(Vec::new());
        };
        let query_chars: Vec<char> = key.chars().collect();
        let query_tokens: Vec<&str> = key.split(' ').collect();
        let mut claimed = vec![false; index.groups.len()];
        let mut results = Vec::new();
        let candidate = |pos: usize, kind: MatchKind, distance: usize| {
            let group = &index.groups[pos];
            Candidate {
                term_group_id: group.id,
                canonical_key: group.key.clone(),
                display_form: group.display_form.clone(),
                match_kind: kind,
                edit_distance: distance,
                member_count: group.member_count,
            }
        };

        if let Some(pos) = index.exact(&key) {
            claimed[pos] = true;
            results.push(candidate(pos, MatchKind::Exact, 0));
        }

        let postings = query_tokens
            .iter()
            .map(|t| index.tokens.get(*t))
            .collect::<Option<Vec<_>>>()
            .and_then(|lists| lists.into_iter().min_by_key(|l| l.len()));
        if let Some(postings) = postings {
            let mut contained: Vec<(usize, usize)> = Vec::new();
            for &pos in postings {
                let pos = pos as usize;
                if claimed[pos] {
                    continue;
                }
                let tokens: Vec<&str> = index.groups[pos].key.split(' ').collect();
                if tokens.windows(query_tokens.len()).any(|w| w == query_tokens) {
                    claimed[pos] = true;
                    contained.push((pos, tokens.len()));
                }
            }
            contained.sort_by(|&(a, an), &(b, bn)| {
                an.cmp(&bn).then_with(|| index.groups[a].key.cmp(&index.groups[b].key))
            });
            for (pos, _) in contained {
                let distance = levenshtein(&query_chars, &index.chars[pos]);
                results.push(candidate(pos, MatchKind::Containment, distance));
            }
        }

        let threshold = config.fuzzy_threshold(query_chars.len());
        let mut fuzzy: Vec<(usize, usize)> = index
            .tree
            .find(&query_chars, threshold, &index.chars)
            .into_iter()
            .map(|(pos, d)| (pos as usize, d))
            .filter(|&(pos, _)| !claimed[pos])
            .collect();
        fuzzy.sort_by(|&(a, ad), &(b, bd)| {
            let (ga, gb) = (&index.groups[a], &index.groups[b]);
            (ad, Reverse(ga.member_count), &ga.key).cmp(&(bd, Reverse(gb.member_count), &gb.key))
        });
        results.extend(fuzzy.into_iter().map(|(pos, d)| candidate(pos, MatchKind::Fuzzy, d)));

        results.truncate(limit);
        Ok(results)
    }
}
