use std::collections::{BTreeSet, HashMap, HashSet};

use super::{BackendError, MapperBackend, ScoreRequest};
use crate::lang::Lang;
use crate::lexicon::MappingMethod;
use crate::normalize::canonical_key;

const STOPWORDS_EN: &str = include_str!("../../data/stopwords/en.txt");
const STOPWORDS_FR: &str = include_str!("../../data/stopwords/fr.txt");
const STOPWORDS_AR: &str = include_str!("../../data/stopwords/ar.txt");

/// Deterministic offline mapper: Jaccard similarity between the content
/// tokens of an entry's definition and of each sense gloss.
#[derive(Debug, Clone)]
pub struct LexicalBackend {
    stopwords: HashMap<Lang, HashSet<String>>,
}

impl Default for LexicalBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl LexicalBackend {
    pub fn new() -> Self {
        let parse = |lang: Lang, list: &str| -> HashSet<String> {
            list.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|w| canonical_key(w, lang))
                .filter(|w| !w.is_empty())
                .collect()
        };
        let stopwords = HashMap::from([
            (Lang::En, parse(Lang::En, STOPWORDS_EN)),
            (Lang::Fr, parse(Lang::Fr, STOPWORDS_FR)),
            (Lang::Ar, parse(Lang::Ar, STOPWORDS_AR)),
        ]);
        Self { stopwords }
    }

    /// Normalized tokens of `text` minus stopwords.
    pub fn content_tokens(&self, text: &str, lang: Lang) -> BTreeSet<String> {
        let stop = &self.stopwords[&lang];
        canonical_key(text, lang)
            .split(' ')
            .filter(|t| !t.is_empty() && !stop.contains(*t))
            .map(str::to_string)
            .collect()
    }

    /// |A ∩ B| / |A ∪ B|, and 0 when both sets are empty.
    pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
        let union = a.union(b).count();
        if union == 0 {
            return 0.0;
        }
        a.intersection(b).count() as f64 / union as f64
    }
}

impl MapperBackend for LexicalBackend {
    fn name(&self) -> &str {
        "lexical"
    }

    fn method(&self) -> MappingMethod {
        MappingMethod::Lexical
    }

    fn requires_definition(&self) -> bool {
        true
    }

    fn score_batch(&self, request: &ScoreRequest<'_>) -> Result<Vec<f64>, BackendError> {
        let Some(definition) = request.definition else {
            return Err(BackendError::Rejected("lexical scoring needs a definition".into()));
        };
        let defined = self.content_tokens(definition, request.lang);
        Ok(request
            .senses
            .iter()
            .map(|sense| Self::jaccard(&defined, &self.content_tokens(&sense.gloss, sense.lang)))
            .collect())
    }
}
