//! Text cleanup and canonical grouping keys.
//!
//! Every grouping decision in the term base (term groups, duplicate
//! detection, equivalent groups, search) compares canonical keys rather than
//! raw spellings. A key is the output of [`normalize`] under the built-in
//! profile for the text's language.
//!
//! | profile | drops                                                     | replaced by a space                         | other              |
//! |---------|-----------------------------------------------------------|---------------------------------------------|--------------------|
//! | `ar`    | U+064B–U+0652, U+0670, U+0640, format/control chars       | P*/S* categories, non-Arabic letters/marks  | NFC                |
//! | `en`    | same, plus every combining mark after NFD                 | P*/S* categories, Arabic-script chars       | lowercase, NFC     |
//! | `fr`    | same as `en`                                              | same as `en`                                | lowercase, NFC     |
//!
//! All profiles trim and collapse whitespace runs to one space. Hamza and
//! alef variants are kept distinct.

use std::ops::RangeInclusive;

use serde::Serialize;
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::lang::{Lang, UnsupportedLanguage};

/// Tanwin, short vowels, shadda and sukun.
pub const ARABIC_HARAKAT: RangeInclusive<char> = '\u{064B}'..='\u{0652}';
pub const SUPERSCRIPT_ALEF: char = '\u{0670}';
pub const TATWEEL: char = '\u{0640}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NormalizationProfile {
    pub lang: Lang,
    /// Drop the harakat range and the superscript alef.
    pub strip_diacritics: bool,
    pub strip_tatweel: bool,
    pub fold_case: bool,
    /// Decompose and drop every combining mark (Latin accents).
    pub strip_accents: bool,
    pub strip_foreign_script: bool,
    pub collapse_whitespace: bool,
    /// Fold أ إ آ ٱ to bare alef. Off in every built-in profile.
    pub fold_hamza: bool,
}

const ARABIC: NormalizationProfile = NormalizationProfile {
    lang: Lang::Ar,
    strip_diacritics: true,
    strip_tatweel: true,
    fold_case: false,
    strip_accents: false,
    strip_foreign_script: true,
    collapse_whitespace: true,
    fold_hamza: false,
};

const ENGLISH: NormalizationProfile = NormalizationProfile {
    lang: Lang::En,
    strip_diacritics: true,
    strip_tatweel: true,
    fold_case: true,
    strip_accents: true,
    strip_foreign_script: true,
    collapse_whitespace: true,
    fold_hamza: false,
};

const FRENCH: NormalizationProfile = NormalizationProfile {
    lang: Lang::Fr,
    ..ENGLISH
};

/// The built-in profile for `lang`.
pub fn profile(lang: Lang) -> &'static NormalizationProfile {
    match lang {
        Lang::Ar => &ARABIC,
        Lang::En => &ENGLISH,
        Lang::Fr => &FRENCH,
    }
}

pub fn is_arabic_diacritic(c: char) -> bool {
    ARABIC_HARAKAT.contains(&c) || c == SUPERSCRIPT_ALEF
}

/// Code points in the Arabic script blocks.
pub fn is_arabic_script(c: char) -> bool {
    matches!(c,
        '\u{0600}'..='\u{06FF}'
        | '\u{0750}'..='\u{077F}'
        | '\u{0870}'..='\u{08FF}'
        | '\u{FB50}'..='\u{FDFF}'
        | '\u{FE70}'..='\u{FEFF}')
}

fn is_mark(category: GeneralCategory) -> bool {
    matches!(
        category,
        GeneralCategory::NonspacingMark | GeneralCategory::SpacingMark | GeneralCategory::EnclosingMark
    )
}

fn is_special(category: GeneralCategory) -> bool {
    use GeneralCategory::*;
    matches!(
        category,
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

fn is_foreign(c: char, category: GeneralCategory, lang: Lang) -> bool {
    match lang {
        Lang::Ar => !is_arabic_script(c) && (c.is_alphabetic() || is_mark(category)),
        Lang::En | Lang::Fr => is_arabic_script(c),
    }
}

enum Disposition {
    Drop,
    Space,
    Keep(char),
}

fn classify(c: char, profile: &NormalizationProfile) -> Disposition {
    if profile.strip_diacritics && is_arabic_diacritic(c) {
        return Disposition::Drop;
    }
    if profile.strip_tatweel && c == TATWEEL {
        return Disposition::Drop;
    }
    if c.is_whitespace() {
        return Disposition::Space;
    }
    let category = get_general_category(c);
    match category {
        GeneralCategory::Format | GeneralCategory::Control => return Disposition::Drop,
        _ if profile.strip_accents && is_mark(category) => return Disposition::Drop,
        _ if is_special(category) => return Disposition::Space,
        _ if profile.strip_foreign_script && is_foreign(c, category, profile.lang) => {
            return Disposition::Space
        }
        _ => {}
    }
    if profile.fold_hamza && matches!(c, '\u{0622}' | '\u{0623}' | '\u{0625}' | '\u{0671}') {
        return Disposition::Keep('\u{0627}');
    }
    Disposition::Keep(c)
}

fn push_filtered(out: &mut String, c: char, profile: &NormalizationProfile) {
    match classify(c, profile) {
        Disposition::Drop => {}
        Disposition::Space => out.push(' '),
        Disposition::Keep(kept) if profile.fold_case => {
            for lower in kept.to_lowercase() {
                // to_lowercase can emit a combining dot (U+0130).
                match classify(lower, profile) {
                    Disposition::Keep(k) => out.push(k),
                    Disposition::Space => out.push(' '),
                    Disposition::Drop => {}
                }
            }
        }
        Disposition::Keep(kept) => out.push(kept),
    }
}

/// Cleans `text` under `profile`. Idempotent, never longer than the input
/// (in code points), and may return an empty string when nothing survives.
pub fn normalize(text: &str, profile: &NormalizationProfile) -> String {
    let mut filtered = String::with_capacity(text.len());
    if profile.strip_accents {
        for c in text.nfd() {
            push_filtered(&mut filtered, c, profile);
        }
    } else {
        for c in text.chars() {
            push_filtered(&mut filtered, c, profile);
        }
    }
    let composed: String = filtered.nfc().collect();
    if profile.collapse_whitespace {
        collapse_whitespace(&composed)
    } else {
        composed.trim().to_string()
    }
}

fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Grouping key for `text` in language `lang`.
pub fn canonical_key(text: &str, lang: Lang) -> String {
    let profile = profile(lang);
    let key = normalize(text, profile);
    if profile.collapse_whitespace {
        key
    } else {
        collapse_whitespace(&key)
    }
}

/// [`canonical_key`] for a language tag that still needs validating.
pub fn canonical_key_for(text: &str, lang_tag: &str) -> Result<String, UnsupportedLanguage> {
    Ok(canonical_key(text, lang_tag.parse()?))
}
