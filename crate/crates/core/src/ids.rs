//! Store-assigned identifiers. Integers inside the store, opaque decimal
//! strings everywhere else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed identifier '{0}'")]
pub struct InvalidId(pub String);

macro_rules! store_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(i64);

        impl $name {
            pub(crate) fn from_raw(raw: i64) -> Self {
                Self(raw)
            }

            pub(crate) fn raw(self) -> i64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = InvalidId;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().parse::<i64>() {
                    Ok(raw) if raw > 0 => Ok(Self(raw)),
                    _ => Err(InvalidId(s.to_string())),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Repr {
                    Text(String),
                    Number(i64),
                }
                match Repr::deserialize(deserializer)? {
                    Repr::Text(text) => text.parse().map_err(serde::de::Error::custom),
                    Repr::Number(raw) if raw > 0 => Ok(Self(raw)),
                    Repr::Number(raw) => Err(serde::de::Error::custom(InvalidId(raw.to_string()))),
                }
            }
        }
    };
}

store_id!(
    /// Identifies a [`DictionarySource`](crate::lexicon::DictionarySource).
    SourceId
);
store_id!(EntryId);
store_id!(
    /// One per morphologically unique source-language term.
    GroupId
);
store_id!(SenseId);
