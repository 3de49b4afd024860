//! Terminology standardization engine.
//!
//! Dictionary corpora are ingested into a single-file [`Store`], source terms
//! are grouped by canonical key, entries are mapped onto a reference sense
//! inventory, and [`QueryEngine::query`] answers a lookup with candidate
//! terms, sense buckets ranked by attestation count, and one recommended
//! target-language equivalent.

pub mod ids;
pub mod ingest;
pub mod lang;
pub mod lexicon;
pub mod normalize;
pub mod search;
pub mod query;
pub mod senses;

pub use ids::{EntryId, GroupId, SenseId, SourceId};
pub use lang::Lang;
pub use lexicon::{Store, StoreError};
pub use query::{QueryEngine, QueryOptions, QueryResult};
