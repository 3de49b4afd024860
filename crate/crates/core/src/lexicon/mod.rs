//! Domain types and the persistent store.

mod store;
mod types;

pub use store::{Result, Snapshot, Store, StoreError, WriterLock, SCHEMA_VERSION};
pub use types::*;
