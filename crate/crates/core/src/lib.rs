//! Chance discovery over event streams: co-occurrence graphs, KeyGraph maps,
//! graph-based entropy, market-vector change detection and regional entropy
//! of seismic catalogs.

pub mod change;
pub mod cli;
pub mod cooccur;
pub mod diversity;
pub mod entropy;
pub mod error;
pub mod ingest;
pub mod keygraph;
pub mod oracle;
pub mod output;
pub mod resi;

pub use error::{Error, Result};
pub use ingest::{Event, EventStream, Item, SeismicEvent, Timestamp};
