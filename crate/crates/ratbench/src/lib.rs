//! IO, aggregation, reports, the HTTP service and the CLI around
//! `ratbench-core`.

pub mod cli;
pub mod files;
pub mod io;
pub mod query;
pub mod report;
pub mod service;
pub mod store;

pub use query::{aggregate_table, export_series, speed_series, AggregateOptions, FilterExpr};
pub use store::{IngestError, RecordStore};
