//! One finite relation, two physical representations.
//!
//! * The **table** representation stores fixed-width rows sorted by key and
//!   a disk B-tree from key to record number ([`table_store`]).
//! * The **array** representation linearizes the key into a logical cell
//!   position ([`linearizer`]), drops every empty cell and keeps a small
//!   run header for logical-to-physical conversion ([`array_store`]).
//!
//! [`relation`] turns raw rows into dimension indices and measure records and
//! computes the density / data-ratio statistics; [`cost_model`] holds the
//! analytical speed quotient; [`bench`] times real point lookups against
//! both; [`dataset`] ties everything to a directory on disk.

pub mod array_store;
pub mod bench;
pub mod cost_model;
pub mod dataset;
pub mod error;
pub mod linearizer;
pub mod relation;
pub mod storage;
pub mod table_store;

pub use array_store::{compress_stream, ArrayStore, Header, Location, RunEntry};
pub use dataset::{BuildTarget, Dataset, Via};
pub use error::{Error, Result};
pub use linearizer::{delinearize, linearize, LogicalIndex, Shape};
pub use relation::{ColumnType, DimensionDirectory, EncodedRow, MeasureColumn, RelationSchema};
pub use table_store::TableStore;
