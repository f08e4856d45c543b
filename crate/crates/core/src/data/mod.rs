//! Dataset ingestion, preprocessing, cross-validation splits and pair datasets.

mod dataset;
mod manifest;
pub mod mnist;
mod pairs;
mod schema;
mod split;

pub use dataset::{sha256_hex, Attribute, AttributeKind, Dataset, Provenance};
pub use manifest::{default_data_dir, FileStatus, Manifest, ManifestEntry, DATA_DIR_ENV};
pub use pairs::{build_pairs, pair_count, pairs_over, PairMode, PairTriplet};
pub use schema::{ColumnKind, ColumnSpec, Delimiter, Schema};
pub use split::{stratified_kfold, Split};
