//! Data pipeline: CSV ingestion, chronological splitting, standardization,
//! sliding windows, and a synthetic generator.

pub mod series;
pub mod split;
pub mod windows;

pub use series::{load_csv, synth_series, write_csv, RawSeries};
pub use split::{chronological_split, standardize, Scaler, SplitSpec, Splits};
pub use windows::{make_windows, Example, Segment, WindowedDataset};
