//! Sliding-window example construction.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::split::Scaler;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Segment::Train => write!(f, "train"),
            Segment::Val => write!(f, "val"),
            Segment::Test => write!(f, "test"),
        }
    }
}

/// One (look-back, target) pair. `target_start` is the absolute index of the
/// first target row in the source series.
#[derive(Clone, Debug)]
pub struct Example {
    pub lookback: Matrix,
    pub target: Matrix,
    pub target_start: usize,
}

/// Chronologically ordered examples for one segment, plus the scaler that
/// standardized them.
#[derive(Clone, Debug)]
pub struct WindowedDataset {
    pub segment: Segment,
    pub examples: Vec<Example>,
    pub scaler: Scaler,
    pub lookback_len: usize,
    pub horizon: usize,
    pub vars: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Cut `range` of the (already standardized) series into windows.
///
/// Targets stay inside `range`; the look-back context may reach back into the
/// preceding segment. For the leading (train) segment that makes the window
/// count n - L - H + 1, for later segments with enough preceding context it
/// is n - H + 1.
pub fn make_windows(
    values: &Matrix,
    range: Range<usize>,
    segment: Segment,
    lookback_len: usize,
    horizon: usize,
    scaler: &Scaler,
) -> Result<WindowedDataset> {
    if lookback_len < 1 || horizon < 1 {
        return Err(Error::Config("look-back and horizon must be >= 1".into()));
    }
    let vars = values.cols();
    let first_target = range.start.max(lookback_len);
    let mut examples = Vec::new();
    if range.end >= horizon {
        for t in first_target..=range.end.saturating_sub(horizon) {
            if t < lookback_len {
                continue;
            }
            let lookback = Matrix::from_fn(lookback_len, vars, |r, c| values.at(t - lookback_len + r, c));
            let target = Matrix::from_fn(horizon, vars, |r, c| values.at(t + r, c));
            examples.push(Example {
                lookback,
                target,
                target_start: t,
            });
        }
    }
    if examples.is_empty() {
        return Err(Error::Data(format!(
            "segment too short: {segment} segment of length {} cannot fit look-back {lookback_len} + horizon {horizon}",
            range.len()
        )));
    }
    Ok(WindowedDataset {
        segment,
        examples,
        scaler: scaler.clone(),
        lookback_len,
        horizon,
        vars,
    })
}
