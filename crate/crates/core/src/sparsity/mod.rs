//! The mask subsystem: per-layer binary masks over weight matrices,
//! magnitude pruning, gradient-based growth, and global sparsity accounting.
//!
//! Counts are relative to a layer's current active set: pruning removes the
//! k = round(zeta * active) smallest-magnitude active weights, growth
//! activates the k largest-|gradient| inactive positions. Ties break on the
//! lowest flat index and k is clamped so a layer never goes completely dark.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{AdamState, Matrix, RngStream};

/// Binary mask over a rows x cols weight matrix, bit-packed into u64 words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMask {
    rows: usize,
    cols: usize,
    words: Vec<u64>,
    active: usize,
}

impl LayerMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        let mut mask = LayerMask {
            rows,
            cols,
            words: vec![u64::MAX; n.div_ceil(64)],
            active: n,
        };
        mask.clear_tail();
        mask
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        LayerMask {
            rows,
            cols,
            words: vec![0; n.div_ceil(64)],
            active: 0,
        }
    }

    fn clear_tail(&mut self) {
        let n = self.rows * self.cols;
        let tail = n % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, flat: usize) -> bool {
        (self.words[flat / 64] >> (flat % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, flat: usize, on: bool) {
        let word = &mut self.words[flat / 64];
        let bit = 1u64 << (flat % 64);
        let was = *word & bit != 0;
        if on && !was {
            *word |= bit;
            self.active += 1;
        } else if !on && was {
            *word &= !bit;
            self.active -= 1;
        }
    }

    /// Cached number of set bits.
    pub fn active_count(&self) -> usize {
        self.active
    }

    /// Recount from the words; the cache must always agree.
    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.active as f64 / self.len() as f64
    }
}

/// Exactly round(density * n) bits set (clamped to at least 1), chosen
/// uniformly at random. Density 1 sets every bit without consuming draws.
pub fn init_mask(rows: usize, cols: usize, density: f64, rng: &mut RngStream) -> Result<LayerMask> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!("initial density {density} outside (0, 1]")));
    }
    let n = rows * cols;
    let k = ((density * n as f64).round() as usize).clamp(1, n);
    if k == n {
        return Ok(LayerMask::full(rows, cols));
    }
    let mut mask = LayerMask::empty(rows, cols);
    for idx in rng.choose_indices(n, k) {
        mask.set(idx, true);
    }
    Ok(mask)
}

/// A weight matrix together with its mask and the gradient buffer from the
/// most recent backward pass. The gradient stays dense: growth needs the
/// gradient of currently-zero weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparseLayerState {
    pub name: String,
    pub weights: Matrix,
    pub mask: LayerMask,
    pub last_grad: Matrix,
}

impl SparseLayerState {
    pub fn new(name: impl Into<String>, weights: Matrix) -> Self {
        let (rows, cols) = weights.shape();
        SparseLayerState {
            name: name.into(),
            weights,
            mask: LayerMask::full(rows, cols),
            last_grad: Matrix::zeros(rows, cols),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn active_count(&self) -> usize {
        self.mask.active_count()
    }

    /// Zero every masked-out weight. Idempotent.
    pub fn apply_mask(&mut self) {
        let data = self.weights.data_mut();
        for (flat, v) in data.iter_mut().enumerate() {
            if !self.mask.get(flat) {
                *v = 0.0;
            }
        }
    }

    /// Check the mask/weight consistency invariant.
    pub fn is_consistent(&self) -> bool {
        self.mask.active_count() == self.mask.popcount()
            && self
                .weights
                .data()
                .iter()
                .enumerate()
                .all(|(flat, &v)| self.mask.get(flat) || v == 0.0)
    }
}

/// Remove exactly `k` active weights with the smallest |w| (ties to the
/// lowest flat index); clamped so at least one weight survives. Returns the
/// number actually pruned.
pub fn prune_count(state: &mut SparseLayerState, k: usize) -> usize {
    let active = state.mask.active_count();
    if active <= 1 {
        return 0;
    }
    let k = k.min(active - 1);
    if k == 0 {
        return 0;
    }
    let mut candidates: Vec<(f64, usize)> = state
        .weights
        .data()
        .iter()
        .enumerate()
        .filter(|(flat, _)| state.mask.get(*flat))
        .map(|(flat, &w)| (w.abs(), flat))
        .collect();
    // partial selection, not a full sort: the oracle tests compare against
    // an independently sorted list
    candidates.select_nth_unstable_by(k - 1, |a, b| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    });
    for &(_, flat) in &candidates[..k] {
        state.mask.set(flat, false);
        state.weights.data_mut()[flat] = 0.0;
    }
    debug_assert!(state.is_consistent());
    k
}

/// Prune round(fraction * active) smallest-magnitude active weights
/// (round half away from zero). Fractions at or above 1 degrade to
/// "keep a single weight".
pub fn prune_fraction(state: &mut SparseLayerState, fraction: f64) -> usize {
    assert!(fraction >= 0.0, "negative prune fraction");
    let k = (fraction * state.mask.active_count() as f64).round() as usize;
    prune_count(state, k)
}

/// Activate min(k, inactive) positions with the largest |last_grad| (ties to
/// the lowest flat index). New weights start at zero and their Adam moments
/// are reset. Returns the number grown.
pub fn grow_count(state: &mut SparseLayerState, k: usize, adam: Option<&mut AdamState>) -> usize {
    let total = state.mask.len();
    let inactive = total - state.mask.active_count();
    let k = k.min(inactive);
    if k == 0 {
        return 0;
    }
    let mut candidates: Vec<(f64, usize)> = state
        .last_grad
        .data()
        .iter()
        .enumerate()
        .filter(|(flat, _)| !state.mask.get(*flat))
        .map(|(flat, &g)| (g.abs(), flat))
        .collect();
    candidates.select_nth_unstable_by(k - 1, |a, b| {
        b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
    });
    let mut adam = adam;
    for &(_, flat) in &candidates[..k] {
        state.mask.set(flat, true);
        state.weights.data_mut()[flat] = 0.0;
        if let Some(st) = adam.as_deref_mut() {
            st.reset_position(flat);
        }
    }
    debug_assert!(state.is_consistent());
    k
}

/// Global sparsity over the sparsifiable layers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparsitySnapshot {
    pub global_sparsity: f64,
    pub per_layer: Vec<(String, f64)>,
}

/// S = 1 - (sum active) / (sum total), plus per-layer densities.
pub fn snapshot(layers: &[SparseLayerState]) -> Result<SparsitySnapshot> {
    if layers.is_empty() {
        return Err(Error::Config("snapshot of zero sparsifiable layers".into()));
    }
    let total: usize = layers.iter().map(|l| l.param_count()).sum();
    let active: usize = layers.iter().map(|l| l.active_count()).sum();
    Ok(SparsitySnapshot {
        global_sparsity: 1.0 - active as f64 / total as f64,
        per_layer: layers
            .iter()
            .map(|l| (l.name.clone(), l.mask.density()))
            .collect(),
    })
}
