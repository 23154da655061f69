//! Fixed-schedule sparsifiers: gradual magnitude pruning, gradual pruning
//! with gradient regeneration, and fixed-sparsity prune/regrow.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::AdamState;
use crate::sparsity::{grow_count, prune_count, snapshot, SparseLayerState, SparsitySnapshot};

/// Gradual magnitude pruning along the cubic schedule, dense start.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GmpConfig {
    pub s_initial: f64,
    pub s_final: f64,
    /// Fraction of total training iterations at which the ramp ends.
    pub prune_end_frac: f64,
    pub delta_t: u64,
}

impl Default for GmpConfig {
    fn default() -> Self {
        GmpConfig {
            s_initial: 0.0,
            s_final: 0.5,
            prune_end_frac: 0.5,
            delta_t: 20,
        }
    }
}

/// GMP plus count-neutral gradient regeneration each step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GranetConfig {
    pub gmp: GmpConfig,
    /// Initial regeneration rate, cosine-decayed over training.
    pub zeta0: f64,
}

impl Default for GranetConfig {
    fn default() -> Self {
        GranetConfig {
            gmp: GmpConfig::default(),
            zeta0: 0.5,
        }
    }
}

/// Fixed-sparsity dynamic sparse training: uniform per-layer mask init, then
/// magnitude-drop / gradient-grow exchanges.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RiglConfig {
    pub sparsity: f64,
    pub zeta0: f64,
    pub delta_t: u64,
}

impl Default for RiglConfig {
    fn default() -> Self {
        RiglConfig {
            sparsity: 0.5,
            zeta0: 0.5,
            delta_t: 20,
        }
    }
}

/// Prune each layer down to the uniform density implied by the global target
/// `s_t`, lowest magnitudes first. No regrowth; a no-op for layers already at
/// or below the target.
pub fn gmp_step(layers: &mut [SparseLayerState], s_target: f64) -> Result<SparsitySnapshot> {
    for layer in layers.iter_mut() {
        let total = layer.param_count();
        let target_active = (((1.0 - s_target) * total as f64).round() as usize).clamp(1, total);
        let active = layer.active_count();
        if active > target_active {
            prune_count(layer, active - target_active);
        }
    }
    snapshot(layers)
}

/// Gradual pruning followed by count-neutral regeneration: per layer, drop
/// `zeta` of the remaining active weights by magnitude and grow the same
/// number back by gradient.
pub fn granet_step(
    layers: &mut [SparseLayerState],
    s_target: f64,
    zeta: f64,
    mut adam: Option<&mut [AdamState]>,
) -> Result<SparsitySnapshot> {
    gmp_step(layers, s_target)?;
    for (idx, layer) in layers.iter_mut().enumerate() {
        let k = (zeta * layer.active_count() as f64).round() as usize;
        let pruned = prune_count(layer, k);
        let moments = adam.as_deref_mut().map(|states| &mut states[idx]);
        grow_count(layer, pruned, moments);
    }
    snapshot(layers)
}

/// One prune/regrow exchange at fixed sparsity.
pub fn rigl_step(
    layers: &mut [SparseLayerState],
    zeta: f64,
    mut adam: Option<&mut [AdamState]>,
) -> Result<SparsitySnapshot> {
    for (idx, layer) in layers.iter_mut().enumerate() {
        let k = (zeta * layer.active_count() as f64).round() as usize;
        let pruned = prune_count(layer, k);
        let moments = adam.as_deref_mut().map(|states| &mut states[idx]);
        grow_count(layer, pruned, moments);
    }
    snapshot(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Matrix, RngStream};
    use crate::sparsity::init_mask;

    fn ten_param_layer() -> SparseLayerState {
        let mut l = SparseLayerState::new("w", Matrix::from_fn(2, 5, |r, c| (r * 5 + c) as f64 + 1.0));
        l.last_grad = Matrix::from_fn(2, 5, |r, c| ((r * 5 + c) as f64 * 1.3).cos());
        l
    }

    #[test]
    fn gmp_to_half_leaves_five_active() {
        let mut layers = vec![ten_param_layer()];
        let snap = gmp_step(&mut layers, 0.5).unwrap();
        assert_eq!(layers[0].active_count(), 5);
        assert!((snap.global_sparsity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gmp_at_current_sparsity_is_a_noop() {
        let mut layers = vec![ten_param_layer()];
        gmp_step(&mut layers, 0.5).unwrap();
        let before = layers[0].clone();
        gmp_step(&mut layers, 0.5).unwrap();
        assert_eq!(layers[0].weights, before.weights);
        assert_eq!(layers[0].active_count(), before.active_count());
    }

    #[test]
    fn gmp_trace_is_non_decreasing() {
        let mut layers = vec![ten_param_layer()];
        let mut prev = 0.0;
        for step in 0..=10 {
            let s_t = crate::controllers::schedule::gmp_target(step, 0, 10, 0.0, 0.9).unwrap();
            let snap = gmp_step(&mut layers, s_t).unwrap();
            assert!(snap.global_sparsity >= prev - 1e-12);
            prev = snap.global_sparsity;
        }
    }

    #[test]
    fn granet_with_zero_regen_equals_gmp() {
        let mut a = vec![ten_param_layer()];
        let mut b = vec![ten_param_layer()];
        let sa = gmp_step(&mut a, 0.3).unwrap();
        let sb = granet_step(&mut b, 0.3, 0.0, None).unwrap();
        assert_eq!(sa.global_sparsity, sb.global_sparsity);
        assert_eq!(a[0].weights, b[0].weights);
    }

    #[test]
    fn granet_regeneration_is_count_neutral() {
        // from dense, s_t=0.2 on 10 params: 8 active after pruning,
        // then zeta=0.5 drops 4 and regrows 4
        let mut layers = vec![ten_param_layer()];
        let snap = granet_step(&mut layers, 0.2, 0.5, None).unwrap();
        assert_eq!(layers[0].active_count(), 8);
        assert!((snap.global_sparsity - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rigl_preserves_sparsity_exactly() {
        let mut rng = RngStream::new(21);
        for _ in 0..20 {
            let rows = rng.below(10) + 2;
            let cols = rng.below(10) + 2;
            let mut l = SparseLayerState::new("w", Matrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0)));
            l.mask = init_mask(rows, cols, 0.5, &mut rng).unwrap();
            l.apply_mask();
            l.last_grad = Matrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0));
            let mut layers = vec![l];
            let before = layers[0].active_count();
            rigl_step(&mut layers, 0.3, None).unwrap();
            assert_eq!(layers[0].active_count(), before);
        }
    }

    #[test]
    fn rigl_zero_rate_is_a_noop() {
        let mut layers = vec![ten_param_layer()];
        let before = layers[0].clone();
        rigl_step(&mut layers, 0.0, None).unwrap();
        assert_eq!(layers[0].weights, before.weights);
    }

    #[test]
    fn rigl_selections_match_sort_oracles() {
        let mut rng = RngStream::new(33);
        let rows = 6;
        let cols = 7;
        let mut l = SparseLayerState::new("w", Matrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0)));
        l.mask = init_mask(rows, cols, 0.6, &mut rng).unwrap();
        l.apply_mask();
        l.last_grad = Matrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0));

        let zeta = 0.4;
        let active_before: std::collections::BTreeSet<usize> =
            (0..l.mask.len()).filter(|&i| l.mask.get(i)).collect();
        let k = (zeta * active_before.len() as f64).round() as usize;

        // full-sort prune oracle over the active set
        let mut by_mag: Vec<usize> = active_before.iter().copied().collect();
        by_mag.sort_by(|&a, &b| {
            l.weights.data()[a]
                .abs()
                .total_cmp(&l.weights.data()[b].abs())
                .then(a.cmp(&b))
        });
        let expect_pruned: std::collections::BTreeSet<usize> = by_mag[..k].iter().copied().collect();
        // growth draws from the zeros after pruning, so just-pruned
        // positions are eligible again
        let mut grow_pool: Vec<usize> = (0..l.mask.len())
            .filter(|i| !active_before.contains(i) || expect_pruned.contains(i))
            .collect();
        grow_pool.sort_by(|&a, &b| {
            l.last_grad.data()[b]
                .abs()
                .total_cmp(&l.last_grad.data()[a].abs())
                .then(a.cmp(&b))
        });
        let expect_grown: std::collections::BTreeSet<usize> = grow_pool[..k].iter().copied().collect();

        let mut layers = vec![l];
        rigl_step(&mut layers, zeta, None).unwrap();
        let l = &layers[0];
        let now_active: std::collections::BTreeSet<usize> =
            (0..l.mask.len()).filter(|&i| l.mask.get(i)).collect();
        let expect_active: std::collections::BTreeSet<usize> = active_before
            .difference(&expect_pruned)
            .copied()
            .chain(expect_grown.iter().copied())
            .collect();
        assert_eq!(now_active, expect_active);
    }
}
