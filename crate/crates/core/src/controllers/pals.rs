//! PALS: prune-and-grow with an adaptive sparsity level.
//!
//! At every mask update the controller compares the current validation loss
//! against the best one seen so far. Within a loss budget of
//! `lambda * l_best` (or while below the minimum sparsity bound) it shrinks
//! the network by pruning more than it grows; when the loss has degraded past
//! the budget and sparsity sits above the best-known level it expands by
//! growing more than it prunes; otherwise it exchanges an equal number of
//! connections and the sparsity stays put.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::AdamState;
use crate::sparsity::{grow_count, prune_count, snapshot, SparseLayerState, SparsitySnapshot};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PalsConfig {
    /// Pruning rate factor (> 1): how much heavier the dominant side of a
    /// shrink/expand step is.
    pub gamma: f64,
    /// Loss freedom factor (> 1): tolerated degradation over the best
    /// validation loss before expansion kicks in.
    pub lambda: f64,
    /// Initial exchange rate, cosine-decayed to zero at t_max.
    pub zeta0: f64,
    /// Mask update period, in optimizer steps.
    pub delta_t: u64,
    pub s_min: f64,
    pub s_max: f64,
    /// Initial density of the masks (1 = start dense).
    pub d_init: f64,
}

impl Default for PalsConfig {
    fn default() -> Self {
        PalsConfig {
            gamma: 1.2,
            lambda: 1.1,
            zeta0: 0.5,
            delta_t: 20,
            s_min: 0.2,
            s_max: 0.9,
            d_init: 1.0,
        }
    }
}

impl PalsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 1.0 {
            return Err(Error::Config(format!("gamma must be > 1 (got {})", self.gamma)));
        }
        if !self.lambda.is_finite() || self.lambda <= 1.0 {
            return Err(Error::Config(format!("lambda must be > 1 (got {})", self.lambda)));
        }
        if !(self.zeta0 > 0.0 && self.zeta0 <= 1.0) {
            return Err(Error::Config(format!("zeta0 must be in (0, 1] (got {})", self.zeta0)));
        }
        if !(0.0 <= self.s_min && self.s_min < self.s_max && self.s_max <= 1.0) {
            return Err(Error::Config(format!(
                "sparsity bounds must satisfy 0 <= s_min < s_max <= 1 (got {}, {})",
                self.s_min, self.s_max
            )));
        }
        if !(self.d_init > 0.0 && self.d_init <= 1.0) {
            return Err(Error::Config(format!("d_init must be in (0, 1] (got {})", self.d_init)));
        }
        if self.delta_t == 0 {
            return Err(Error::Config("delta_t must be >= 1".into()));
        }
        Ok(())
    }
}

/// Controller bookkeeping across mask updates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControllerState {
    /// Best validation loss observed at update steps.
    pub l_best: f64,
    /// Sparsity recorded when l_best last improved.
    pub s_best: f64,
    pub current_s: f64,
}

impl ControllerState {
    pub fn new(initial_sparsity: f64) -> Self {
        ControllerState {
            l_best: f64::INFINITY,
            s_best: 0.0,
            current_s: initial_sparsity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Shrink,
    Expand,
    Stable,
}

impl std::fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecisionKind::Shrink => write!(f, "shrink"),
            DecisionKind::Expand => write!(f, "expand"),
            DecisionKind::Stable => write!(f, "stable"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub zeta_prune: f64,
    pub zeta_grow: f64,
}

/// Pick the branch for this update step and then fold the loss into the
/// best-so-far bookkeeping (the best-update deliberately happens after the
/// branch, so the very first update always shrinks: l_best starts infinite).
pub fn pals_decide(l_valid: f64, state: &mut ControllerState, cfg: &PalsConfig, zeta: f64) -> Decision {
    let s = state.current_s;
    let kind = if s < cfg.s_min || (l_valid <= cfg.lambda * state.l_best && s < cfg.s_max) {
        DecisionKind::Shrink
    } else if l_valid > cfg.lambda * state.l_best && s > state.s_best {
        DecisionKind::Expand
    } else {
        DecisionKind::Stable
    };
    if l_valid < state.l_best {
        state.l_best = l_valid;
        state.s_best = s;
    }
    match kind {
        DecisionKind::Shrink => Decision {
            kind,
            zeta_prune: cfg.gamma * zeta,
            zeta_grow: zeta,
        },
        DecisionKind::Expand => Decision {
            kind,
            zeta_prune: zeta,
            zeta_grow: cfg.gamma * zeta,
        },
        DecisionKind::Stable => Decision {
            kind,
            zeta_prune: zeta,
            zeta_grow: zeta,
        },
    }
}

/// Apply a decision layer by layer: prune `zeta_prune` of the active weights
/// by magnitude, then grow `zeta_grow` (of the same pre-prune active count)
/// by gradient. When the two rates are equal the grown count is pinned to the
/// actually-pruned count so stable steps preserve the active count exactly.
pub fn pals_apply(
    decision: &Decision,
    layers: &mut [SparseLayerState],
    mut adam: Option<&mut [AdamState]>,
) -> Result<SparsitySnapshot> {
    for (idx, layer) in layers.iter_mut().enumerate() {
        let active_before = layer.active_count();
        let pruned = prune_fraction_of(layer, decision.zeta_prune, active_before);
        let want_grow = if decision.zeta_prune == decision.zeta_grow {
            pruned
        } else {
            (decision.zeta_grow * active_before as f64).round() as usize
        };
        let moments = adam.as_deref_mut().map(|states| &mut states[idx]);
        grow_count(layer, want_grow, moments);
    }
    snapshot(layers)
}

fn prune_fraction_of(layer: &mut SparseLayerState, fraction: f64, active_base: usize) -> usize {
    let k = (fraction * active_base as f64).round() as usize;
    prune_count(layer, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Matrix, RngStream};
    use crate::sparsity::init_mask;

    fn cfg() -> PalsConfig {
        PalsConfig {
            gamma: 1.2,
            lambda: 1.1,
            zeta0: 0.5,
            delta_t: 20,
            s_min: 0.2,
            s_max: 0.9,
            d_init: 1.0,
        }
    }

    fn state(l_best: f64, s_best: f64, s: f64) -> ControllerState {
        ControllerState {
            l_best,
            s_best,
            current_s: s,
        }
    }

    #[test]
    fn below_s_min_always_shrinks() {
        let mut st = state(0.1, 0.05, 0.10);
        let d = pals_decide(99.0, &mut st, &cfg(), 0.5);
        assert_eq!(d.kind, DecisionKind::Shrink);
        assert!((d.zeta_prune - 0.6).abs() < 1e-12);
        assert!((d.zeta_grow - 0.5).abs() < 1e-12);
    }

    #[test]
    fn within_loss_budget_shrinks() {
        let mut st = state(0.50, 0.4, 0.5);
        let d = pals_decide(0.50, &mut st, &cfg(), 0.5);
        assert_eq!(d.kind, DecisionKind::Shrink); // 0.50 <= 1.1 * 0.50
    }

    #[test]
    fn over_budget_above_best_sparsity_expands() {
        let mut st = state(0.50, 0.4, 0.5);
        let d = pals_decide(0.60, &mut st, &cfg(), 0.5);
        assert_eq!(d.kind, DecisionKind::Expand);
        assert!((d.zeta_prune - 0.5).abs() < 1e-12);
        assert!((d.zeta_grow - 0.6).abs() < 1e-12);
    }

    #[test]
    fn over_budget_at_or_below_best_sparsity_is_stable() {
        let mut st = state(0.50, 0.4, 0.35);
        let d = pals_decide(0.60, &mut st, &cfg(), 0.5);
        assert_eq!(d.kind, DecisionKind::Stable);
        assert_eq!(d.zeta_prune, d.zeta_grow);
    }

    #[test]
    fn first_update_shrinks_because_l_best_is_infinite() {
        let mut st = ControllerState::new(0.0);
        let d = pals_decide(123.4, &mut st, &cfg(), 0.5);
        assert_eq!(d.kind, DecisionKind::Shrink);
        // best-update happens after the branch
        assert_eq!(st.l_best, 123.4);
        assert_eq!(st.s_best, 0.0);
    }

    #[test]
    fn best_update_records_pre_update_sparsity() {
        let mut st = state(1.0, 0.3, 0.55);
        pals_decide(0.9, &mut st, &cfg(), 0.5);
        assert_eq!(st.l_best, 0.9);
        assert_eq!(st.s_best, 0.55);
        // a worse loss leaves the bests alone
        pals_decide(5.0, &mut st, &cfg(), 0.5);
        assert_eq!(st.l_best, 0.9);
        assert_eq!(st.s_best, 0.55);
    }

    fn random_layers(rng: &mut RngStream, density: f64) -> Vec<SparseLayerState> {
        (0..3)
            .map(|i| {
                let rows = rng.below(8) + 4;
                let cols = rng.below(8) + 4;
                let mut l = SparseLayerState::new(
                    format!("l{i}"),
                    Matrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0)),
                );
                l.mask = init_mask(rows, cols, density, rng).unwrap();
                l.apply_mask();
                l.last_grad = Matrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0));
                l
            })
            .collect()
    }

    #[test]
    fn stable_preserves_global_active_count() {
        let mut rng = RngStream::new(5);
        for _ in 0..20 {
            let mut layers = random_layers(&mut rng, 0.5);
            let before: usize = layers.iter().map(|l| l.active_count()).sum();
            let d = Decision {
                kind: DecisionKind::Stable,
                zeta_prune: 0.3,
                zeta_grow: 0.3,
            };
            pals_apply(&d, &mut layers, None).unwrap();
            let after: usize = layers.iter().map(|l| l.active_count()).sum();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn shrink_and_expand_count_arithmetic() {
        // one layer of 100 active, gamma=1.2, zeta=0.5
        let mut layer = SparseLayerState::new("w", Matrix::from_fn(10, 10, |r, c| (r * 10 + c) as f64 + 1.0));
        let d = Decision {
            kind: DecisionKind::Shrink,
            zeta_prune: 0.6,
            zeta_grow: 0.5,
        };
        layer.last_grad = Matrix::from_fn(10, 10, |r, c| ((r * 10 + c) as f64 * 0.77).sin());
        pals_apply(&d, std::slice::from_mut(&mut layer), None).unwrap();
        assert_eq!(layer.active_count(), 90); // prune 60, grow 50

        let d = Decision {
            kind: DecisionKind::Expand,
            zeta_prune: 0.5,
            zeta_grow: 0.6,
        };
        pals_apply(&d, std::slice::from_mut(&mut layer), None).unwrap();
        assert_eq!(layer.active_count(), 99); // prune 45, grow 54
    }

    #[test]
    fn apply_updates_are_mask_consistent() {
        let mut rng = RngStream::new(8);
        let mut layers = random_layers(&mut rng, 0.7);
        let d = Decision {
            kind: DecisionKind::Shrink,
            zeta_prune: 0.36,
            zeta_grow: 0.3,
        };
        pals_apply(&d, &mut layers, None).unwrap();
        for l in &layers {
            assert!(l.is_consistent());
            assert!(l.active_count() >= 1);
        }
    }
}
