//! Sparsity controllers and the trace records they emit.

pub mod baselines;
pub mod pals;
pub mod schedule;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::AdamState;
use crate::sparsity::{snapshot, SparseLayerState};

pub use baselines::{gmp_step, granet_step, rigl_step, GmpConfig, GranetConfig, RiglConfig};
pub use pals::{pals_apply, pals_decide, ControllerState, Decision, DecisionKind, PalsConfig};
pub use schedule::{cosine_zeta, gmp_target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Dense,
    Pals,
    Gmp,
    Granet,
    Rigl,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ControllerKind::Dense => "dense",
            ControllerKind::Pals => "pals",
            ControllerKind::Gmp => "gmp",
            ControllerKind::Granet => "granet",
            ControllerKind::Rigl => "rigl",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(ControllerKind::Dense),
            "pals" => Ok(ControllerKind::Pals),
            "gmp" => Ok(ControllerKind::Gmp),
            "granet" => Ok(ControllerKind::Granet),
            "rigl" => Ok(ControllerKind::Rigl),
            other => Err(crate::error::Error::Config(format!(
                "unknown controller {other:?} (expected dense|pals|gmp|granet|rigl)"
            ))),
        }
    }
}

/// One line of the JSONL controller trace, appended at every mask update.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub decision: String,
    pub zeta_prune: f64,
    pub zeta_grow: f64,
    pub s_before: f64,
    pub s_after: f64,
    pub l_valid: f64,
    pub l_best: Option<f64>,
}

/// A controller instance driven by the training loop.
#[derive(Clone, Debug)]
pub enum Controller {
    Dense,
    Pals { cfg: PalsConfig, state: ControllerState },
    Gmp { cfg: GmpConfig },
    Granet { cfg: GranetConfig },
    Rigl { cfg: RiglConfig },
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Dense => ControllerKind::Dense,
            Controller::Pals { .. } => ControllerKind::Pals,
            Controller::Gmp { .. } => ControllerKind::Gmp,
            Controller::Granet { .. } => ControllerKind::Granet,
            Controller::Rigl { .. } => ControllerKind::Rigl,
        }
    }

    /// Mask density at initialization.
    pub fn initial_density(&self) -> f64 {
        match self {
            Controller::Dense => 1.0,
            Controller::Pals { cfg, .. } => cfg.d_init,
            // gradual pruning starts from its configured initial sparsity
            Controller::Gmp { cfg } => 1.0 - cfg.s_initial,
            Controller::Granet { cfg } => 1.0 - cfg.gmp.s_initial,
            Controller::Rigl { cfg } => 1.0 - cfg.sparsity,
        }
    }

    /// Steps between mask updates; None disables updates entirely.
    pub fn update_period(&self) -> Option<u64> {
        match self {
            Controller::Dense => None,
            Controller::Pals { cfg, .. } => Some(cfg.delta_t),
            Controller::Gmp { cfg } => Some(cfg.delta_t),
            Controller::Granet { cfg } => Some(cfg.gmp.delta_t),
            Controller::Rigl { cfg } => Some(cfg.delta_t),
        }
    }

    /// Run one mask update at optimizer step `step` (1-based) out of `t_max`.
    /// `l_valid` is the validation loss computed just before the update;
    /// `adam` carries the per-layer optimizer moments so regrown weights can
    /// be reset.
    pub fn update(
        &mut self,
        step: u64,
        t_max: u64,
        l_valid: f64,
        layers: &mut [SparseLayerState],
        adam: Option<&mut [AdamState]>,
    ) -> Result<TraceRecord> {
        let s_before = snapshot(layers)?.global_sparsity;
        match self {
            Controller::Dense => Ok(TraceRecord {
                iteration: step,
                decision: "dense".into(),
                zeta_prune: 0.0,
                zeta_grow: 0.0,
                s_before,
                s_after: s_before,
                l_valid,
                l_best: None,
            }),
            Controller::Pals { cfg, state } => {
                state.current_s = s_before;
                let zeta = cosine_zeta(step, t_max, cfg.zeta0)?;
                let decision = pals_decide(l_valid, state, cfg, zeta);
                let snap = pals_apply(&decision, layers, adam)?;
                state.current_s = snap.global_sparsity;
                Ok(TraceRecord {
                    iteration: step,
                    decision: decision.kind.to_string(),
                    zeta_prune: decision.zeta_prune,
                    zeta_grow: decision.zeta_grow,
                    s_before,
                    s_after: snap.global_sparsity,
                    l_valid,
                    l_best: Some(state.l_best),
                })
            }
            Controller::Gmp { cfg } => {
                let tf = prune_end(cfg.prune_end_frac, t_max);
                let s_t = gmp_target(step, 0, tf, cfg.s_initial, cfg.s_final)?;
                let snap = gmp_step(layers, s_t)?;
                Ok(TraceRecord {
                    iteration: step,
                    decision: "prune".into(),
                    zeta_prune: 0.0,
                    zeta_grow: 0.0,
                    s_before,
                    s_after: snap.global_sparsity,
                    l_valid,
                    l_best: None,
                })
            }
            Controller::Granet { cfg } => {
                let tf = prune_end(cfg.gmp.prune_end_frac, t_max);
                let s_t = gmp_target(step, 0, tf, cfg.gmp.s_initial, cfg.gmp.s_final)?;
                let zeta = cosine_zeta(step, t_max, cfg.zeta0)?;
                let snap = granet_step(layers, s_t, zeta, adam)?;
                Ok(TraceRecord {
                    iteration: step,
                    decision: "prune+regen".into(),
                    zeta_prune: zeta,
                    zeta_grow: zeta,
                    s_before,
                    s_after: snap.global_sparsity,
                    l_valid,
                    l_best: None,
                })
            }
            Controller::Rigl { cfg } => {
                let zeta = cosine_zeta(step, t_max, cfg.zeta0)?;
                let snap = rigl_step(layers, zeta, adam)?;
                Ok(TraceRecord {
                    iteration: step,
                    decision: "exchange".into(),
                    zeta_prune: zeta,
                    zeta_grow: zeta,
                    s_before,
                    s_after: snap.global_sparsity,
                    l_valid,
                    l_best: None,
                })
            }
        }
    }
}

fn prune_end(frac: f64, t_max: u64) -> u64 {
    ((frac * t_max as f64).round() as u64).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Matrix, RngStream};

    fn layers(rng: &mut RngStream) -> Vec<SparseLayerState> {
        (0..2)
            .map(|i| {
                let mut l = SparseLayerState::new(
                    format!("l{i}"),
                    Matrix::from_fn(8, 8, |_, _| rng.normal(0.0, 1.0)),
                );
                l.last_grad = Matrix::from_fn(8, 8, |_, _| rng.normal(0.0, 1.0));
                l
            })
            .collect()
    }

    #[test]
    fn granet_trace_equals_gmp_trace_pointwise() {
        let mut rng = RngStream::new(50);
        let mut gmp_layers = layers(&mut rng);
        let mut granet_layers = gmp_layers.clone();
        let mut gmp = Controller::Gmp { cfg: GmpConfig::default() };
        let mut granet = Controller::Granet { cfg: GranetConfig::default() };
        let t_max = 200;
        for step in (20..=t_max).step_by(20) {
            let a = gmp.update(step, t_max, 1.0, &mut gmp_layers, None).unwrap();
            let b = granet.update(step, t_max, 1.0, &mut granet_layers, None).unwrap();
            assert_eq!(a.s_after, b.s_after, "step {step}");
        }
    }

    #[test]
    fn rigl_controller_keeps_sparsity_flat() {
        let mut rng = RngStream::new(51);
        let mut ls = layers(&mut rng);
        for l in &mut ls {
            l.mask = crate::sparsity::init_mask(8, 8, 0.5, &mut rng).unwrap();
            l.apply_mask();
        }
        let s0 = snapshot(&ls).unwrap().global_sparsity;
        let mut rigl = Controller::Rigl { cfg: RiglConfig::default() };
        for step in (20..=200).step_by(20) {
            let rec = rigl.update(step, 200, 1.0, &mut ls, None).unwrap();
            assert_eq!(rec.s_after, s0);
        }
    }

    #[test]
    fn pals_with_huge_lambda_never_expands() {
        let mut rng = RngStream::new(52);
        let mut ls = layers(&mut rng);
        let cfg = PalsConfig {
            lambda: 1e9,
            ..PalsConfig::default()
        };
        let mut ctl = Controller::Pals {
            cfg,
            state: ControllerState::new(0.0),
        };
        let t_max = 2000;
        let mut reached_max = false;
        for (i, step) in (20..=t_max).step_by(20).enumerate() {
            // adversarial loss wiggle
            let l_valid = 1.0 + ((i as f64) * 1.3).sin().abs() * 10.0;
            for l in ls.iter_mut() {
                l.last_grad = Matrix::from_fn(8, 8, |_, _| rng.normal(0.0, 1.0));
            }
            let rec = ctl.update(step, t_max, l_valid, &mut ls, None).unwrap();
            assert_ne!(rec.decision, "expand");
            if rec.s_before >= 0.9 {
                reached_max = true;
                assert_ne!(rec.decision, "shrink");
            }
        }
        assert!(reached_max, "should have shrunk to s_max");
    }
}
