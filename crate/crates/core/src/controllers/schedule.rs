//! Shared schedules: cosine decay for the exchange rate and the cubic
//! gradual-pruning curve.

use crate::error::{Error, Result};

/// zeta_t = (zeta0 / 2) * (1 + cos(pi * t / t_max)).
pub fn cosine_zeta(t: u64, t_max: u64, zeta0: f64) -> Result<f64> {
    if t_max == 0 {
        return Err(Error::Config("cosine schedule with t_max = 0".into()));
    }
    let frac = (t as f64 / t_max as f64).clamp(0.0, 1.0);
    Ok(zeta0 / 2.0 * (1.0 + (std::f64::consts::PI * frac).cos()))
}

/// Cubic sparsity ramp from s_i at t0 to s_f at tf:
/// s_t = s_f + (s_i - s_f) * (1 - (t - t0)/(tf - t0))^3.
pub fn gmp_target(t: u64, t0: u64, tf: u64, s_initial: f64, s_final: f64) -> Result<f64> {
    if tf <= t0 {
        return Err(Error::Config(format!(
            "gradual pruning schedule needs tf > t0 (got t0={t0}, tf={tf})"
        )));
    }
    let progress = ((t.saturating_sub(t0)) as f64 / (tf - t0) as f64).clamp(0.0, 1.0);
    let keep = 1.0 - progress;
    Ok(s_final + (s_initial - s_final) * keep * keep * keep)
}
