//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)).
//! Shared by the Hamiltonian flow and the transport line solver; the
//! state is a flat f64 slice so complex systems pack in pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (step {step:.3e})")]
    StepUnderflow { t: f64, step: f64 },
    #[error("step budget exhausted after {steps} steps at t = {t}")]
    StepBudget { t: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Optional cap on |h|; zero means uncapped.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000, max_step: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrates y' = f(t, y) from t0 to t1 (either direction) in place.
/// Calls `observe(t, y)` after every accepted step when provided.
pub fn integrate<F>(
    f: &mut F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
    mut observe: Option<&mut dyn FnMut(f64, &[f64])>,
) -> Result<OdeStats, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut stats = OdeStats::default();
    if t0 == t1 {
        return Ok(stats);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    f(t, y, &mut k1);
    stats.rhs_evals += 1;

    // Initial step from the rhs scale.
    let y_scale = y.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-8);
    let f_scale = k1.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut h = if f_scale > 0.0 {
        (0.01 * y_scale / f_scale).min(span)
    } else {
        0.1 * span
    };
    if opts.max_step > 0.0 {
        h = h.min(opts.max_step);
    }
    h *= dir;

    let mut fsal_valid = true;
    loop {
        if (t - t1) * dir >= 0.0 {
            return Ok(stats);
        }
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(OdeError::StepBudget { t, steps: stats.steps });
        }
        // A landing step is snapped onto t1 exactly when accepted;
        // otherwise t + (t1 - t) can round a hair short and the
        // residual retriggers the clamp below the underflow floor.
        let landing = (t + h - t1) * dir >= 0.0;
        if landing {
            h = t1 - t;
        }
        if !landing && h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t, step: h });
        }
        if !fsal_valid {
            f(t, y, &mut k1);
            stats.rhs_evals += 1;
            fsal_valid = true;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + h, &ynew, &mut k7);
        stats.rhs_evals += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let tol = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let r = e / tol;
            err_sq += r * r;
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            t = if landing { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            stats.steps += 1;
            if let Some(obs) = observe.as_mut() {
                obs(t, y);
            }
        } else {
            stats.rejected += 1;
            fsal_valid = false;
        }

        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if opts.max_step > 0.0 && h.abs() > opts.max_step {
            h = opts.max_step * dir;
        }
    }
}

/// Integrates through an ordered list of checkpoint times, recording
/// the state at each. Checkpoints must be monotone in the direction of
/// integration.
pub fn integrate_checkpoints<F>(
    f: &mut F,
    t0: f64,
    checkpoints: &[f64],
    y: &mut [f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, OdeStats), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut total = OdeStats::default();
    let mut t = t0;
    for &tc in checkpoints {
        let stats = integrate(f, t, tc, y, opts, None)?;
        total.steps += stats.steps;
        total.rejected += stats.rejected;
        total.rhs_evals += stats.rhs_evals;
        out.push(y.to_vec());
        t = tc;
    }
    Ok((out, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay_is_accurate() {
        let mut y = vec![1.0];
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        integrate(&mut |_t, y, dy| dy[0] = -y[0], 0.0, 3.0, &mut y, &opts, None).unwrap();
        assert_relative_eq!(y[0], (-3.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn harmonic_oscillator_round_trip() {
        // y'' = -y over a full period, integrated backwards too.
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let mut y = vec![1.0, 0.0];
        let tau = 2.0 * std::f64::consts::PI;
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        integrate(&mut f, 0.0, tau, &mut y, &opts, None).unwrap();
        integrate(&mut f, tau, 0.0, &mut y, &opts, None).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn checkpoints_match_single_shot() {
        let opts = OdeOptions::default();
        let mut f = |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = (t).cos();
        let mut y1 = vec![0.0];
        let (states, _) =
            integrate_checkpoints(&mut f, 0.0, &[0.5, 1.0, 2.0], &mut y1, &opts).unwrap();
        for (tc, s) in [0.5f64, 1.0, 2.0].iter().zip(&states) {
            assert_relative_eq!(s[0], tc.sin(), epsilon = 1e-9);
        }
    }
}
