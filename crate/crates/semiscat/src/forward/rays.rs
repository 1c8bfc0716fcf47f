//! Deterministic ray-set generation.
//!
//! A dataset is a family of rays, each carrying a direction and a
//! source/receiver profile pair. Directions come from a Fibonacci
//! sphere set; for every direction, profile centers sit on circles of
//! prescribed transverse radii in the direction's orthonormal frame,
//! with a per-direction twist of the circle phase so anchors do not
//! align across directions. The construction uses no randomness:
//! identical configs yield identical rays.

use crate::forward::synth::{synthesize_f, RaySamples};
use crate::forward::testfn::{ExperimentConfig, ForwardError, Role, TestFunctionSpec};
use crate::potential::PotentialExpansion;
use crate::symbols::{orthonormal_frame, PairingSettings, SymbolPlan};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Geometry of the generated ray set. The total ray count is
/// `directions * offsets.len() * angles`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RaySetConfig {
    /// Number of Fibonacci sphere directions.
    pub directions: usize,
    /// Transverse circle radii for the profile centers.
    pub offsets: Vec<f64>,
    /// Anchors per circle.
    pub angles: usize,
    /// Support radius of each profile.
    pub profile_radius: f64,
    /// Peak amplitude of each profile.
    pub amplitude: f64,
}

impl Default for RaySetConfig {
    fn default() -> Self {
        RaySetConfig {
            directions: 16,
            offsets: vec![1.6, 2.4],
            angles: 8,
            profile_radius: 0.35,
            amplitude: 1.0,
        }
    }
}

impl RaySetConfig {
    pub fn count(&self) -> usize {
        self.directions * self.offsets.len() * self.angles
    }

    /// Checks the support-distance constraint of the profiles: every
    /// center must keep its whole support at transverse distance at
    /// least 1 from the axis through the origin.
    pub fn validate(&self) -> Result<(), ForwardError> {
        if !(self.profile_radius > 0.0) {
            return Err(ForwardError::BadRadius(self.profile_radius));
        }
        for &r in &self.offsets {
            let closest = r - self.profile_radius;
            if closest < 1.0 {
                return Err(ForwardError::SupportTooClose { closest });
            }
        }
        if self.directions == 0 || self.angles == 0 || self.offsets.is_empty() {
            return Err(ForwardError::EmptyRaySet);
        }
        Ok(())
    }
}

/// Well-spread unit directions from the golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            // Midpoint offsets keep the poles free.
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

/// Generates the source/receiver pairs of the configured ray set.
pub fn generate_rays(cfg: &RaySetConfig) -> Result<Vec<(TestFunctionSpec, TestFunctionSpec)>, ForwardError> {
    cfg.validate()?;
    let golden_frac = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut out = Vec::with_capacity(cfg.count());
    for (i, omega) in fibonacci_sphere(cfg.directions).into_iter().enumerate() {
        let frame = orthonormal_frame(omega);
        let twist = (i as f64 * golden_frac).fract();
        for (oi, &r) in cfg.offsets.iter().enumerate() {
            for j in 0..cfg.angles {
                let th = 2.0 * PI * (j as f64 + twist + 0.5 * oi as f64) / cfg.angles as f64;
                let (s, c) = th.sin_cos();
                let center = [
                    r * (c * frame.u1[0] + s * frame.u2[0]),
                    r * (c * frame.u1[1] + s * frame.u2[1]),
                    r * (c * frame.u1[2] + s * frame.u2[2]),
                ];
                let mk = |role: Role| TestFunctionSpec {
                    omega,
                    center,
                    radius: cfg.profile_radius,
                    amplitude: cfg.amplitude,
                    role,
                };
                out.push((mk(Role::Source), mk(Role::Receiver)));
            }
        }
    }
    Ok(out)
}

/// Log-spaced h grid on [lo, hi], ascending.
pub fn log_h_grid(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Synthesizes matrix elements for every ray of the set, in parallel.
/// The output order matches the input order, so the result is
/// deterministic regardless of scheduling.
pub fn synthesize_dataset(
    cfg: &ExperimentConfig,
    rays: &[(TestFunctionSpec, TestFunctionSpec)],
    potential: &PotentialExpansion,
    plan: &SymbolPlan,
    h_grid: &[f64],
    settings: &PairingSettings,
) -> Result<Vec<RaySamples>, ForwardError> {
    rays.par_iter()
        .map(|(src, rcv)| synthesize_f(cfg, src, rcv, potential, plan, h_grid, settings))
        .collect()
}
