//! Semiclassical test functions.
//!
//! A test function is built from a fixed smooth profile Phi by three
//! steps: a low-pass cutoff chi0(h^eps D), an L2-unitary dilation
//! U(h^delta), and a plane-wave modulation at frequency sqrt(lambda)/h.
//! The cutoff commutes with neither of the unitary steps' grids, so we
//! keep all data in the *reference frame*: samples of
//! g_h = chi0(h^eps D) Phi on an h-independent grid. Dilation and
//! modulation are exact bookkeeping on top of that representation; the
//! full physical function is only materialized on demand.
//!
//! In the reference frame the Fourier transform of the physical
//! function is, with eta the reference frequency,
//!
//!   (F Phi_h)(xi) = h^{-3 delta/2} * ghat_h(eta),
//!   eta = (h xi - sqrt(lambda) omega) / h^{1+delta},
//!
//! so frequency-shell statements about h*xi translate into literal
//! radial statements about eta.

use crate::forward::grid::{FourierFunction, FourierGrid, GridFunction};
use crate::smooth::{Bump, EnergyWindow, RadialCutoff};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("lambda must be positive (got {0})")]
    BadLambda(f64),
    #[error("epsilon must satisfy 0 < epsilon < 1 + delta (got epsilon = {epsilon}, delta = {delta})")]
    BadEpsilon { epsilon: f64, delta: f64 },
    #[error("delta must exceed 1/(rho_1 - 1) = {bound} (got {delta})")]
    BadDelta { delta: f64, bound: f64 },
    #[error("only dimension 3 is supported (got {0})")]
    BadDimension(usize),
    #[error("window and cutoff widths must be positive")]
    BadWidths,
    #[error("h must lie in (0, 1] (got {0})")]
    BadH(f64),
    #[error("direction must be a unit vector (|omega| = {0})")]
    NotUnit(f64),
    #[error("profile radius must be positive (got {0})")]
    BadRadius(f64),
    #[error(
        "profile support reaches transverse distance {closest} from the axis; it must stay at distance >= 1"
    )]
    SupportTooClose { closest: f64 },
    #[error("grid spacing {spacing} is too coarse to resolve a profile of radius {radius}")]
    GridTooCoarse { spacing: f64, radius: f64 },
    #[error("profile support leaves the grid box (needs half-width {needed}, grid has {available})")]
    ProfileOutsideGrid { needed: f64, available: f64 },
    #[error(
        "physical realization at h = {h} needs {needed} points per axis, more than the allowed {allowed} (h too small for this grid)"
    )]
    NyquistViolation { h: f64, needed: usize, allowed: usize },
    #[error("source and receiver must share the same direction")]
    MismatchedOmega,
    #[error("ray set needs at least one direction, one offset, and one angle")]
    EmptyRaySet,
    #[error("symbol plan disagrees with the experiment (plan delta {plan_delta}, lambda {plan_lambda})")]
    PlanMismatch { plan_delta: f64, plan_lambda: f64 },
    #[error(transparent)]
    Symbol(#[from] crate::symbols::SymbolError),
}

/// Fixed parameters of a scattering experiment: the energy window, the
/// frequency cutoff, the two scaling exponents, and the reference grid
/// on which profiles are discretized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Central energy lambda > 0.
    pub lambda: f64,
    /// The energy multiplier is exactly 1 on [lambda - w, lambda + w].
    pub window_half_width: f64,
    /// Width of the smooth shoulders outside the plateau.
    pub window_shoulder: f64,
    /// Radial frequency cutoff: 1 inside `chi0_inner`, 0 outside `chi0_outer`.
    pub chi0_inner: f64,
    pub chi0_outer: f64,
    /// Dilation exponent.
    pub delta: f64,
    /// Cutoff exponent, 0 < epsilon < 1 + delta.
    pub epsilon: f64,
    /// Ambient dimension; only 3 is supported.
    pub dim: usize,
    /// Reference grid: points per axis (even) and box half-width.
    pub grid_points: usize,
    pub grid_half_width: f64,
    /// Per-axis cap when materializing the physical function.
    pub max_physical_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::with_defaults(1.0, 2.0)
    }
}

impl ExperimentConfig {
    /// Defaults shared by the bundled experiments: unit energy, a
    /// modest window, cutoff radii (1, 2), and epsilon at the midpoint
    /// of its admissible range.
    pub fn with_defaults(lambda: f64, delta: f64) -> Self {
        ExperimentConfig {
            lambda,
            window_half_width: 0.2,
            window_shoulder: 0.1,
            chi0_inner: 1.0,
            chi0_outer: 2.0,
            delta,
            epsilon: (1.0 + delta) / 2.0,
            dim: 3,
            grid_points: 64,
            grid_half_width: 3.0,
            max_physical_points: 512,
        }
    }

    pub fn validate(&self) -> Result<(), ForwardError> {
        if !(self.lambda > 0.0) {
            return Err(ForwardError::BadLambda(self.lambda));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 + self.delta) {
            return Err(ForwardError::BadEpsilon {
                epsilon: self.epsilon,
                delta: self.delta,
            });
        }
        if self.dim != 3 {
            return Err(ForwardError::BadDimension(self.dim));
        }
        if !(self.window_half_width > 0.0
            && self.window_shoulder > 0.0
            && self.chi0_inner > 0.0
            && self.chi0_outer > self.chi0_inner
            && self.grid_half_width > 0.0)
        {
            return Err(ForwardError::BadWidths);
        }
        if self.lambda - self.window_half_width - self.window_shoulder <= 0.0 {
            return Err(ForwardError::BadWidths);
        }
        Ok(())
    }

    /// Checks `delta` against the decay rate of the leading potential term.
    pub fn validate_against(&self, rho_leading: f64) -> Result<(), ForwardError> {
        let bound = 1.0 / (rho_leading - 1.0);
        if !(self.delta > bound) {
            return Err(ForwardError::BadDelta {
                delta: self.delta,
                bound,
            });
        }
        Ok(())
    }

    pub fn energy_window(&self) -> EnergyWindow {
        EnergyWindow::centered(self.lambda, self.window_half_width, self.window_shoulder)
    }

    pub fn chi0(&self) -> RadialCutoff {
        RadialCutoff::new(self.chi0_inner, self.chi0_outer)
    }

    pub fn reference_grid(&self) -> FourierGrid {
        FourierGrid::new(self.grid_points, [0.0; 3], self.grid_half_width)
    }
}

/// Which side of the pairing a profile feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Source,
    Receiver,
}

/// A smooth compactly supported profile attached to a propagation
/// direction. Validity requires the whole support to keep transverse
/// distance at least 1 from the axis through the origin, so that every
/// line x + t*omega met by the profile passes outside the unit cylinder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub omega: [f64; 3],
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
    pub role: Role,
}

impl TestFunctionSpec {
    pub fn validate(&self) -> Result<(), ForwardError> {
        let norm = (self.omega.iter().map(|c| c * c).sum::<f64>()).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(ForwardError::NotUnit(norm));
        }
        if !(self.radius > 0.0) {
            return Err(ForwardError::BadRadius(self.radius));
        }
        let along: f64 = self
            .center
            .iter()
            .zip(&self.omega)
            .map(|(c, w)| c * w)
            .sum();
        let trans2: f64 = (0..3)
            .map(|i| {
                let t = self.center[i] - along * self.omega[i];
                t * t
            })
            .sum();
        let closest = trans2.sqrt() - self.radius;
        if closest < 1.0 {
            return Err(ForwardError::SupportTooClose { closest });
        }
        Ok(())
    }

    pub fn bump(&self) -> Bump {
        Bump::new(self.center, self.radius, self.amplitude)
    }
}

/// The reference-frame realization of one test function at one value
/// of h: the raw profile samples and the Fourier data of
/// g_h = chi0(h^eps D) Phi.
#[derive(Debug, Clone)]
pub struct HTestFunction {
    pub h: f64,
    pub omega: [f64; 3],
    /// Plain profile samples (before the cutoff).
    pub base: GridFunction,
    /// Fourier data of the cutoff profile on the reference nodes.
    pub fourier: FourierFunction,
    /// The cutoff vanishes identically for |eta| >= this radius.
    pub zero_radius: f64,
}

impl HTestFunction {
    /// L2 norm of the physical function (dilation and modulation are
    /// unitary, so this is the norm of the cutoff profile).
    pub fn norm(&self) -> f64 {
        self.fourier.l2_norm()
    }

    /// L2 norm of the raw profile.
    pub fn base_norm(&self) -> f64 {
        self.base.l2_norm()
    }
}

/// Builds the reference-frame test function for one h.
pub fn build_test_function(
    spec: &TestFunctionSpec,
    cfg: &ExperimentConfig,
    h: f64,
) -> Result<HTestFunction, ForwardError> {
    cfg.validate()?;
    spec.validate()?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(ForwardError::BadH(h));
    }
    let grid = cfg.reference_grid();
    if spec.radius < 2.0 * grid.spacing() {
        return Err(ForwardError::GridTooCoarse {
            spacing: grid.spacing(),
            radius: spec.radius,
        });
    }
    let needed = spec
        .center
        .iter()
        .map(|c| c.abs())
        .fold(0.0, f64::max)
        + spec.radius;
    if needed > cfg.grid_half_width {
        return Err(ForwardError::ProfileOutsideGrid {
            needed,
            available: cfg.grid_half_width,
        });
    }
    let bump = spec.bump();
    let base = grid.sample(|x| bump.eval(x));
    let chi0 = cfg.chi0();
    let scale = h.powf(cfg.epsilon);
    let mut fourier = base.fourier();
    fourier.multiply(|eta| {
        let r = (eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2]).sqrt();
        chi0.eval(scale * r)
    });
    Ok(HTestFunction {
        h,
        omega: spec.omega,
        base,
        fourier,
        zero_radius: cfg.chi0_outer / scale,
    })
}

/// Outcome of the energy-localization check at one h.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Report {
    pub h: f64,
    /// Distance from the frequency-shell energies to the set where the
    /// window departs from 1; positive means the window acts as the
    /// identity on the whole shell.
    pub margin: f64,
    /// Threshold below which the margin is positive.
    pub h0: f64,
    /// Largest pointwise change produced by the window multiplier.
    pub max_diff: f64,
    /// Measured grid equality: max_diff at or below roundoff scale.
    pub equal_on_grid: bool,
}

/// Energy sweep of the frequency shell: the shell |h xi - sqrt(l) w|
/// <= r maps to energies within 2 sqrt(lambda) r + r^2 of lambda.
fn shell_margin(cfg: &ExperimentConfig, h: f64) -> f64 {
    let r = cfg.chi0_outer * h.powf(1.0 + cfg.delta - cfg.epsilon);
    cfg.window_half_width - (2.0 * cfg.lambda.sqrt() * r + r * r)
}

/// Largest h whose shell stays inside the window plateau.
fn margin_threshold(cfg: &ExperimentConfig) -> f64 {
    let r_star = (cfg.lambda + cfg.window_half_width).sqrt() - cfg.lambda.sqrt();
    (r_star / cfg.chi0_outer).powf(1.0 / (1.0 + cfg.delta - cfg.epsilon))
}

/// Applies the energy window to the test function and reports whether
/// it acted as the identity on the grid, together with the closed-form
/// margin and threshold.
pub fn verify_lemma2(
    spec: &TestFunctionSpec,
    cfg: &ExperimentConfig,
    h: f64,
) -> Result<Lemma2Report, ForwardError> {
    let tf = build_test_function(spec, cfg, h)?;
    let window = cfg.energy_window();
    let lambda = cfg.lambda;
    let t = h.powf(1.0 + cfg.delta);
    let mut windowed = tf.fourier.clone();
    windowed.multiply(|eta| {
        let dot = eta[0] * tf.omega[0] + eta[1] * tf.omega[1] + eta[2] * tf.omega[2];
        let n2 = eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2];
        let energy = lambda + 2.0 * lambda.sqrt() * t * dot + t * t * n2;
        window.eval(energy)
    });
    let mut max_diff = 0.0f64;
    let mut max_val = 0.0f64;
    for (a, b) in windowed.values.iter().zip(&tf.fourier.values) {
        max_diff = max_diff.max((a - b).norm());
        max_val = max_val.max(b.norm());
    }
    Ok(Lemma2Report {
        h,
        margin: shell_margin(cfg, h),
        h0: margin_threshold(cfg),
        max_diff,
        equal_on_grid: max_diff <= 1e-12 * max_val.max(f64::MIN_POSITIVE),
    })
}

/// Materializes the physical function
/// exp(i sqrt(lambda) x.omega / h) h^{3 delta/2} g_h(h^delta x)
/// on the dilated box with `points` nodes per axis. The dilated nodes
/// refine the reference box, so g_h is evaluated by exact
/// trigonometric interpolation (zero padding).
pub fn realize_physical(
    tf: &HTestFunction,
    cfg: &ExperimentConfig,
    points: usize,
) -> Result<GridFunction, ForwardError> {
    let scale = tf.h.powf(-cfg.delta);
    let grid = cfg.reference_grid();
    // Highest physical frequency present: modulation plus the dilated band.
    let band = tf.zero_radius.min(grid.nyquist() * 3.0f64.sqrt());
    let xi_max = cfg.lambda.sqrt() / tf.h + tf.h.powf(cfg.delta) * band;
    let phys_half_width = scale * cfg.grid_half_width;
    let needed_f = (xi_max * phys_half_width / std::f64::consts::PI).ceil() * 2.0 + 2.0;
    let needed = (needed_f as usize).max(grid.n);
    if points < needed || points > cfg.max_physical_points {
        return Err(ForwardError::NyquistViolation {
            h: tf.h,
            needed,
            allowed: points.min(cfg.max_physical_points),
        });
    }
    let fine = tf.fourier.zero_pad(points).inverse();
    let phys_grid = FourierGrid::new(
        points,
        [0.0; 3],
        phys_half_width,
    );
    let amp = tf.h.powf(1.5 * cfg.delta);
    let freq = cfg.lambda.sqrt() / tf.h;
    let mut values = Vec::with_capacity(phys_grid.len());
    for i in 0..points {
        for j in 0..points {
            for k in 0..points {
                let x = phys_grid.point(i, j, k);
                let phase =
                    freq * (x[0] * tf.omega[0] + x[1] * tf.omega[1] + x[2] * tf.omega[2]);
                values.push(
                    fine.values[fine.grid.index(i, j, k)]
                        * Complex64::from_polar(amp, phase),
                );
            }
        }
    }
    Ok(GridFunction {
        grid: phys_grid,
        values,
    })
}
