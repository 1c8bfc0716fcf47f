//! Decay-rate comparison of two measurement sets.
//!
//! When two potentials share their first few homogeneous terms, the
//! matrix elements they produce agree up to the first exponent whose
//! coefficient differs, so the difference |F_1 - F_2|(h) decays at
//! least like that power of h. Regressing log-difference on log-h over
//! the smallest sampled h therefore reveals the first disagreeing
//! lattice node; agreement down to roundoff at every h is reported as
//! "maximal" rather than as a rate.

use crate::forward::ScatteringSample;
use serde::Serialize;
use thiserror::Error;

/// Relative floor below which a difference counts as numerically zero.
const FLOOR_RELATIVE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiagnosticError {
    #[error("need at least {need} shared h samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("sample {index} carries different h values ({a} vs {b})")]
    GridMismatch { index: usize, a: f64, b: f64 },
    #[error("no comparison exponents supplied")]
    NoExponents,
}

/// How far down the lattice the two data sets agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayVerdict {
    /// The difference decays no faster than the leading exponent: the
    /// potentials already differ in their shallowest recoverable term.
    DiffersAtLeading,
    /// The first `nodes` coefficients agree; the one after them is the
    /// first to differ.
    AgreesThrough { nodes: usize },
    /// The difference sits at the roundoff floor everywhere; the data
    /// agree to all supplied orders.
    Maximal,
}

/// Outcome of the rate regression.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// Exponents the slope was tested against, ascending.
    pub exponents: Vec<f64>,
    /// Fitted log-log slope of |F_1 - F_2| over the small-h half.
    pub slope: f64,
    /// passes[k] records slope >= exponents[k] - threshold.
    pub passes: Vec<bool>,
    pub verdict: DecayVerdict,
    /// True when the difference never rose above the roundoff floor,
    /// in which case the slope is a sentinel above every exponent.
    pub floored: bool,
    pub threshold: f64,
}

/// Compares two runs of the same experiment and classifies how fast
/// their difference decays. Both sample lists must share the same h
/// grid. `threshold` is the slope slack (0.05 is a sound default).
pub fn schwartz_diagnostic(
    a: &[ScatteringSample],
    b: &[ScatteringSample],
    exponents: &[f64],
    threshold: f64,
) -> Result<DecayReport, DiagnosticError> {
    if exponents.is_empty() {
        return Err(DiagnosticError::NoExponents);
    }
    let need = 4;
    if a.len() != b.len() || a.len() < need {
        return Err(DiagnosticError::TooFewSamples {
            got: a.len().min(b.len()),
            need,
        });
    }
    let mut exponents = exponents.to_vec();
    exponents.sort_by(|x, y| x.total_cmp(y));

    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(a.len());
    for (i, (sa, sb)) in a.iter().zip(b).enumerate() {
        if sa.h != sb.h {
            return Err(DiagnosticError::GridMismatch {
                index: i,
                a: sa.h,
                b: sb.h,
            });
        }
        pairs.push((sa.h, (sa.value - sb.value).norm()));
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

    let scale = a
        .iter()
        .zip(b)
        .map(|(sa, sb)| sa.value.norm().max(sb.value.norm()))
        .fold(0.0f64, f64::max);
    let max_diff = pairs.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let floored = max_diff <= FLOOR_RELATIVE * scale.max(f64::MIN_POSITIVE);

    let slope = if floored {
        exponents.last().unwrap() + 1.0
    } else {
        // Regression over the small-h half, where the leading
        // difference term dominates.
        let half = (pairs.len() / 2).max(need / 2);
        let used: Vec<(f64, f64)> = pairs
            .iter()
            .take(half)
            .filter(|p| p.1 > 0.0)
            .map(|p| (p.0.ln(), p.1.ln()))
            .collect();
        if used.len() < 2 {
            exponents.last().unwrap() + 1.0
        } else {
            let n = used.len() as f64;
            let mx = used.iter().map(|u| u.0).sum::<f64>() / n;
            let my = used.iter().map(|u| u.1).sum::<f64>() / n;
            let num: f64 = used.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
            let den: f64 = used.iter().map(|u| (u.0 - mx) * (u.0 - mx)).sum();
            num / den
        }
    };

    let passes: Vec<bool> = exponents.iter().map(|e| slope >= e - threshold).collect();
    let verdict = if floored || slope > exponents.last().unwrap() + threshold {
        DecayVerdict::Maximal
    } else {
        // A difference whose first disagreeing node sits at exponent
        // nu_j regresses to slope ~ nu_j, passing checks 0..=j; the
        // nodes strictly before j agree.
        let first_fail = passes.iter().take_while(|p| **p).count();
        match first_fail.saturating_sub(1) {
            0 => DecayVerdict::DiffersAtLeading,
            nodes => DecayVerdict::AgreesThrough { nodes },
        }
    };

    Ok(DecayReport {
        exponents,
        slope,
        passes,
        verdict,
        floored,
        threshold,
    })
}
