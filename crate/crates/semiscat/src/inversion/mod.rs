//! The inverse pipeline: power-series fits of sampled matrix elements,
//! layer stripping of homogeneous potential terms, and decay-rate
//! diagnostics for comparing data sets.

mod diagnostic;
mod fit;
mod recover;

pub use diagnostic::{schwartz_diagnostic, DecayReport, DecayVerdict, DiagnosticError};
pub use fit::{fit_powers, CoefficientFit, FitError, FitMethod};
pub use recover::{
    plan_for_inversion, reconstruct, recover_layer, InversionConfig, InversionError, LayerReport,
    RayData, ReconstructionResult,
};
