//! Forward model: semiclassical test functions on FFT grids, the
//! energy-localization check, and synthesis of scattering samples from
//! the coefficient expansion.

pub mod grid;
pub mod rays;
pub mod synth;
pub mod testfn;

pub use grid::{FourierFunction, FourierGrid, GridFunction};
pub use rays::{fibonacci_sphere, generate_rays, log_h_grid, synthesize_dataset, RaySetConfig};
pub use synth::{synthesize_f, RaySamples, ScatteringSample};
pub use testfn::{
    build_test_function, realize_physical, verify_lemma2, ExperimentConfig, ForwardError,
    HTestFunction, Lemma2Report, Role, TestFunctionSpec,
};
