//! Derived quantities: contrast, linewidths, dephasing fits and the readout
//! model.

pub mod contrast;
pub mod dephasing;
pub mod dynamics;
pub mod fit;
pub mod measurement;
pub mod trench;

pub use contrast::{at_only_contrast, at_only_spread, parabolic_contrast, parabolic_contrast_with, AtSpread, Contrast};
pub use dephasing::{
    default_tphi01_grid, dephasing_residual, fit_dephasing, sensitivity_curve, DephasingParam, FitOptions, FitReport, FittedParam,
};
pub use dynamics::{narrows_monotonically, notch_widths, suppression_vs_time, NotchWidth, Suppression};
pub use fit::{linewidth_fit, notch_fit, LineFit, Vertex};
pub use measurement::{apply_measurement, expected_observation, invert_measurement};
pub use trench::{trench_locus, trench_locus_with, TrenchColumn, TrenchReport};
