//! Built-in target densities: the 1D cusp, the 2D constrained density, the
//! radiata-pine regressions, simple Gaussians for calibration studies, and
//! the epidemic renewal model family.

mod constrained;
mod cusp;
mod gaussian;
pub mod radiata;
pub mod renewal;

pub use constrained::{constrained2d, constrained2d_unbounded};
pub use cusp::cusp1d;
pub use gaussian::{gaussian1d, gaussian_diag, gaussian_diag_log_z};
