//! Direct-action propagators, emission statistics and transactional Monte Carlo.
//!
//! The crate is organized bottom-up:
//!
//! - [`algebra`]: exact linear algebra of the retarded/advanced ×
//!   positive/negative-frequency kernels and the identities among them.
//! - [`grid`] and [`numeric`]: a 1+1D periodic lattice and numerical
//!   evaluation of every kernel for a massless scalar field, including an
//!   independent momentum-space route to the Feynman kernel.
//! - [`currents`]: classical scalar sources, their spectra, and the
//!   current-kernel-current double integral.
//! - [`interaction`]: the split of the first-order action into a Coulomb
//!   (time-symmetric) part and a radiative part, the mean photon number,
//!   vacuum persistence and Poisson emission statistics.
//! - [`transaction`]: absorber sets, offer waves, the `e²` gate and Born-rule
//!   selection of the single absorbing partner.
//! - [`scenario`]: JSON scenario files and canonical reports, driven by the
//!   `direct-action` binary.
//!
//! Units are natural (`ħ = c = 1`) throughout.

pub mod algebra;
pub mod currents;
pub mod error;
pub mod grid;
pub mod interaction;
pub mod numeric;
pub mod report;
pub mod scenario;
pub mod streams;
pub mod transaction;

pub use algebra::{canonical, combine, reflect, verify_identity_suite, BasisKernel, ExactComplex, KernelExpr, KernelName};
pub use error::{Error, Result};
pub use grid::{GridSpec, Mode, SpacetimeGrid};
pub use numeric::{eval_cut_propagator, eval_feynman_momentum, eval_kernel, residual, FrequencySign, KernelField};
