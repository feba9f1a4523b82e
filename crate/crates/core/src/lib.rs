//! Discrete averaging operators on the integers along polynomial orbits and
//! along the primes, the discrete fractional integrals that dominate them,
//! and numerical checks of their `ℓ^p → ℓ^{p'}` improving bounds.

pub mod bounds;
pub mod conv;
pub mod error;
pub mod extremize;
pub mod kernel;
pub mod primes;
pub mod signal;
pub mod suite;
pub mod sweep;

pub use bounds::{improving_ratio, CheckReport, OperatorSpec, RatioRecord, Verdict};
pub use conv::{convolution_lp_norm, convolve, ConvPath};
pub use error::{Error, Result};
pub use kernel::{IntPolynomial, Kernel, KernelKind, KernelMeta};
pub use primes::PrimeTable;
pub use signal::{dual_exponent, lp_norm, distribution_function, ExponentPair, Signal};
pub use sweep::{regress_exponent, run_sweep, SweepConfig, SweepReport};
