//! Finite-blocklength error-probability evaluation for the scalar channel
//! `v[k] = g q[k] + z[k]` under scaled nearest-neighbor decoding with a
//! mismatched channel estimate `ĝ`.
//!
//! The random-coding union bound with parameter `s` (RCUs) is evaluated
//! conditionally on `(g, ĝ)`. The per-symbol generalized information density
//! is a Hermitian quadratic form in the complex Gaussian pair `(q, z)` plus a
//! constant, which makes its cumulant generating function available in closed
//! form. Three estimators are provided on top of that:
//!
//! - [`epsilon_saddlepoint`]: exponentially tilted Gaussian expansion,
//! - [`epsilon_normal`]: the central-limit (normal) approximation,
//! - [`epsilon_rcus_mc`]: an importance-sampled Monte Carlo estimate of the
//!   bound itself, used as the reference oracle.
//!
//! [`optimize_s`] tightens the bound over the decoding-metric parameter `s`.

mod density;
mod error;
mod mc;
mod optimize;
mod point;
mod saddlepoint;
pub mod tail;

pub use density::{gen_info_density, quad_decomposition, CgfTriple, QuadDecomposition};
pub use error::FblError;
pub use mc::epsilon_rcus_mc;
pub use optimize::{optimize_s, optimize_s_with, S_GRID_EXPONENTS};
pub use point::{log_m_minus_1, ScalarChannelPoint};
pub use saddlepoint::{
    epsilon_normal, epsilon_saddlepoint, epsilon_saddlepoint_with, solve_saddlepoint,
    EpsilonEstimate, LowRateBranch, Method,
};

pub use num_complex::Complex64;
