//! Numerics toolkit around one correspondence: a nonlinear Fokker-Planck
//! equation with Nemytskii coefficients on one side, and the stochastic
//! dynamics sharing its time marginals on the other.
//!
//! The pieces, in pipeline order:
//!
//! * [`coefficients`] — evaluable coefficient pairs `(b, a)`, their
//!   transforms `beta = a r`, `b* = b r`, and a lattice audit of the
//!   structural hypotheses (monotonicity, nondegeneracy, boundedness,
//!   envelope-Lipschitz drift, finite sup-norm constant).
//! * [`fpke`] — conservative finite-volume solver on a truncated box,
//!   plus checkers for the weak formulation, mass/positivity, the L1
//!   contraction and the sup-norm growth bound.
//! * [`sde`] — the linearized dynamics with the solved density frozen
//!   into the coefficients: seeded Brownian paths with bridge refinement,
//!   Euler and Heun-drift integrators, the two-integrator coupling that
//!   serves as a pathwise-uniqueness proxy, and ensemble marginals for
//!   the superposition comparison.
//! * [`particles`] — the self-consistent mean-field system, where each
//!   particle reads the drift and diffusion off a per-step density
//!   estimate of the whole cloud.
//! * [`stats`] — L1 / sup / Wasserstein-1 distances and reference
//!   profiles.
//! * [`io`] — the CSV formats shared with the command-line front-end.
//!
//! Everything stochastic flows from explicit seeds ([`rng`]): reruns are
//! bit-identical, independent of thread count.

pub mod coefficients;
pub mod error;
pub mod fpke;
pub mod grid;
pub mod io;
pub mod particles;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
