//! Numerical workbench for matrix Poincaré inequalities and matrix concentration.
//!
//! The library verifies, on concrete finite models, the machinery of matrix-valued
//! Markov semigroup analysis:
//!
//! - [`matcore`] — Hermitian matrices, spectral functional calculus, PSD-order checks;
//! - [`chain`] — finite state spaces, reversible generators, the semigroup P_t = e^{tQ};
//! - [`dirichlet`] — matrix variance, carré du champ Γ, Dirichlet form 𝓔, and
//!   Poincaré certification Var_μ(f) ⪯ α·𝓔(f);
//! - [`product`] — the coordinate-resampling process on product measures
//!   (closed-form semigroup, Efron–Stein with constant 1);
//! - [`gaussian`] — matrix polynomials under the standard Gaussian measure and the
//!   Ornstein–Uhlenbeck carré du champ Σᵢ(∂ᵢf)²;
//! - [`scp`] — k-homogeneous cube measures with the stochastic covering property,
//!   coupling construction by max flow, and the explicit reversible generator;
//! - [`concentration`] — exponential tail bounds d·exp(−t²/(2αv + t√(2αv))),
//!   Laplace-transform bounds, Chernoff optimization, exact and Monte Carlo tails;
//! - [`traceineq`] — a seeded fuzzer for the trace inequalities underlying the
//!   concentration proofs, with counterexample shrinking.
//!
//! Every check returns a [`check::CheckResult`] carrying a signed margin and the
//! tolerance it was judged against; all randomness is seed-deterministic.
//!
//! The `matconc` binary (see `src/bin/matconc.rs`) exposes batch suites over JSON
//! scenario files; `examples/` holds one runnable walkthrough per capability.

pub mod app;
pub mod chain;
pub mod check;
pub mod concentration;
pub mod corpus;
pub mod dirichlet;
pub mod error;
pub mod gaussian;
pub mod matcore;
pub mod product;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod scp;
pub mod traceineq;

pub use check::{CheckResult, Tolerance};
pub use error::{Error, Result};
pub use matcore::{CMatrix, Complex64, HermitianMatrix};
