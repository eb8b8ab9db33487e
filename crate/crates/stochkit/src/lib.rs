//! Structure analysis of finite row-stochastic matrices and the graded
//! operator calculus built on top of them.
//!
//! The crate has two arithmetic layers. Everything combinatorial or
//! ratio-shaped (supports, communicating classes, periods, stationary
//! vectors, the degree-wise ratio criterion) is computed on exact rationals;
//! square-root-bearing quantities (fiber inner products, operator norms)
//! live in double precision with a default tolerance of `1e-9`.
//!
//! Module map:
//! - [`matrix`]: exact stochastic matrices, powers, supports, Schur calculus;
//! - [`chain`]: communicating classes, periods, cyclic decompositions,
//!   stationary distributions;
//! - [`subproduct`]: degree-graded fibers supported on `E(P^n)`, their
//!   inner products and multiplication maps, and the ratio criterion;
//! - [`iso`]: permutation searches and the three-valued isomorphism
//!   decision procedures;
//! - [`fock`]: truncated graded operator calculus (shifts, adjoints,
//!   projections, Fourier/Cesàro grading, norm and convergence checks);
//! - [`cuntz`]: the sorted-block-size invariant for essential matrices;
//! - [`regularity`]: reducing states, streamlined paths, gauge scaling
//!   families, and disk-automorphism normalization.
//!
//! ```
//! use stochkit::{StochasticMatrix, chain, iso};
//!
//! let p = StochasticMatrix::from_json_str(
//!     r#"{"rows": [["1/2","1/2"], ["1/4","3/4"]]}"#,
//! )?;
//! let pi = chain::stationary(&p)?;
//! assert_eq!(pi.weights[1].to_string(), "2/3");
//!
//! // A relabeled copy is certified isometrically isomorphic.
//! let q = p.pushforward(&[1, 0]);
//! let verdict = iso::decide_isometric(&p, &q, 12)?;
//! assert_eq!(verdict.answer, iso::Answer::Yes);
//! assert!(verdict.certificate.unwrap().validate(&p, &q));
//! # Ok::<(), stochkit::Error>(())
//! ```

pub mod chain;
pub mod cuntz;
pub mod error;
pub mod fixtures;
pub mod fock;
pub mod iso;
pub mod mat;
pub mod matrix;
pub mod regularity;
pub mod subproduct;

pub use error::{Error, Result};
pub use mat::Mat;
pub use matrix::{rat_to_f64, Powers, SchurMatrix, SchurRole, StochasticMatrix, SupportSet};

/// Exact-layer matrix.
pub type RationalMat = Mat<num::BigRational>;
/// Numeric-layer matrix.
pub type RealMat = Mat<f64>;
/// Complex numeric-layer matrix.
pub type ComplexMat = Mat<num::complex::Complex64>;

/// Default tolerance for numeric-layer comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;
