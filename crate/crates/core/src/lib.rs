//! Parallel stochastic convex optimization.
//!
//! The crate minimizes an L-Lipschitz convex function over a ball given only
//! a stochastic subgradient oracle, organised around the number of parallel
//! query rounds. The pieces are:
//!
//! * [`oracle`], [`ledger`], [`rng`]: batched oracle access, cost counters
//!   and counter-based random streams.
//! * [`smoothing`]: the Gaussian-smoothed objective f_ρ and its estimators.
//! * [`rank1`]: a parallel solver for rank-1 update recurrences.
//! * [`sgd`]: warm-started composite SGD, executed through [`rank1`].
//! * [`boost`]: geometric aggregation and tournament selection.
//! * [`ball_oracle`]: Newton steps with a Lagrange-multiplier binary search
//!   that minimize f_ρ plus a proximal term over a small ball.
//! * [`outer`]: parameter selection and the outer proximal loops.

pub mod ball_oracle;
pub mod boost;
pub mod error;
pub mod functions;
pub mod ledger;
pub mod oracle;
pub mod outer;
pub mod problem;
pub mod rank1;
pub mod rng;
pub mod sgd;
pub mod smoothing;

pub use error::{Error, Result};
pub use ledger::{CostLedger, LedgerSnapshot};
pub use oracle::{submit_batch, GradientOracle, OracleHandle};
pub use problem::ProblemInstance;
pub use rng::{derive_stream, gaussian_vector, Label, RngStream};
