//! Threshold queries on the earth mover's distance (EMD) between weighted
//! point sets in Euclidean space.
//!
//! [`emd_query`] decides whether `EMD(A, B)` is above or below a threshold
//! `T` without solving the full transportation problem: it refines a
//! hierarchical decomposition of `A ∪ B` only until the answer is certain,
//! and reports "too close to call" once the distance is known to lie within
//! `ε·Δ̃` of `T`.
//!
//! ```
//! use emdq::{emd_query, QueryParams, Verdict, WeightedPointSet};
//!
//! let a = WeightedPointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]], vec![1.0, 1.0]).unwrap();
//! let b = WeightedPointSet::from_rows(&[[0.0, 5.0], [1.0, 5.0]], vec![1.0, 1.0]).unwrap();
//! let outcome = emd_query(&a, &b, &QueryParams::new(2.0, 0.05)).unwrap();
//! assert_eq!(outcome.verdict, Verdict::Case1);
//! ```

pub mod bench;
pub mod cover;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod io;
pub mod query;
pub mod tolerance;
pub mod transport;

pub use cover::SplitMode;
pub use error::{EmdError, Result};
pub use geometry::{approx_radius, distance, PointSource, WeightedPointSet};
pub use query::{emd_query, QueryOutcome, QueryParams, SolverChoice, Verdict};
pub use tolerance::Tolerances;
pub use transport::{solve_exact, solve_sinkhorn, SinkhornParams, TransportInstance, TransportPlan};
