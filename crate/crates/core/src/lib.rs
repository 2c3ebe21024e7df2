//! Embedded feature selection for nonlinear SVMs.
//!
//! The training problem couples the usual dual SVM in `alpha` with a binary
//! mask `beta` that switches input features on and off inside the kernel,
//! subject to `sum(beta) == B`:
//!
//! ```text
//! min_{alpha, beta}  1/2 alpha' Q(beta) alpha - 1' alpha
//!   s.t.  y' alpha = 0,  0 <= alpha <= C,  |beta| = B
//! ```
//!
//! Fixing `beta` leaves a convex dual SVM ([`svm::solve_dual`]); fixing
//! `alpha` leaves a binary problem which, for polynomial kernels, is the
//! maximization of a monotone submodular set function under a cardinality
//! constraint ([`submodular`]). The search algorithms built on top of these
//! two primitives live in [`local_search`], [`decomposition`] and
//! [`baselines`]; [`bench`] runs multistart experiments and computes
//! performance profiles.

pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod kernel;
pub mod local_search;
pub mod minlp;
pub mod submodular;
pub mod svm;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use kernel::{FeatureMask, KernelSpec, QMatrix};
pub use minlp::{Incumbent, ProblemSpec, SolverSettings};
pub use svm::{DualSolution, SvmModel};
