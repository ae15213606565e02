//! Learning overcomplete dictionaries from sparse samples `Y = A X`.
//!
//! The first stage thresholds sample correlations into a graph, grows a
//! candidate cluster around every edge, keeps clusters whose members pairwise
//! share one atom, and reads each atom off the top eigenvector of the
//! cluster's scatter matrix. The second stage sparse-codes every sample
//! against that estimate, rounds the codes to signs and re-solves for the
//! dictionary, which is exact once the estimate is close enough.
//!
//! ```
//! use overdict::model::{generate_coefficients, generate_dictionary, synthesize, ModelParams};
//! use overdict::clustering::dictionary_learn;
//!
//! let params = ModelParams::bernoulli(16, 16, 1);
//! let a = generate_dictionary(&params, 7).unwrap();
//! let x = generate_coefficients(&params, 300, 7).unwrap();
//! let y = synthesize(&a, &x).unwrap();
//! let est = dictionary_learn(&y, 0.5, 0.2, 7, None).unwrap();
//! assert_eq!(est.len(), 16);
//! ```

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod corr_graph;
pub mod error;
pub mod eval;
pub mod harness;
pub mod hungarian;
pub mod io;
pub mod linalg;
pub mod model;
pub mod par;
pub mod rng;
pub mod sparse_recovery;

pub use error::{Error, Result};
