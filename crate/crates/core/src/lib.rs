//! Random-cluster measures on regular trees, and the branching-process
//! quantities that decide when they are unique.
//!
//! * [`pgf`] and [`analytic`]: offspring laws, survival and black-root
//!   probabilities, critical curves and attachment parameters.
//! * [`gwsim`]: percolated Galton–Watson trees, colours and Monte Carlo.
//! * [`rays`]: boundary relations on the rays of the tree.
//! * [`rcm`]: exact enumeration, heat-bath sampling and reductions on boxes.
//! * [`cli`]: the command-line front end.
//!
//! ```
//! use arbor_rcm::analytic::{black_gamma, DEFAULT_TOL};
//! use arbor_rcm::pgf::OffspringLaw;
//!
//! let g = black_gamma(&OffspringLaw::deterministic(2), 0.6, DEFAULT_TOL).unwrap();
//! assert!((g.value - 2.0 / 3.0).abs() < 1e-9);
//! ```

pub mod analytic;
pub mod cli;
pub mod error;
pub mod gwsim;
pub mod pgf;
pub mod rays;
pub mod rcm;
pub mod uf;

pub use error::{Error, Result};

// Keeps the guide's snippets compiling and passing.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/colours.md")]
    mod colours {}
    #[doc = include_str!("../../../book/src/relations.md")]
    mod relations {}
    #[doc = include_str!("../../../book/src/boxes.md")]
    mod boxes {}
    #[doc = include_str!("../../../book/src/reductions.md")]
    mod reductions {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
