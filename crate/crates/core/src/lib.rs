//! A lifetime model in which every entity is exposed to one shared systemic
//! shock, and each entity's own shock may hasten that systemic shock.
//!
//! Entity `j`'s lifetime is `T_j = min(X_j, X0)`: the first arrival between
//! an idiosyncratic shock `X_j` and the systemic arrival time
//! `X0 = min(Y_0, ..., Y_d)`. The twist relative to the classical
//! common-shock (Marshall-Olkin) setting is that each pair `(Y_j, X_j)` is
//! coupled through a bivariate Archimedean copula: a distressed entity drags
//! the whole system's shock forward. The induced dependence splits into a
//! Marshall-Olkin part plus per-entity contributions, and the strength of an
//! entity's pull on the system (Kendall's tau between its idiosyncratic
//! shock and the systemic time) is the entity's systemic riskiness.
//!
//! The crate provides:
//!
//! * [`archimedean`]: strict generators (Clayton, Gumbel, independence) and
//!   bivariate copula primitives, including conditional-inversion sampling;
//! * [`shock_model`]: model parameters, survival functions, survival
//!   copulas, and the probability that all lifetimes end simultaneously;
//! * [`dependence`]: Kendall functions and taus, closed form and numeric;
//! * [`montecarlo`]: a reproducible brute-force oracle for everything;
//! * [`calibration`]: least-squares fit of pairwise taus and the
//!   per-entity riskiness report;
//! * [`market_data`]: CDS spread ingestion and intensity-based empirical
//!   taus;
//! * [`cli`]: the `sysrisk` command-line tool.
//!
//! ```
//! use sysrisk::archimedean::ArchimedeanGenerator;
//! use sysrisk::shock_model::ModelParams;
//!
//! // two entities, equal systemic weights, Clayton coupling
//! let params = ModelParams::new(
//!     1.0,
//!     vec![0.5, 0.5],
//!     vec![0.0, 0.5, 0.5],
//!     vec![ArchimedeanGenerator::clayton(2.0)?; 2],
//! )?;
//! let tau = sysrisk::dependence::tau_pair(&params, 1, 2)?;
//! assert!((tau - 0.375).abs() < 1e-12);
//! # Ok::<(), sysrisk::Error>(())
//! ```

// negated float comparisons are deliberate: they reject NaN along with the
// out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archimedean;
pub mod calibration;
pub mod cli;
pub mod dependence;
pub mod market_data;
pub mod montecarlo;
mod numeric;
pub mod shock_model;

mod error;

pub use error::{Error, Result};

// The book's runnable snippets double as doctests so the guide can never
// drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! doc_check {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    doc_check!(Introduction, "../../../book/src/introduction.md");
    doc_check!(Generators, "../../../book/src/generators.md");
    doc_check!(Lifetimes, "../../../book/src/lifetimes.md");
    doc_check!(Kendall, "../../../book/src/kendall.md");
    doc_check!(Simulation, "../../../book/src/simulation.md");
    doc_check!(Calibration, "../../../book/src/calibration.md");
}
