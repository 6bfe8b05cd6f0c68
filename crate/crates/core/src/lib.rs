//! Forecast evaluation with proper and weighted scoring rules.
//!
//! The crate covers predictive distributions ([`dists`]), unweighted scores
//! ([`scores`]), weighted scores and the hedging counter-example
//! ([`wscores`]), Diebold-Mariano and likelihood-ratio tests ([`evaltests`]),
//! the simulation studies ([`simlab`]) and a small Bayesian AR case-study
//! pipeline ([`tslab`]).

pub mod dists;
pub mod error;
pub mod evaltests;
pub mod quad;
pub mod report;
pub mod rng;
pub mod scores;
pub mod simlab;
pub mod stats;
pub mod tslab;
pub mod wscores;

pub use dists::ForecastDistribution;
pub use error::{Error, Result};
pub use rng::RngStream;
pub use scores::ScoreSeries;
pub use wscores::WeightFunction;
