//! Weighted backward shifts on Köthe sequence spaces.
//!
//! The crate decides, on finite prefixes and with explicit certificates,
//! whether a weighted backward shift is an operator, chaotic, or frequently
//! hypercyclic; classifies power series spaces; builds frequently hypercyclic
//! non-chaotic weights together with the block data they need; and simulates
//! orbits to measure hitting densities.

pub mod classify;
pub mod construct;
pub mod density;
pub mod logmath;
pub mod orbit;
mod par;
pub mod search;
pub mod seqdsl;
pub mod shifts;
pub mod spaces;
pub mod verdict;

pub use logmath::LogReal;
pub use search::SearchConfig;
pub use spaces::{FiniteVector, Order, SpaceSpec};
pub use verdict::{Outcome, Verdict, Witness};
