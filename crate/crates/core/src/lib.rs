//! Spatial gas market equilibrium with conjectural variations, posed as a
//! positive semidefinite linear complementarity problem.
//!
//! The pipeline is: describe a market ([`model`]), order its variables
//! ([`index`]), assemble `M` and `b` ([`assemble`]), solve ([`lcp`]), then
//! bound every variable over the whole solution set ([`polytope`]) and
//! summarise ([`report`]).

pub mod artifacts;
pub mod assemble;
pub mod brute;
pub mod cli;
pub mod index;
pub mod lcp;
pub mod model;
pub mod polytope;
pub mod report;
pub mod scenarios;
pub mod simplex;
pub mod sparse;
