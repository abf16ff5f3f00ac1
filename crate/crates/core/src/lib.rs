//! Solidity bug taxonomy, detectors, labeled corpus and tool scoring.

pub mod corpus;
pub mod detectors;
pub mod evaluation;
pub mod frontend;
pub mod taxonomy;
