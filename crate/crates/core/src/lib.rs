//! Molecular graph grammar learning from small datasets.
//!
//! Molecules are lifted to ring-aware hypergraphs, contracted bottom-up into
//! production rules under a learned edge-selection policy, and the policy is
//! trained with a score-function gradient against chemical metrics.

pub mod canon;
pub mod molgraph;
pub mod hypergraph;
pub mod grammar;
pub mod metrics;
pub mod learn;
