pub mod compare;
pub mod examples;
pub mod hjb;
pub mod spiral;

pub use compare::{compare_bound, region_maxima, BoundReport, BoundViolation};
pub use hjb::{hjb_value_iteration, hjb_value_iteration_with, GridValueTable, HjbConfig, NodeKind, SweepMode};
pub use spiral::{collar_continuation, spiral_facts, spiral_oracle, SpiralFacts, SpiralOracle};
