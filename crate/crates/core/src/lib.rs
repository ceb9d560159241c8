//! Verification of Minimum Restraint Functions and trajectory synthesis for
//! exit-time optimal control problems.

pub mod error;
pub mod grid;
pub mod lyapunov;
pub mod numerics;
pub mod oracle;
pub mod pwl;
pub mod synthesis;
pub mod system;

pub use error::{Error, Result};
pub use grid::UniformGrid;
pub use pwl::MonotonePwl;
pub use synthesis::{synthesize, Synthesis, SynthesisConfig};
pub use system::{ControlSystem, Partition, TargetSet, Trajectory, TrajectoryNode, TrajectoryStatus};
