//! Queries answered against a Rashomon ellipsoid.

pub mod jumps;
pub mod monotone;
pub mod project;
pub mod vi;

pub use jumps::{jump_analysis, JumpReport};
pub use monotone::{monotone_fit, ChainConstraint, Direction, MonotoneResult};
pub use project::{project_edit, Projection};
pub use vi::{vi_lower, vi_point, vi_range, vi_upper, VariableImportanceRange, ViMode};
