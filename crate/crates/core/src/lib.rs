//! Post-processing for foraminifera CT chamber segmentation.
//!
//! Semantic probability volumes (chamber interior, chamber boundary,
//! background) are turned into chamber instance labelings by one of three
//! pipelines, chambers are ordered into a growth path by nearest-neighbor
//! chaining from the smallest chamber, and results are scored against ground
//! truth. A synthetic specimen generator provides test volumes with known
//! answers.

pub mod agglomeration;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod labeling;
pub mod metrics;
pub mod morphology;
pub mod ordering;
pub mod pipelines;
pub mod synth;
pub mod volgrid;
pub mod watershed;

pub use error::{Error, Result};
pub use volgrid::{Connectivity, Dims, LabelGrid, MaskGrid, ProbGrid, ProbabilityTriplet, Volume, VoxelGrid};
