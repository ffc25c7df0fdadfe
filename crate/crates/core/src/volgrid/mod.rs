//! Dense volume types, neighborhoods, thresholding and NRRD I/O.

mod connectivity;
mod grid;
mod nrrd;

use std::fmt;

pub use connectivity::{Connectivity, Neighborhood};
pub use grid::{Dims, LabelGrid, MaskGrid, ProbGrid, VoxelGrid};
pub use nrrd::{decode_nrrd, encode_nrrd, read_nrrd, write_nrrd};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemKind {
    Mask,
    Label,
    Prob,
}

impl ElemKind {
    pub fn byte_width(self) -> usize {
        match self {
            ElemKind::Mask => 1,
            ElemKind::Label | ElemKind::Prob => 4,
        }
    }

    pub fn nrrd_type(self) -> &'static str {
        match self {
            ElemKind::Mask => "uint8",
            ElemKind::Label => "uint32",
            ElemKind::Prob => "float",
        }
    }
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElemKind::Mask => "mask (uint8)",
            ElemKind::Label => "label (uint32)",
            ElemKind::Prob => "probability (float)",
        })
    }
}

/// A grid of any storable element kind, as read from or written to disk.
#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Mask(MaskGrid),
    Label(LabelGrid),
    Prob(ProbGrid),
}

impl Volume {
    pub fn kind(&self) -> ElemKind {
        match self {
            Volume::Mask(_) => ElemKind::Mask,
            Volume::Label(_) => ElemKind::Label,
            Volume::Prob(_) => ElemKind::Prob,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            Volume::Mask(g) => g.dims(),
            Volume::Label(g) => g.dims(),
            Volume::Prob(g) => g.dims(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Volume::Mask(g) => g.validate_mask(),
            Volume::Label(_) => Ok(()),
            Volume::Prob(g) => g.validate_probabilities(),
        }
    }

    pub fn into_prob(self) -> Result<ProbGrid> {
        match self {
            Volume::Prob(g) => Ok(g),
            other => Err(Error::KindMismatch {
                expected: ElemKind::Prob,
                found: other.kind(),
            }),
        }
    }

    pub fn into_mask(self) -> Result<MaskGrid> {
        match self {
            Volume::Mask(g) => Ok(g),
            other => Err(Error::KindMismatch {
                expected: ElemKind::Mask,
                found: other.kind(),
            }),
        }
    }

    /// Labels as stored; a mask is read as a single-label (0/1) labeling.
    pub fn into_labels(self) -> Result<LabelGrid> {
        match self {
            Volume::Label(g) => Ok(g),
            Volume::Mask(g) => Ok(g.map(|&v| u32::from(v))),
            other => Err(Error::KindMismatch {
                expected: ElemKind::Label,
                found: other.kind(),
            }),
        }
    }
}

impl From<MaskGrid> for Volume {
    fn from(g: MaskGrid) -> Self {
        Volume::Mask(g)
    }
}

impl From<LabelGrid> for Volume {
    fn from(g: LabelGrid) -> Self {
        Volume::Label(g)
    }
}

impl From<ProbGrid> for Volume {
    fn from(g: ProbGrid) -> Self {
        Volume::Prob(g)
    }
}

/// Aligned interior, boundary and background maps, in that class order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTriplet<T = f32> {
    pub interior: VoxelGrid<T>,
    pub boundary: VoxelGrid<T>,
    pub background: VoxelGrid<T>,
}

impl<T> ProbabilityTriplet<T> {
    pub fn new(interior: VoxelGrid<T>, boundary: VoxelGrid<T>, background: VoxelGrid<T>) -> Result<Self> {
        interior.ensure_same_dims(&boundary)?;
        interior.ensure_same_dims(&background)?;
        Ok(Self {
            interior,
            boundary,
            background,
        })
    }

    pub fn dims(&self) -> Dims {
        self.interior.dims()
    }

    pub fn maps(&self) -> [&VoxelGrid<T>; 3] {
        [&self.interior, &self.boundary, &self.background]
    }
}

impl ProbabilityTriplet<f32> {
    pub fn validate(&self) -> Result<()> {
        self.maps().iter().try_for_each(|m| m.validate_probabilities())
    }
}

/// Binarizes a probability grid: a voxel is set iff `p >= tau`.
pub fn threshold(grid: &ProbGrid, tau: f64) -> Result<MaskGrid> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("threshold {tau} outside [0, 1]")));
    }
    grid.validate_probabilities()?;
    Ok(grid.map(|&p| u8::from(f64::from(p) >= tau)))
}
