use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extent in voxels along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Flat offset of `(x, y, z)`; x varies fastest.
    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let rest = index / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    #[inline]
    pub const fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0 && y >= 0 && z >= 0 && (x as usize) < self.nx && (y as usize) < self.ny && (z as usize) < self.nz
    }

    /// Step (in flat-index units) for one voxel along each axis.
    pub const fn strides(&self) -> [usize; 3] {
        [1, self.nx, self.nx * self.ny]
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Dense 3D scalar field stored x-fastest, then y, then z.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid<T> {
    dims: Dims,
    data: Vec<T>,
}

/// Binary mask: every element is 0 or 1.
pub type MaskGrid = VoxelGrid<u8>;
/// Instance labels; 0 is background.
pub type LabelGrid = VoxelGrid<u32>;
/// Probabilities in [0, 1], also used for unconstrained f32 fields such as distances.
pub type ProbGrid = VoxelGrid<f32>;

impl<T> VoxelGrid<T> {
    pub fn new(dims: Dims, data: Vec<T>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidGrid(format!("zero-sized axis in {dims}")));
        }
        if data.len() != dims.len() {
            return Err(Error::InvalidGrid(format!(
                "{} elements for dims {dims} ({} expected)",
                data.len(),
                dims.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.dims.index(x, y, z)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> VoxelGrid<U> {
        VoxelGrid {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_dims<U>(&self, other: &VoxelGrid<U>) -> Result<()> {
        Error::check_dims(self.dims, other.dims)
    }

    // Only for crate-internal builders that already hold a correctly sized buffer.
    pub(crate) fn from_parts(dims: Dims, data: Vec<T>) -> Self {
        debug_assert_eq!(dims.len(), data.len());
        Self { dims, data }
    }
}

impl<T: Clone> VoxelGrid<T> {
    pub fn filled(dims: Dims, value: T) -> Result<Self> {
        Self::new(dims, vec![value; dims.len()])
    }
}

impl MaskGrid {
    pub fn from_bools(dims: Dims, values: impl IntoIterator<Item = bool>) -> Result<Self> {
        Self::new(dims, values.into_iter().map(u8::from).collect())
    }

    pub fn validate_mask(&self) -> Result<()> {
        match self.data.iter().position(|&v| v > 1) {
            Some(i) => Err(Error::InvalidGrid(format!(
                "mask value {} at voxel {:?}",
                self.data[i],
                self.dims.coords(i)
            ))),
            None => Ok(()),
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_set(&self, index: usize) -> bool {
        self.data[index] != 0
    }
}

impl LabelGrid {
    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn foreground(&self) -> MaskGrid {
        self.map(|&l| u8::from(l != 0))
    }
}

impl ProbGrid {
    pub fn validate_probabilities(&self) -> Result<()> {
        match self.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            Some(i) => Err(Error::InvalidGrid(format!(
                "probability {} at voxel {:?} outside [0, 1]",
                self.data[i],
                self.dims.coords(i)
            ))),
            None => Ok(()),
        }
    }
}
