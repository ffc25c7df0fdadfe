//! Binary erosion, exact Euclidean distance transform and majority smoothing.
//!
//! Positions outside the grid count as background, except along axes of
//! extent 1 which are treated as degenerate (see [`Neighborhood`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::{Connectivity, Dims, MaskGrid, Neighborhood, VoxelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErosionSpec {
    pub connectivity: Connectivity,
    pub iterations: u32,
}

impl ErosionSpec {
    pub fn new(connectivity: Connectivity, iterations: u32) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidParameter("erosion needs at least one iteration".into()));
        }
        Ok(Self {
            connectivity,
            iterations,
        })
    }
}

impl Default for ErosionSpec {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Face6,
            iterations: 2,
        }
    }
}

/// Repeated binary erosion. Each pass clears every foreground voxel that has a
/// background (or out-of-grid) neighbor.
pub fn erode(mask: &MaskGrid, spec: ErosionSpec) -> Result<MaskGrid> {
    mask.validate_mask()?;
    if spec.iterations == 0 {
        return Err(Error::InvalidParameter("erosion needs at least one iteration".into()));
    }
    let nb = Neighborhood::new(mask.dims(), spec.connectivity);
    let mut cur = mask.data().to_vec();
    let mut next = vec![0u8; cur.len()];
    for _ in 0..spec.iterations {
        for (i, out) in next.iter_mut().enumerate() {
            if cur[i] == 0 {
                *out = 0;
                continue;
            }
            let mut keep = true;
            nb.for_each(i, |n| {
                if n.is_none_or(|j| cur[j] == 0) {
                    keep = false;
                }
            });
            *out = u8::from(keep);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(MaskGrid::from_parts(mask.dims(), cur))
}

/// One pass of face-neighbor majority smoothing: a voxel keeps its value when
/// at least two thirds of its neighbors (4 of 6 in 3D) share it and flips
/// otherwise.
pub fn majority_smooth(mask: &MaskGrid) -> Result<MaskGrid> {
    mask.validate_mask()?;
    let nb = Neighborhood::new(mask.dims(), Connectivity::Face6);
    let needed = (2 * nb.size()).div_ceil(3);
    let src = mask.data();
    let data = (0..src.len())
        .map(|i| {
            let v = src[i];
            let mut agree = 0;
            nb.for_each(i, |n| {
                if n.map_or(0, |j| src[j]) == v {
                    agree += 1;
                }
            });
            if agree >= needed {
                v
            } else {
                1 - v
            }
        })
        .collect();
    Ok(MaskGrid::from_parts(mask.dims(), data))
}

/// Squared distance from each voxel center to the nearest background voxel
/// center. Background voxels map to 0. `None` marks voxels with no background
/// anywhere (only possible when every axis is degenerate or the whole grid is
/// foreground with no border along any axis).
pub fn squared_distance_transform(mask: &MaskGrid) -> Result<VoxelGrid<Option<u64>>> {
    mask.validate_mask()?;
    let dims = mask.dims();
    let mut f: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v == 0 { 0.0 } else { f64::INFINITY })
        .collect();

    let extent = dims.as_array();
    let strides = dims.strides();
    let mut line = Vec::new();
    let mut out = Vec::new();
    let mut env = Envelope::default();
    for axis in 0..3 {
        let n = extent[axis];
        let stride = strides[axis];
        let border = n > 1;
        for start in line_starts(dims, axis) {
            line.clear();
            line.extend((0..n).map(|k| f[start + k * stride]));
            env.transform(&line, border, &mut out);
            for (k, &d) in out.iter().enumerate() {
                f[start + k * stride] = d;
            }
        }
    }
    Ok(VoxelGrid::from_parts(
        dims,
        f.into_iter().map(|d| d.is_finite().then_some(d as u64)).collect(),
    ))
}

/// Euclidean distance to the nearest background voxel, in voxel units.
pub fn distance_transform(mask: &MaskGrid) -> Result<VoxelGrid<f32>> {
    let sq = squared_distance_transform(mask)?;
    Ok(sq.map(|d| d.map_or(f32::INFINITY, |d| (d as f64).sqrt() as f32)))
}

/// Flat indices of the first voxel of every line parallel to `axis`.
fn line_starts(dims: Dims, axis: usize) -> Vec<usize> {
    let [nx, ny, nz] = dims.as_array();
    let mut starts = Vec::new();
    match axis {
        0 => {
            for z in 0..nz {
                for y in 0..ny {
                    starts.push(dims.index(0, y, z));
                }
            }
        }
        1 => {
            for z in 0..nz {
                for x in 0..nx {
                    starts.push(dims.index(x, 0, z));
                }
            }
        }
        _ => {
            for y in 0..ny {
                for x in 0..nx {
                    starts.push(dims.index(x, y, 0));
                }
            }
        }
    }
    starts
}

/// Lower envelope of parabolas `f(q) + (i - q)^2` over the finite samples of a
/// line, with optional zero-valued virtual samples just past both ends.
#[derive(Default)]
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn transform(&mut self, f: &[f64], border: bool, out: &mut Vec<f64>) {
        let n = f.len();
        self.sites.clear();
        self.bounds.clear();
        for q in (0..n).filter(|&q| f[q].is_finite()) {
            let fq = f[q] + (q * q) as f64;
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }

        out.clear();
        let mut k = 0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            if !self.sites.is_empty() {
                while k + 1 < self.sites.len() && self.bounds[k + 1] < i as f64 {
                    k += 1;
                }
                let q = self.sites[k];
                let d = i as f64 - q as f64;
                best = f[q] + d * d;
            }
            if border {
                let lo = (i + 1) as f64;
                let hi = (n - i) as f64;
                best = best.min(lo * lo).min(hi * hi);
            }
            out.push(best);
        }
    }
}
