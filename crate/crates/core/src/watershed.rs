//! Marker-controlled watershed by priority flooding.
//!
//! Flooding starts from every marker voxel and always extends the queued voxel
//! with the highest flood level. A voxel's flood level is the smaller of its
//! own priority and the level of the voxel that reached it, so levels never
//! rise along a path and voxels are assigned in non-increasing level order.
//! Equal levels are served first-in first-out; markers are enqueued by
//! (label, flat index). The result is a full partition of every region voxel
//! reachable from a marker, with no dam voxels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volgrid::{Connectivity, LabelGrid, MaskGrid, Neighborhood, VoxelGrid};

pub struct WatershedInput<'a> {
    /// Higher values flood first.
    pub priority: &'a VoxelGrid<f32>,
    /// Growth domain.
    pub region: &'a MaskGrid,
    /// Seeds; nonzero only inside `region`.
    pub markers: &'a LabelGrid,
    pub conn: Connectivity,
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    level: f32,
    seq: u64,
    index: usize,
    label: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.level
            .total_cmp(&other.level)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn seeded_watershed(input: &WatershedInput<'_>) -> Result<LabelGrid> {
    let WatershedInput {
        priority,
        region,
        markers,
        conn,
    } = *input;
    markers.ensure_same_dims(region)?;
    markers.ensure_same_dims(priority)?;
    region.validate_mask()?;

    let dims = markers.dims();
    let region = region.data();
    let prio = priority.data();
    let mut seeds: Vec<(u32, usize)> = Vec::new();
    for (i, &l) in markers.data().iter().enumerate() {
        if l == 0 {
            continue;
        }
        if region[i] == 0 {
            return Err(Error::InvalidParameter(format!(
                "marker {l} at voxel {:?} lies outside the growth region",
                dims.coords(i)
            )));
        }
        seeds.push((l, i));
    }
    if seeds.is_empty() {
        return Err(Error::EmptyMarkers);
    }
    seeds.sort_unstable();

    let nb = Neighborhood::new(dims, conn);
    let mut out = vec![0u32; dims.len()];
    let mut queued = vec![false; dims.len()];
    let mut heap = BinaryHeap::with_capacity(seeds.len());
    let mut seq = 0u64;
    for &(label, index) in &seeds {
        queued[index] = true;
        heap.push(Entry {
            level: prio[index],
            seq,
            index,
            label,
        });
        seq += 1;
    }

    // Every later push of a voxel would carry a level no higher than its first
    // push and a larger sequence number, so the first push always wins.
    while let Some(e) = heap.pop() {
        out[e.index] = e.label;
        nb.for_each_inside(e.index, |j| {
            if region[j] != 0 && !queued[j] {
                queued[j] = true;
                heap.push(Entry {
                    level: prio[j].min(e.level),
                    seq,
                    index: j,
                    label: e.label,
                });
                seq += 1;
            }
        });
    }

    Ok(LabelGrid::from_parts(dims, out))
}

/// Runs independent watersheds in parallel; results keep the input order.
pub fn seeded_watershed_batch(inputs: &[WatershedInput<'_>]) -> Vec<Result<LabelGrid>> {
    inputs.par_iter().map(seeded_watershed).collect()
}
