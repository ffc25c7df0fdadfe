//! Chamber statistics and nearest-neighbor growth-path reconstruction.
//!
//! The path starts at the smallest chamber and repeatedly steps to the
//! unvisited chamber whose centroid is closest to the current one. Ties in
//! volume or distance go to the smaller chamber id.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::LabelGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberStats {
    pub id: u32,
    pub volume: u64,
    /// Mean voxel coordinate (x, y, z).
    pub centroid: [f64; 3],
}

impl ChamberStats {
    pub fn distance_to(&self, other: &ChamberStats) -> f64 {
        euclidean(self.centroid, other.centroid)
    }
}

pub fn euclidean(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// One record per positive label, sorted by id.
pub fn chamber_stats(labels: &LabelGrid) -> Result<Vec<ChamberStats>> {
    let dims = labels.dims();
    let mut acc: BTreeMap<u32, (u64, [u64; 3])> = BTreeMap::new();
    let mut i = 0;
    for z in 0..dims.nz as u64 {
        for y in 0..dims.ny as u64 {
            for x in 0..dims.nx as u64 {
                let l = labels.data()[i];
                i += 1;
                if l == 0 {
                    continue;
                }
                let slot = acc.entry(l).or_insert((0, [0; 3]));
                slot.0 += 1;
                slot.1[0] += x;
                slot.1[1] += y;
                slot.1[2] += z;
            }
        }
    }
    if acc.is_empty() {
        return Err(Error::EmptyLabeling);
    }
    Ok(acc
        .into_iter()
        .map(|(id, (volume, sums))| ChamberStats {
            id,
            volume,
            centroid: sums.map(|s| s as f64 / volume as f64),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub chamber: ChamberStats,
    /// Distance from the previous chamber's centroid; 0 for the first chamber.
    pub step_distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GrowthPath {
    pub steps: Vec<PathStep>,
}

impl GrowthPath {
    pub fn ids(&self) -> Vec<u32> {
        self.steps.iter().map(|s| s.chamber.id).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Writes the path CSV:
    /// `order_index,chamber_id,centroid_x,centroid_y,centroid_z,volume_voxels,step_distance`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for (order_index, s) in self.steps.iter().enumerate() {
            w.serialize(PathRow {
                order_index,
                chamber_id: s.chamber.id,
                centroid_x: s.chamber.centroid[0],
                centroid_y: s.chamber.centroid[1],
                centroid_z: s.chamber.centroid[2],
                volume_voxels: s.chamber.volume,
                step_distance: s.step_distance,
            })
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut steps = Vec::new();
        for (k, row) in r.deserialize::<PathRow>().enumerate() {
            let row = row.map_err(csv_err)?;
            if row.order_index != k {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("row {k} has order_index {}", row.order_index),
                });
            }
            steps.push(PathStep {
                chamber: ChamberStats {
                    id: row.chamber_id,
                    volume: row.volume_voxels,
                    centroid: [row.centroid_x, row.centroid_y, row.centroid_z],
                },
                step_distance: row.step_distance,
            });
        }
        Ok(Self { steps })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    order_index: usize,
    chamber_id: u32,
    centroid_x: f64,
    centroid_y: f64,
    centroid_z: f64,
    volume_voxels: u64,
    step_distance: f64,
}

/// Nearest-neighbor chain from the minimum-volume chamber.
pub fn growth_path(stats: &[ChamberStats]) -> GrowthPath {
    let Some(start) = stats
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.volume.cmp(&b.volume).then(a.id.cmp(&b.id)))
        .map(|(i, _)| i)
    else {
        return GrowthPath::default();
    };

    let mut unvisited: Vec<usize> = (0..stats.len()).filter(|&i| i != start).collect();
    let mut current = start;
    let mut steps = vec![PathStep {
        chamber: stats[start],
        step_distance: 0.0,
    }];
    while !unvisited.is_empty() {
        let here = &stats[current];
        let (pos, dist) = unvisited
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, here.distance_to(&stats[i])))
            .min_by(|(pa, da), (pb, db)| {
                da.total_cmp(db)
                    .then(stats[unvisited[*pa]].id.cmp(&stats[unvisited[*pb]].id))
            })
            .expect("unvisited is non-empty");
        current = unvisited.swap_remove(pos);
        steps.push(PathStep {
            chamber: stats[current],
            step_distance: dist,
        });
    }
    GrowthPath { steps }
}
