//! Connected-component labeling, small-component removal and label compaction.

use crate::error::{Error, Result};
use crate::volgrid::{Connectivity, LabelGrid, MaskGrid, Neighborhood};

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    /// Unions two sets, keeping the smaller root.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass union-find labeling. Components are numbered 1..=L in the order
/// their first voxel appears in scan order.
pub fn connected_components(mask: &MaskGrid, conn: Connectivity) -> Result<LabelGrid> {
    mask.validate_mask()?;
    let dims = mask.dims();
    let nb = Neighborhood::new(dims, conn);
    let src = mask.data();
    let mut provisional = vec![u32::MAX; src.len()];
    let mut sets = DisjointSet::new();

    for i in 0..src.len() {
        if src[i] == 0 {
            continue;
        }
        let mut label = u32::MAX;
        nb.for_each_inside(i, |j| {
            if j < i && src[j] != 0 {
                let other = provisional[j];
                if label == u32::MAX {
                    label = other;
                } else if other != label {
                    sets.union(label, other);
                }
            }
        });
        provisional[i] = if label == u32::MAX { sets.make() } else { label };
    }

    let mut remap = vec![0u32; sets.parent.len()];
    let mut next = 0u32;
    let data = provisional
        .into_iter()
        .map(|p| {
            if p == u32::MAX {
                return 0;
            }
            let root = sets.find(p) as usize;
            if remap[root] == 0 {
                next += 1;
                remap[root] = next;
            }
            remap[root]
        })
        .collect();
    Ok(LabelGrid::from_parts(dims, data))
}

/// Voxel count per label, indexed by label value.
pub fn label_sizes(labels: &LabelGrid) -> Vec<u64> {
    let mut sizes = vec![0u64; labels.max_label() as usize + 1];
    for &l in labels.data() {
        sizes[l as usize] += 1;
    }
    sizes
}

/// Renumbers positive labels to 1..=L by first appearance in scan order.
pub fn compact_labels(labels: &LabelGrid) -> LabelGrid {
    let mut remap = std::collections::HashMap::new();
    let data = labels
        .data()
        .iter()
        .map(|&l| {
            if l == 0 {
                return 0;
            }
            let next = remap.len() as u32 + 1;
            *remap.entry(l).or_insert(next)
        })
        .collect();
    LabelGrid::from_parts(labels.dims(), data)
}

/// Clears every component smaller than `min_voxels` and compacts the rest.
pub fn remove_small(labels: &LabelGrid, min_voxels: u64) -> Result<LabelGrid> {
    if min_voxels == 0 {
        return Err(Error::InvalidParameter("min_voxels must be positive".into()));
    }
    let sizes = label_sizes(labels);
    let kept = labels.map(|&l| if sizes[l as usize] >= min_voxels { l } else { 0 });
    Ok(compact_labels(&kept))
}
