//! Overlap and partition-agreement scores between two labelings.
//!
//! ARI and VI are computed over the voxels that are foreground in at least
//! one of the two volumes, with label 0 taking part as an ordinary cluster.
//! Entropies use natural logarithms.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::volgrid::{LabelGrid, VoxelGrid};

/// Intersection over union of the nonzero voxels; 1 when both are empty.
pub fn iou<A, B>(pred: &VoxelGrid<A>, gt: &VoxelGrid<B>) -> Result<f64>
where
    A: Copy + Default + PartialEq,
    B: Copy + Default + PartialEq,
{
    pred.ensure_same_dims(gt)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let (p, g) = (p != A::default(), g != B::default());
        inter += u64::from(p && g);
        union += u64::from(p || g);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Joint label histogram over the union-foreground support.
#[derive(Clone, Debug, Default)]
pub struct Contingency {
    pub joint: BTreeMap<(u32, u32), u64>,
    pub pred: BTreeMap<u32, u64>,
    pub gt: BTreeMap<u32, u64>,
    pub total: u64,
}

impl Contingency {
    pub fn new(pred: &LabelGrid, gt: &LabelGrid) -> Result<Self> {
        pred.ensure_same_dims(gt)?;
        let mut c = Contingency::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if p == 0 && g == 0 {
                continue;
            }
            *c.joint.entry((p, g)).or_default() += 1;
            *c.pred.entry(p).or_default() += 1;
            *c.gt.entry(g).or_default() += 1;
            c.total += 1;
        }
        Ok(c)
    }
}

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand index. Degenerate partitions (both a single cluster, or
/// fewer than two voxels) score 1.
pub fn adjusted_rand_index(pred: &LabelGrid, gt: &LabelGrid) -> Result<f64> {
    Ok(ari_from_contingency(&Contingency::new(pred, gt)?))
}

pub fn ari_from_contingency(c: &Contingency) -> f64 {
    if c.total < 2 {
        return 1.0;
    }
    let index: u128 = c.joint.values().map(|&n| pairs(n)).sum();
    let sum_pred: u128 = c.pred.values().map(|&n| pairs(n)).sum();
    let sum_gt: u128 = c.gt.values().map(|&n| pairs(n)).sum();
    let total = pairs(c.total) as f64;
    let expected = sum_pred as f64 * sum_gt as f64 / total;
    let max_index = (sum_pred as f64 + sum_gt as f64) / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        return 1.0;
    }
    (index as f64 - expected) / denom
}

/// Conditional entropies `(vi_merge, vi_split) = (H(G|P), H(P|G))`.
pub fn variation_of_information(pred: &LabelGrid, gt: &LabelGrid) -> Result<(f64, f64)> {
    Ok(vi_from_contingency(&Contingency::new(pred, gt)?))
}

pub fn vi_from_contingency(c: &Contingency) -> (f64, f64) {
    if c.total == 0 {
        return (0.0, 0.0);
    }
    let n = c.total as f64;
    let (mut h_gt_given_pred, mut h_pred_given_gt) = (0.0, 0.0);
    for (&(p, g), &nij) in &c.joint {
        let nij = nij as f64;
        h_gt_given_pred -= nij / n * (nij / c.pred[&p] as f64).ln();
        h_pred_given_gt -= nij / n * (nij / c.gt[&g] as f64).ln();
    }
    (h_gt_given_pred.max(0.0), h_pred_given_gt.max(0.0))
}
