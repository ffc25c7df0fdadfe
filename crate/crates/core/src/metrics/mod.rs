//! Evaluation metrics and loss formulas.

mod loss;
mod ranking;
mod segmentation;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use loss::{
    class_targets, loss_bce, loss_consistency, loss_dice, loss_focal, loss_mtl, loss_plantseg, Class, LossConfig,
    DEFAULT_EPSILON,
};
pub use ranking::{average_ranks, centroid_distance, match_chambers, rho_from_matches, spearman_rho, ChamberMatch};
pub use segmentation::{
    adjusted_rand_index, ari_from_contingency, iou, variation_of_information, vi_from_contingency, Contingency,
};

use crate::error::{Error, Result};
use crate::ordering::{chamber_stats, GrowthPath};
use crate::volgrid::LabelGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou: f64,
    pub ari: f64,
    pub vi_merge: f64,
    pub vi_split: f64,
    /// Predicted chambers in the labeling.
    pub m_pred: usize,
    /// Ground-truth chambers in the labeling.
    pub m_gt: usize,
    /// `None` (JSON null) when fewer than two chambers matched.
    pub rho: Option<f64>,
    /// Mean matched centroid distance in voxels; `None` without matches.
    pub delta: Option<f64>,
    pub matches: Vec<ChamberMatch>,
    /// Ground-truth chambers hit by more than one predicted centroid.
    pub shared_gt_matches: usize,
    /// Name of the pipeline that produced the prediction, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
}

impl EvalReport {
    /// Valid detections: predicted chambers whose centroid lies in a ground-truth chamber.
    pub fn m_valid(&self) -> usize {
        self.matches.len()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Scores a predicted labeling and growth path against ground truth.
///
/// `gt_order` lists ground-truth chamber ids chronologically; when `None` the
/// ids themselves are taken as the chronological order.
pub fn evaluate(pred: &LabelGrid, path: &GrowthPath, gt: &LabelGrid, gt_order: Option<&[u32]>) -> Result<EvalReport> {
    pred.ensure_same_dims(gt)?;
    let contingency = Contingency::new(pred, gt)?;
    let (vi_merge, vi_split) = vi_from_contingency(&contingency);
    let gt_stats = chamber_stats(gt).unwrap_or_default();
    let default_order: Vec<u32> = gt_stats.iter().map(|s| s.id).collect();
    let order = gt_order.unwrap_or(&default_order);
    let matches = match_chambers(path, gt, &gt_stats, order);

    let mut per_gt: BTreeMap<u32, usize> = BTreeMap::new();
    for m in &matches {
        *per_gt.entry(m.gt_id).or_default() += 1;
    }

    Ok(EvalReport {
        iou: iou(pred, gt)?,
        ari: ari_from_contingency(&contingency),
        vi_merge,
        vi_split,
        m_pred: contingency.pred.keys().filter(|&&l| l != 0).count(),
        m_gt: gt_stats.len(),
        rho: rho_from_matches(&matches),
        delta: centroid_distance(&matches),
        shared_gt_matches: per_gt.values().filter(|&&n| n > 1).count(),
        matches,
        pipeline: None,
    })
}
