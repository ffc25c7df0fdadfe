//! Growth-order agreement: centroid matching, Spearman rank correlation and
//! mean centroid distance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ordering::{euclidean, ChamberStats, GrowthPath};
use crate::volgrid::LabelGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberMatch {
    pub pred_id: u32,
    pub gt_id: u32,
    /// 1-based rank among matched chambers in predicted path order.
    pub pred_rank: f64,
    /// 1-based rank among matched chambers in ground-truth order; tied
    /// chambers share their average rank.
    pub gt_rank: f64,
    pub centroid_distance: f64,
}

/// Matches each predicted chamber whose rounded centroid falls inside a
/// ground-truth chamber, in predicted path order.
///
/// `gt_order` lists ground-truth ids chronologically; `gt_stats` must contain
/// every id that can be hit.
pub fn match_chambers(
    path: &GrowthPath,
    gt: &LabelGrid,
    gt_stats: &[ChamberStats],
    gt_order: &[u32],
) -> Vec<ChamberMatch> {
    let dims = gt.dims();
    let gt_centroid: HashMap<u32, [f64; 3]> = gt_stats.iter().map(|s| (s.id, s.centroid)).collect();
    let chrono: HashMap<u32, usize> = gt_order.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    let mut hits = Vec::new();
    for step in &path.steps {
        let c = step.chamber.centroid;
        let [x, y, z] = [0, 1, 2].map(|a| c[a].round());
        if !dims.contains(x as i64, y as i64, z as i64) {
            continue;
        }
        let g = *gt.get(x as usize, y as usize, z as usize);
        let (Some(&gc), Some(&k)) = (gt_centroid.get(&g), chrono.get(&g)) else {
            continue;
        };
        hits.push((step.chamber.id, g, k, euclidean(c, gc)));
    }

    let gt_keys: Vec<f64> = hits.iter().map(|h| h.2 as f64).collect();
    let gt_ranks = average_ranks(&gt_keys);
    hits.into_iter()
        .zip(gt_ranks)
        .enumerate()
        .map(|(k, ((pred_id, gt_id, _, d), gt_rank))| ChamberMatch {
            pred_id,
            gt_id,
            pred_rank: (k + 1) as f64,
            gt_rank,
            centroid_distance: d,
        })
        .collect()
}

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho between two rank vectors. Uses `1 - 6 Σd² / (M(M²-1))`
/// when both are tie-free permutations of 1..=M and the Pearson correlation of
/// the ranks otherwise. `None` when fewer than two items or a rank vector is
/// constant.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let m = a.len();
    if m < 2 {
        return None;
    }
    if is_permutation(a) && is_permutation(b) {
        let sum_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let m = m as f64;
        return Some(1.0 - 6.0 * sum_sq / (m * (m * m - 1.0)));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / m as f64;
    let (ma, mb) = (mean(a), mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

fn is_permutation(ranks: &[f64]) -> bool {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().all(|&r| {
        let k = r as usize;
        if r.fract() != 0.0 || k == 0 || k > ranks.len() || seen[k - 1] {
            return false;
        }
        seen[k - 1] = true;
        true
    })
}

/// Rank correlation between predicted and ground-truth order over matched chambers.
pub fn rho_from_matches(matches: &[ChamberMatch]) -> Option<f64> {
    let pred: Vec<f64> = matches.iter().map(|m| m.pred_rank).collect();
    let gt: Vec<f64> = matches.iter().map(|m| m.gt_rank).collect();
    spearman_rho(&pred, &gt)
}

/// Mean centroid distance over matches; `None` when there are none.
pub fn centroid_distance(matches: &[ChamberMatch]) -> Option<f64> {
    if matches.is_empty() {
        return None;
    }
    Some(matches.iter().map(|m| m.centroid_distance).sum::<f64>() / matches.len() as f64)
}
