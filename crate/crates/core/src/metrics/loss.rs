//! Training-loss formulas evaluated as plain functions of probability and
//! target volumes. Probabilities are clipped to `[eps, 1 - eps]` before any
//! logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::{Connectivity, LabelGrid, MaskGrid, Neighborhood, ProbabilityTriplet, VoxelGrid};

pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Per-class weights for the multi-task loss; classes are ordered interior,
/// boundary, background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: [f64; 3],
    pub alpha: [f64; 3],
    pub gamma: [f64; 3],
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: [1.0, 1.0, 1.0],
            alpha: [0.25, 0.5, 0.25],
            gamma: [2.0, 2.0, 2.0],
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64; 3]| v.iter().all(|&x| x > 0.0);
        if !positive(&self.lambda) || !positive(&self.alpha) {
            return Err(Error::InvalidParameter("lambda and alpha must be positive".into()));
        }
        if self.gamma.iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidParameter("gamma must be non-negative".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(Error::InvalidParameter("epsilon must lie in (0, 1e-3]".into()));
        }
        Ok(())
    }
}

/// Semantic class of a voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Interior = 0,
    Boundary = 1,
    Background = 2,
}

fn clip(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

fn pairs<'a, P, G>(p: &'a VoxelGrid<P>, g: &'a VoxelGrid<G>) -> Result<impl Iterator<Item = (f64, f64)> + 'a>
where
    P: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    p.ensure_same_dims(g)?;
    Ok(p.data().iter().zip(g.data()).map(|(&a, &b)| (a.into(), b.into())))
}

/// Mean binary cross-entropy.
pub fn loss_bce<P, G>(p: &VoxelGrid<P>, g: &VoxelGrid<G>) -> Result<f64>
where
    P: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    let n = p.len() as f64;
    let sum: f64 = pairs(p, g)?
        .map(|(p, g)| {
            let p = clip(p, DEFAULT_EPSILON);
            g * p.ln() + (1.0 - g) * (1.0 - p).ln()
        })
        .sum();
    Ok(-sum / n)
}

/// `1 - 2 Σ p g / (Σ p² + Σ g²)`; 0 when both volumes are identically zero.
pub fn loss_dice<P, G>(p: &VoxelGrid<P>, g: &VoxelGrid<G>) -> Result<f64>
where
    P: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    let (mut inter, mut pp, mut gg) = (0.0, 0.0, 0.0);
    for (p, g) in pairs(p, g)? {
        inter += p * g;
        pp += p * p;
        gg += g * g;
    }
    if pp + gg == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - 2.0 * inter / (pp + gg))
}

/// Boundary-network loss: BCE plus Dice.
pub fn loss_plantseg<P, G>(p: &VoxelGrid<P>, g: &VoxelGrid<G>) -> Result<f64>
where
    P: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    Ok(loss_bce(p, g)? + loss_dice(p, g)?)
}

/// Focal loss for one class map. The per-voxel probability of the target
/// outcome is `p` where the target is 1 and `1 - p` where it is 0; with an
/// all-ones target this is `-mean(alpha (1 - p)^gamma ln p)`.
pub fn loss_focal<P, G>(p: &VoxelGrid<P>, g: &VoxelGrid<G>, class: Class, cfg: &LossConfig) -> Result<f64>
where
    P: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    cfg.validate()?;
    let c = class as usize;
    let (alpha, gamma) = (cfg.alpha[c], cfg.gamma[c]);
    let n = p.len() as f64;
    let sum: f64 = pairs(p, g)?
        .map(|(p, g)| {
            let p = clip(p, cfg.epsilon);
            let pt = g * p + (1.0 - g) * (1.0 - p);
            alpha * (1.0 - pt).powf(gamma) * pt.ln()
        })
        .sum();
    Ok(-sum / n)
}

/// `-mean(ln Σ_c p_c)`; zero exactly when the maps sum to one everywhere.
pub fn loss_consistency<T>(maps: &ProbabilityTriplet<T>) -> Result<f64>
where
    T: Copy + Into<f64>,
{
    let [a, b, c] = maps.maps();
    let n = a.len() as f64;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .zip(c.data())
        .map(|((&x, &y), &z)| (x.into() + y.into() + z.into()).max(DEFAULT_EPSILON).ln())
        .sum();
    Ok(-sum / n)
}

/// Multi-task total: `Σ_c lambda_c focal_c + consistency`.
pub fn loss_mtl<T, G>(maps: &ProbabilityTriplet<T>, targets: &ProbabilityTriplet<G>, cfg: &LossConfig) -> Result<f64>
where
    T: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    let mut total = 0.0;
    for (k, class) in [Class::Interior, Class::Boundary, Class::Background]
        .into_iter()
        .enumerate()
    {
        total += cfg.lambda[k] * loss_focal(maps.maps()[k], targets.maps()[k], class, cfg)?;
    }
    Ok(total + loss_consistency(maps)?)
}

/// One-hot class targets from an instance labeling: boundary voxels are
/// labeled voxels with a face neighbor of a different label (or outside the
/// grid), interior voxels are the remaining labeled voxels.
pub fn class_targets(labels: &LabelGrid) -> ProbabilityTriplet<u8> {
    let nb = Neighborhood::new(labels.dims(), Connectivity::Face6);
    let l = labels.data();
    let mut interior = vec![0u8; l.len()];
    let mut boundary = vec![0u8; l.len()];
    let mut background = vec![0u8; l.len()];
    for i in 0..l.len() {
        if l[i] == 0 {
            background[i] = 1;
            continue;
        }
        let mut edge = false;
        nb.for_each(i, |n| edge |= n.is_none_or(|j| l[j] != l[i]));
        if edge {
            boundary[i] = 1;
        } else {
            interior[i] = 1;
        }
    }
    let dims = labels.dims();
    ProbabilityTriplet {
        interior: MaskGrid::from_parts(dims, interior),
        boundary: MaskGrid::from_parts(dims, boundary),
        background: MaskGrid::from_parts(dims, background),
    }
}
