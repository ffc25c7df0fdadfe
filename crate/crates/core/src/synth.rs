//! Synthetic specimens with known chamber labels and growth order.
//!
//! Chamber `j` is a ball of radius `initial_radius * growth_factor^j`. Ball
//! centers follow a turtle-style spiral: each step turns the heading by the
//! angular step, rises by the z pitch, and is as long as the sum of the two
//! radii shortened by the overlap fraction. Where balls overlap the earlier
//! chamber keeps the voxel. The ground-truth label of chamber `j` is its ball
//! share eroded by `wall_thickness` (26-connected), which leaves walls between
//! chambers.
//!
//! Probability maps start from three classes: cavity cores (interior 1),
//! the outer face-connected layer of each cavity (split between interior and
//! boundary), and everything else (background 1). All three maps are then
//! blurred with the same binomial kernel, perturbed with independent Gaussian
//! noise and clipped to [0, 1].

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::connected_components;
use crate::ordering::{chamber_stats, growth_path, ChamberStats};
use crate::volgrid::{
    write_nrrd, Connectivity, Dims, LabelGrid, MaskGrid, Neighborhood, ProbabilityTriplet, VoxelGrid,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dims: Dims,
    pub chamber_count: usize,
    pub initial_radius: f64,
    pub growth_factor: f64,
    /// Heading change per chamber, degrees.
    pub angular_step: f64,
    /// The heading change of step `j` is `angular_step / radial_expansion^j`;
    /// values above 1 open the spiral.
    pub radial_expansion: f64,
    /// Rise along z per chamber, voxels.
    pub z_pitch: f64,
    pub overlap_fraction: f64,
    pub wall_thickness: u32,
    /// Interior probability of a cavity's outer layer; the rest is boundary.
    pub surface_interior: f32,
    pub noise_sigma: f64,
    pub blur_radius: u32,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dims: Dims::new(128, 128, 64),
            chamber_count: 16,
            initial_radius: 8.0,
            growth_factor: 1.02,
            angular_step: 24.0,
            radial_expansion: 1.0,
            z_pitch: 1.5,
            overlap_fraction: 0.15,
            wall_thickness: 1,
            surface_interior: 0.6,
            noise_sigma: 0.0,
            blur_radius: 0,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.chamber_count == 0 {
            return bad("chamber_count must be at least 1");
        }
        if self.initial_radius.is_nan() || self.initial_radius < 1.0 {
            return bad("initial_radius must be at least 1 voxel");
        }
        if self.growth_factor.is_nan() || self.growth_factor <= 1.0 {
            return bad("growth_factor must exceed 1");
        }
        if self.radial_expansion.is_nan()
            || self.radial_expansion <= 0.0
            || !self.angular_step.is_finite()
            || !self.z_pitch.is_finite()
        {
            return bad("spiral parameters must be finite and radial_expansion positive");
        }
        if !(0.0..=0.3).contains(&self.overlap_fraction) {
            return bad("overlap_fraction must lie in [0, 0.3]");
        }
        if !(0.5..=0.7).contains(&self.surface_interior) {
            return bad("surface_interior must lie in [0.5, 0.7]");
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return bad("noise_sigma must be non-negative");
        }
        Ok(())
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.initial_radius * self.growth_factor.powi(j as i32)
    }

    /// Ball centers before placement in the grid, first chamber at the origin.
    fn spiral(&self, heading0: f64) -> Vec<[f64; 3]> {
        let mut centers = vec![[0.0; 3]];
        let mut heading = heading0;
        for j in 1..self.chamber_count {
            let step = (self.radius(j - 1) + self.radius(j)) * (1.0 - self.overlap_fraction);
            let rise = self.z_pitch.clamp(-0.9 * step, 0.9 * step);
            let run = (step * step - rise * rise).sqrt();
            heading += self.angular_step.to_radians() / self.radial_expansion.powi(j as i32);
            let [x, y, z] = centers[j - 1];
            centers.push([x + run * heading.cos(), y + run * heading.sin(), z + rise]);
        }
        centers
    }
}

/// One row of the ground-truth chamber table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberRecord {
    pub id: u32,
    pub ball_center: [f64; 3],
    pub ball_radius: f64,
    pub centroid: [f64; 3],
    pub volume: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Specimen {
    pub spec: SynthSpec,
    /// Chamber ids 1..=K in chronological order.
    pub gt: LabelGrid,
    pub maps: ProbabilityTriplet<f32>,
    pub chambers: Vec<ChamberRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub files: SpecimenFiles,
    pub chronological_order: Vec<u32>,
    pub chambers: Vec<ChamberRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecimenFiles {
    pub gt_labels: PathBuf,
    pub interior: PathBuf,
    pub boundary: PathBuf,
    pub background: PathBuf,
}

impl SpecimenFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            gt_labels: dir.join("gt_labels.nrrd"),
            interior: dir.join("interior.nrrd"),
            boundary: dir.join("boundary.nrrd"),
            background: dir.join("background.nrrd"),
        }
    }
}

impl Specimen {
    /// Writes the four volumes and `manifest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<SynthManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = SpecimenFiles::in_dir(dir);
        write_nrrd(&self.gt.clone().into(), &files.gt_labels)?;
        write_nrrd(&self.maps.interior.clone().into(), &files.interior)?;
        write_nrrd(&self.maps.boundary.clone().into(), &files.boundary)?;
        write_nrrd(&self.maps.background.clone().into(), &files.background)?;
        let manifest = SynthManifest {
            spec: self.spec.clone(),
            files,
            chronological_order: self.chambers.iter().map(|c| c.id).collect(),
            chambers: self.chambers.clone(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

impl SynthManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Specimen> {
    spec.validate()?;
    let dims = spec.dims;
    let k = spec.chamber_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let heading0 = rng.random_range(0.0..std::f64::consts::TAU);
    let jitter: [f64; 3] = [rng.random(), rng.random(), rng.random()];

    let radii: Vec<f64> = (0..k).map(|j| spec.radius(j)).collect();
    let mut centers = spec.spiral(heading0);
    place_in_grid(&mut centers, &radii, dims, jitter, spec.wall_thickness as f64 + 2.0)?;

    let owner = paint_balls(dims, &centers, &radii);
    let gt = erode_labels(&owner, spec.wall_thickness);
    let maps = probability_maps(&gt, spec, &mut rng)?;
    let stats = check_feasible(&gt, k)?;

    let chambers = stats
        .iter()
        .map(|s| {
            let j = s.id as usize - 1;
            ChamberRecord {
                id: s.id,
                ball_center: centers[j],
                ball_radius: radii[j],
                centroid: s.centroid,
                volume: s.volume,
            }
        })
        .collect();
    Ok(Specimen {
        spec: spec.clone(),
        gt,
        maps,
        chambers,
    })
}

/// Centers the layout's bounding box in the grid, shifted by a sub-voxel jitter.
fn place_in_grid(centers: &mut [[f64; 3]], radii: &[f64], dims: Dims, jitter: [f64; 3], margin: f64) -> Result<()> {
    let extent = dims.as_array();
    for axis in 0..3 {
        let lo = centers
            .iter()
            .zip(radii)
            .map(|(c, r)| c[axis] - r)
            .fold(f64::INFINITY, f64::min);
        let hi = centers
            .iter()
            .zip(radii)
            .map(|(c, r)| c[axis] + r)
            .fold(f64::NEG_INFINITY, f64::max);
        let room = extent[axis] as f64 - 1.0 - 2.0 * margin;
        if hi - lo > room {
            return Err(Error::InfeasibleSpec(format!(
                "chambers span {:.1} voxels along axis {axis} but only {room:.1} fit",
                hi - lo
            )));
        }
        let shift =
            (extent[axis] as f64 - 1.0) / 2.0 - (lo + hi) / 2.0 + (jitter[axis] - 0.5).min((room - (hi - lo)) / 2.0);
        for c in centers.iter_mut() {
            c[axis] += shift;
        }
    }
    Ok(())
}

/// Labels each voxel with the earliest ball containing it.
fn paint_balls(dims: Dims, centers: &[[f64; 3]], radii: &[f64]) -> LabelGrid {
    let mut data = vec![0u32; dims.len()];
    for (j, (c, &r)) in centers.iter().zip(radii).enumerate() {
        let range = |axis: usize, n: usize| {
            let lo = (c[axis] - r).floor().max(0.0) as usize;
            let hi = ((c[axis] + r).ceil() as usize).min(n - 1);
            lo..=hi
        };
        for z in range(2, dims.nz) {
            for y in range(1, dims.ny) {
                for x in range(0, dims.nx) {
                    let d2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2);
                    let i = dims.index(x, y, z);
                    if d2 <= r * r && data[i] == 0 {
                        data[i] = j as u32 + 1;
                    }
                }
            }
        }
    }
    LabelGrid::new(dims, data).expect("dims match")
}

/// Keeps a voxel's label only where every 26-neighbor, repeatedly, carries the same label.
fn erode_labels(labels: &LabelGrid, iterations: u32) -> LabelGrid {
    let nb = Neighborhood::new(labels.dims(), Connectivity::Vertex26);
    let mut cur = labels.data().to_vec();
    for _ in 0..iterations {
        let next = (0..cur.len())
            .map(|i| {
                let l = cur[i];
                let mut keep = l != 0;
                if keep {
                    nb.for_each(i, |n| keep &= n.is_some_and(|j| cur[j] == l));
                }
                if keep {
                    l
                } else {
                    0
                }
            })
            .collect();
        cur = next;
    }
    LabelGrid::new(labels.dims(), cur).expect("dims match")
}

fn probability_maps(gt: &LabelGrid, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<ProbabilityTriplet<f32>> {
    let dims = gt.dims();
    let nb = Neighborhood::new(dims, Connectivity::Face6);
    let l = gt.data();
    let mut interior = vec![0f32; l.len()];
    let mut boundary = vec![0f32; l.len()];
    let mut background = vec![0f32; l.len()];
    for i in 0..l.len() {
        if l[i] == 0 {
            background[i] = 1.0;
            continue;
        }
        let mut surface = false;
        nb.for_each(i, |n| surface |= n.is_none_or(|j| l[j] != l[i]));
        if surface {
            interior[i] = spec.surface_interior;
            boundary[i] = 1.0 - spec.surface_interior;
        } else {
            interior[i] = 1.0;
        }
    }

    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let mut finish = |mut v: Vec<f32>| {
        if spec.blur_radius > 0 {
            v = binomial_blur(&v, dims, spec.blur_radius);
        }
        if let Some(normal) = &noise {
            for p in v.iter_mut() {
                *p = (f64::from(*p) + normal.sample(rng)).clamp(0.0, 1.0) as f32;
            }
        }
        VoxelGrid::new(dims, v)
    };
    let interior = finish(interior)?;
    let boundary = finish(boundary)?;
    let background = finish(background)?;
    ProbabilityTriplet::new(interior, boundary, background)
}

/// Separable blur with binomial weights `C(2r, k) / 4^r`; edges are replicated.
pub fn binomial_blur(values: &[f32], dims: Dims, radius: u32) -> Vec<f32> {
    let r = radius as usize;
    let mut weights = vec![1f64];
    for _ in 0..2 * r {
        let mut next = vec![0.0; weights.len() + 1];
        for (k, w) in weights.iter().enumerate() {
            next[k] += w / 2.0;
            next[k + 1] += w / 2.0;
        }
        weights = next;
    }
    let mut cur: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
    let strides = dims.strides();
    for (axis, &n) in dims.as_array().iter().enumerate() {
        if n == 1 {
            continue;
        }
        let stride = strides[axis];
        let mut out = vec![0.0; cur.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let c = (i / stride) % n;
            let base = i - c * stride;
            *o = weights
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let p = (c as i64 + k as i64 - r as i64).clamp(0, n as i64 - 1) as usize;
                    w * cur[base + p * stride]
                })
                .sum();
        }
        cur = out;
    }
    cur.into_iter().map(|v| v as f32).collect()
}

/// Rejects layouts whose ground truth is not a clean chronological spiral.
fn check_feasible(gt: &LabelGrid, k: usize) -> Result<Vec<ChamberStats>> {
    let stats = chamber_stats(gt).map_err(|_| Error::InfeasibleSpec("every chamber vanished".into()))?;
    if stats.len() != k {
        return Err(Error::InfeasibleSpec(format!(
            "{} of {k} chambers survive wall erosion",
            stats.len()
        )));
    }
    for pair in stats.windows(2) {
        if pair[1].volume <= pair[0].volume {
            return Err(Error::InfeasibleSpec(format!(
                "chamber {} ({} voxels) is not larger than chamber {} ({} voxels)",
                pair[1].id, pair[1].volume, pair[0].id, pair[0].volume
            )));
        }
    }
    for (j, here) in stats.iter().enumerate() {
        if let Some(next) = stats.get(j + 1) {
            let step = here.distance_to(next);
            if let Some(other) = stats[j + 2..].iter().find(|o| here.distance_to(o) <= step) {
                return Err(Error::InfeasibleSpec(format!(
                    "chamber {} is no farther from chamber {} than its successor",
                    other.id, here.id
                )));
            }
        }
    }
    for s in &stats {
        let own = MaskGrid::from_bools(gt.dims(), gt.data().iter().map(|&l| l == s.id))?;
        if connected_components(&own, Connectivity::Face6)?.max_label() != 1 {
            return Err(Error::InfeasibleSpec(format!(
                "chamber {} is split by later chambers",
                s.id
            )));
        }
    }
    let order = growth_path(&stats).ids();
    if order.iter().zip(1u32..).any(|(&a, b)| a != b) {
        return Err(Error::InfeasibleSpec(format!(
            "nearest-neighbor order {order:?} is not chronological"
        )));
    }
    Ok(stats)
}
