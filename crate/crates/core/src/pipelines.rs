//! The three instance-segmentation pipelines.
//!
//! * `InteriorSw`: threshold the interior map, erode, label the eroded
//!   components as seeds and flood the thresholded mask.
//! * `BoundaryGasp`: threshold the boundary map, grow supervoxels from the
//!   enclosed non-boundary pockets, then merge them by average-linkage
//!   agglomeration on a region adjacency graph.
//! * `MtlSw`: combine all three maps into a seed mask, smooth it, label it
//!   and flood the non-background region.
//!
//! Every flood uses the Euclidean distance transform of its growth region as
//! priority, so chamber cores fill first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agglomeration::{build_rag, gasp_average, relabel_by_clusters, GaspConfig, MergeStep};
use crate::error::{Error, Result};
use crate::labeling::{compact_labels, connected_components, remove_small};
use crate::morphology::{distance_transform, erode, majority_smooth, ErosionSpec};
use crate::volgrid::{threshold, Connectivity, Dims, LabelGrid, MaskGrid, Neighborhood, ProbGrid};
use crate::watershed::{seeded_watershed, WatershedInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    InteriorSw,
    BoundaryGasp,
    MtlSw,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 3] = [
        PipelineKind::InteriorSw,
        PipelineKind::BoundaryGasp,
        PipelineKind::MtlSw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::InteriorSw => "interior-sw",
            PipelineKind::BoundaryGasp => "boundary-gasp",
            PipelineKind::MtlSw => "mtl-sw",
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PipelineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown pipeline {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: PipelineKind,
    pub tau_interior: f64,
    pub tau_boundary_plantseg: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub erosion: ErosionSpec,
    /// Face-connected erosion passes applied to the non-boundary mask before
    /// its pockets are labeled, cutting leaks through gaps in the boundary.
    pub boundary_gap_erosion: u32,
    pub min_voxels: u64,
    pub gasp: GaspConfig,
}

impl PipelineConfig {
    pub fn new(variant: PipelineKind) -> Self {
        Self {
            variant,
            tau_interior: 0.5,
            tau_boundary_plantseg: 0.3,
            tau1: 0.5,
            tau2: 0.4,
            tau3: 0.9,
            erosion: ErosionSpec::default(),
            boundary_gap_erosion: 2,
            min_voxels: 50,
            gasp: GaspConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("tau_interior", self.tau_interior),
            ("tau_boundary_plantseg", self.tau_boundary_plantseg),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("tau3", self.tau3),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParameter(format!("{name} = {t} outside [0, 1]")));
            }
        }
        if self.erosion.iterations == 0 {
            return Err(Error::InvalidParameter("erosion needs at least one iteration".into()));
        }
        if self.min_voxels == 0 {
            return Err(Error::InvalidParameter("min_voxels must be positive".into()));
        }
        GaspConfig::new(self.gasp.merge_affinity_threshold)?;
        Ok(())
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::new(PipelineKind::InteriorSw)
    }
}

/// Probability maps handed to a pipeline; each variant reads only the maps it needs.
#[derive(Clone, Copy, Debug, Default)]
pub struct PipelineInput<'a> {
    pub interior: Option<&'a ProbGrid>,
    pub boundary: Option<&'a ProbGrid>,
    pub background: Option<&'a ProbGrid>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub labels: LabelGrid,
    /// Agglomeration merges, for the boundary pipeline only.
    pub merge_trace: Option<Vec<MergeStep>>,
}

/// Runs the variant selected in `cfg`.
pub fn run_pipeline(input: PipelineInput<'_>, cfg: &PipelineConfig) -> Result<Segmentation> {
    fn need<'a>(map: Option<&'a ProbGrid>, name: &str, kind: PipelineKind) -> Result<&'a ProbGrid> {
        map.ok_or_else(|| Error::InvalidParameter(format!("{kind} needs the {name} map")))
    }
    match cfg.variant {
        PipelineKind::InteriorSw => Ok(Segmentation {
            labels: run_interior_sw(need(input.interior, "interior", cfg.variant)?, cfg)?,
            merge_trace: None,
        }),
        PipelineKind::BoundaryGasp => {
            let (labels, trace) = boundary_gasp(need(input.boundary, "boundary", cfg.variant)?, cfg)?;
            Ok(Segmentation {
                labels,
                merge_trace: Some(trace),
            })
        }
        PipelineKind::MtlSw => Ok(Segmentation {
            labels: run_mtl_sw(
                need(input.interior, "interior", cfg.variant)?,
                need(input.boundary, "boundary", cfg.variant)?,
                need(input.background, "background", cfg.variant)?,
                cfg,
            )?,
            merge_trace: None,
        }),
    }
}

pub fn run_interior_sw(interior: &ProbGrid, cfg: &PipelineConfig) -> Result<LabelGrid> {
    cfg.validate()?;
    let mask = threshold(interior, cfg.tau_interior)?;
    if mask.count() == 0 {
        return Err(Error::NoChambers);
    }
    let eroded = erode(&mask, cfg.erosion)?;
    let markers = remove_small(&connected_components(&eroded, Connectivity::Face6)?, cfg.min_voxels)?;
    flood(&markers, &mask)
}

pub fn run_boundary_gasp(boundary: &ProbGrid, cfg: &PipelineConfig) -> Result<LabelGrid> {
    Ok(boundary_gasp(boundary, cfg)?.0)
}

/// Boundary pipeline that also returns the agglomeration merge trace.
pub fn boundary_gasp(boundary: &ProbGrid, cfg: &PipelineConfig) -> Result<(LabelGrid, Vec<MergeStep>)> {
    cfg.validate()?;
    let dims = boundary.dims();
    let wall = threshold(boundary, cfg.tau_boundary_plantseg)?;
    let open = wall.map(|&b| 1 - b);

    let pockets = match cfg.boundary_gap_erosion {
        0 => open.clone(),
        n => erode(&open, ErosionSpec::new(Connectivity::Face6, n)?)?,
    };
    let pockets = connected_components(&pockets, Connectivity::Face6)?;
    let seeds = remove_small(
        &drop_border_components(&pockets, cfg.boundary_gap_erosion as usize),
        cfg.min_voxels,
    )?;
    if seeds.max_label() == 0 {
        return Err(Error::NoChambers);
    }

    // Specimen extent: everything except the open space connected to the grid
    // border once the seeds have been grown back to their pre-erosion size.
    let grown = geodesic_dilate(&seeds.foreground(), &open, cfg.boundary_gap_erosion);
    let outside_candidates = MaskGrid::from_bools(
        dims,
        open.data().iter().zip(grown.data()).map(|(&o, &g)| o == 1 && g == 0),
    )?;
    let outside = drop_border_components(&connected_components(&outside_candidates, Connectivity::Face6)?, 0);
    let extent = MaskGrid::from_bools(
        dims,
        outside_candidates
            .data()
            .iter()
            .zip(outside.data())
            .map(|(&c, &kept)| c == 0 || kept != 0),
    )?;
    let interior = MaskGrid::from_bools(
        dims,
        extent.data().iter().zip(wall.data()).map(|(&e, &w)| e == 1 && w == 0),
    )?;

    let supervoxels = seeded_watershed(&WatershedInput {
        priority: &distance_transform(&interior)?,
        region: &extent,
        markers: &seeds,
        conn: Connectivity::Face6,
    })?;
    let graph = build_rag(&supervoxels, boundary, Connectivity::Face6)?;
    let clustering = gasp_average(&graph, cfg.gasp);
    let labels = relabel_by_clusters(&supervoxels, &clustering.mapping)?;
    Ok((labels, clustering.trace))
}

pub fn run_mtl_sw(
    interior: &ProbGrid,
    boundary: &ProbGrid,
    background: &ProbGrid,
    cfg: &PipelineConfig,
) -> Result<LabelGrid> {
    let (seed_mask, region) = mtl_masks(interior, boundary, background, cfg)?;
    let dims = region.dims();
    let smoothed = majority_smooth(&seed_mask)?;
    let smoothed = MaskGrid::from_bools(
        dims,
        smoothed
            .data()
            .iter()
            .zip(region.data())
            .map(|(&s, &r)| s == 1 && r == 1),
    )?;
    let markers = remove_small(&connected_components(&smoothed, Connectivity::Face6)?, cfg.min_voxels)?;
    flood(&markers, &region)
}

/// Seed mask `(interior >= tau1) & !(boundary >= tau2) & !(background >= tau3)`
/// and growth region `!(background >= tau3)`.
pub fn mtl_masks(
    interior: &ProbGrid,
    boundary: &ProbGrid,
    background: &ProbGrid,
    cfg: &PipelineConfig,
) -> Result<(MaskGrid, MaskGrid)> {
    cfg.validate()?;
    interior.ensure_same_dims(boundary)?;
    interior.ensure_same_dims(background)?;
    let inside = threshold(interior, cfg.tau1)?;
    let wall = threshold(boundary, cfg.tau2)?;
    let back = threshold(background, cfg.tau3)?;
    let seeds = MaskGrid::from_bools(
        interior.dims(),
        (0..inside.len()).map(|i| inside.data()[i] == 1 && wall.data()[i] == 0 && back.data()[i] == 0),
    )?;
    Ok((seeds, back.map(|&b| 1 - b)))
}

fn flood(markers: &LabelGrid, region: &MaskGrid) -> Result<LabelGrid> {
    if markers.max_label() == 0 {
        return Err(Error::NoChambers);
    }
    let labels = seeded_watershed(&WatershedInput {
        priority: &distance_transform(region)?,
        region,
        markers,
        conn: Connectivity::Face6,
    })?;
    Ok(compact_labels(&labels))
}

/// Zeroes every labeled component with a voxel within `margin` voxels of the
/// grid border (along non-degenerate axes).
fn drop_border_components(labels: &LabelGrid, margin: usize) -> LabelGrid {
    let dims = labels.dims();
    let mut touching = vec![false; labels.max_label() as usize + 1];
    for (i, &l) in labels.data().iter().enumerate() {
        if l != 0 && near_border(dims, i, margin) {
            touching[l as usize] = true;
        }
    }
    labels.map(|&l| if touching[l as usize] { 0 } else { l })
}

fn near_border(dims: Dims, index: usize, margin: usize) -> bool {
    let [x, y, z] = dims.coords(index);
    let edge = |c: usize, n: usize| n > 1 && (c <= margin || c + margin >= n - 1);
    edge(x, dims.nx) || edge(y, dims.ny) || edge(z, dims.nz)
}

/// Face-connected dilation of `mask`, `steps` times, never leaving `within`.
fn geodesic_dilate(mask: &MaskGrid, within: &MaskGrid, steps: u32) -> MaskGrid {
    let nb = Neighborhood::new(mask.dims(), Connectivity::Face6);
    let mut cur = mask.data().to_vec();
    let mut frontier: Vec<usize> = (0..cur.len()).filter(|&i| cur[i] == 1).collect();
    for _ in 0..steps {
        let mut next = Vec::new();
        for &i in &frontier {
            nb.for_each_inside(i, |j| {
                if cur[j] == 0 && within.data()[j] == 1 {
                    cur[j] = 1;
                    next.push(j);
                }
            });
        }
        frontier = next;
    }
    MaskGrid::from_bools(mask.dims(), cur.into_iter().map(|v| v == 1)).expect("same dims")
}
