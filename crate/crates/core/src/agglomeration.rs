//! Region adjacency graphs over supervoxels and threshold-stopped
//! average-linkage agglomeration (GASP with attractive edges only).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::compact_labels;
use crate::volgrid::{Connectivity, LabelGrid, Neighborhood, VoxelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RagEdge {
    pub u: u32,
    pub v: u32,
    /// Mean over interface voxel pairs of the pair's average boundary probability.
    pub mean_boundary: f64,
    /// Number of adjacent voxel pairs along the interface.
    pub pairs: u64,
}

impl RagEdge {
    pub fn affinity(&self) -> f64 {
        1.0 - self.mean_boundary
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionGraph {
    /// Sorted supervoxel ids.
    pub nodes: Vec<u32>,
    /// Edges with `u < v`, sorted by `(u, v)`.
    pub edges: Vec<RagEdge>,
}

pub fn build_rag<T>(supervoxels: &LabelGrid, boundary: &VoxelGrid<T>, conn: Connectivity) -> Result<RegionGraph>
where
    T: Copy + Into<f64>,
{
    supervoxels.ensure_same_dims(boundary)?;
    let labels = supervoxels.data();
    let bnd = boundary.data();
    let nb = Neighborhood::new(supervoxels.dims(), conn);
    let mut nodes = BTreeSet::new();
    let mut acc: BTreeMap<(u32, u32), (f64, u64)> = BTreeMap::new();
    for i in 0..labels.len() {
        let a = labels[i];
        if a == 0 {
            continue;
        }
        nodes.insert(a);
        nb.for_each_forward(i, |j| {
            let b = labels[j];
            if b != 0 && b != a {
                let key = (a.min(b), a.max(b));
                let slot = acc.entry(key).or_insert((0.0, 0));
                slot.0 += (bnd[i].into() + bnd[j].into()) / 2.0;
                slot.1 += 1;
            }
        });
    }
    Ok(RegionGraph {
        nodes: nodes.into_iter().collect(),
        edges: acc
            .into_iter()
            .map(|((u, v), (sum, pairs))| RagEdge {
                u,
                v,
                mean_boundary: sum / pairs as f64,
                pairs,
            })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaspConfig {
    pub merge_affinity_threshold: f64,
}

impl GaspConfig {
    pub fn new(merge_affinity_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&merge_affinity_threshold) {
            return Err(Error::InvalidParameter(format!(
                "merge affinity {merge_affinity_threshold} outside [0, 1]"
            )));
        }
        Ok(Self {
            merge_affinity_threshold,
        })
    }
}

impl Default for GaspConfig {
    fn default() -> Self {
        Self {
            merge_affinity_threshold: 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub step: usize,
    pub cluster_a: u32,
    pub cluster_b: u32,
    pub affinity: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Clustering {
    /// Node id to cluster id; a cluster is named by its smallest member.
    pub mapping: BTreeMap<u32, u32>,
    pub trace: Vec<MergeStep>,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.mapping.values().collect::<BTreeSet<_>>().len()
    }
}

/// Interface statistics between two clusters: pair-count-weighted affinity sum.
#[derive(Clone, Copy, Debug, Default)]
struct Link {
    weighted: f64,
    pairs: u64,
}

impl Link {
    fn affinity(&self) -> f64 {
        self.weighted / self.pairs as f64
    }
}

#[derive(Debug)]
struct Candidate {
    affinity: f64,
    a: u32,
    b: u32,
    gen_a: u32,
    gen_b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.affinity
            .total_cmp(&other.affinity)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

/// Greedily merges the most attractive cluster pair while its average
/// affinity is at least the configured threshold. Ties go to the
/// lexicographically smaller `(min id, max id)` pair.
pub fn gasp_average(graph: &RegionGraph, cfg: GaspConfig) -> Clustering {
    let mut adj: HashMap<u32, BTreeMap<u32, Link>> = graph.nodes.iter().map(|&n| (n, BTreeMap::new())).collect();
    for e in &graph.edges {
        let link = Link {
            weighted: e.affinity() * e.pairs as f64,
            pairs: e.pairs,
        };
        adj.entry(e.u).or_default().insert(e.v, link);
        adj.entry(e.v).or_default().insert(e.u, link);
    }

    let mut generation: HashMap<u32, u32> = adj.keys().map(|&k| (k, 0)).collect();
    let mut parent: HashMap<u32, u32> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Candidate>, generation: &HashMap<u32, u32>, a: u32, b: u32, link: &Link| {
        let (a, b) = (a.min(b), a.max(b));
        heap.push(Candidate {
            affinity: link.affinity(),
            a,
            b,
            gen_a: generation[&a],
            gen_b: generation[&b],
        });
    };
    for e in &graph.edges {
        push(&mut heap, &generation, e.u, e.v, &adj[&e.u][&e.v]);
    }

    let mut trace = Vec::new();
    while let Some(c) = heap.pop() {
        if generation.get(&c.a) != Some(&c.gen_a) || generation.get(&c.b) != Some(&c.gen_b) {
            continue;
        }
        if c.affinity < cfg.merge_affinity_threshold {
            break;
        }
        let (keep, gone) = (c.a, c.b);
        trace.push(MergeStep {
            step: trace.len(),
            cluster_a: keep,
            cluster_b: gone,
            affinity: c.affinity,
        });
        parent.insert(gone, keep);
        generation.remove(&gone);
        *generation.get_mut(&keep).unwrap() += 1;

        let gone_links = adj.remove(&gone).unwrap_or_default();
        adj.get_mut(&keep).unwrap().remove(&gone);
        for (n, link) in gone_links {
            if n == keep {
                continue;
            }
            let n_links = adj.get_mut(&n).unwrap();
            n_links.remove(&gone);
            let merged = n_links.entry(keep).or_default();
            merged.weighted += link.weighted;
            merged.pairs += link.pairs;
            let merged = *merged;
            adj.get_mut(&keep).unwrap().insert(n, merged);
        }
        for (&n, link) in &adj[&keep] {
            push(&mut heap, &generation, keep, n, link);
        }
    }

    let resolve = |mut n: u32| {
        while let Some(&p) = parent.get(&n) {
            n = p;
        }
        n
    };
    Clustering {
        mapping: graph.nodes.iter().map(|&n| (n, resolve(n))).collect(),
        trace,
    }
}

/// Paints every supervoxel with its cluster id and compacts the result.
pub fn relabel_by_clusters(supervoxels: &LabelGrid, mapping: &BTreeMap<u32, u32>) -> Result<LabelGrid> {
    let mut cache: HashMap<u32, u32> = HashMap::new();
    let mut data = Vec::with_capacity(supervoxels.len());
    for &l in supervoxels.data() {
        if l == 0 {
            data.push(0);
            continue;
        }
        let c = match cache.get(&l) {
            Some(&c) => c,
            None => {
                let &c = mapping.get(&l).ok_or(Error::MissingCluster(l))?;
                if c == 0 {
                    return Err(Error::InvalidParameter(format!("supervoxel {l} mapped to background")));
                }
                cache.insert(l, c);
                c
            }
        };
        data.push(c);
    }
    Ok(compact_labels(&LabelGrid::new(supervoxels.dims(), data)?))
}

/// Writes the merge trace as CSV with columns `step,cluster_a,cluster_b,affinity`.
pub fn write_merge_trace(path: impl AsRef<Path>, trace: &[MergeStep]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for step in trace {
        w.serialize(step).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
