use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Dims;

/// Voxel adjacency: shared face, shared edge, or shared vertex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Face6,
    Edge18,
    Vertex26,
}

impl Connectivity {
    /// All offsets of the neighborhood, in a fixed order.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let max_nonzero = match self {
            Connectivity::Face6 => 1,
            Connectivity::Edge18 => 2,
            Connectivity::Vertex26 => 3,
        };
        let mut out = Vec::with_capacity(26);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    if nonzero >= 1 && nonzero <= max_nonzero {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Face6 => "face6",
            Connectivity::Edge18 => "edge18",
            Connectivity::Vertex26 => "vertex26",
        })
    }
}

impl FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "6" | "face6" => Ok(Connectivity::Face6),
            "18" | "edge18" => Ok(Connectivity::Edge18),
            "26" | "vertex26" => Ok(Connectivity::Vertex26),
            other => Err(format!("unknown connectivity {other:?}")),
        }
    }
}

/// Neighbor lookup for one grid shape.
///
/// Axes of extent 1 are degenerate: offsets that move along them are dropped
/// rather than treated as leaving the grid, so a single-slice volume behaves
/// as a 2D image.
#[derive(Clone, Debug)]
pub struct Neighborhood {
    dims: Dims,
    offsets: Vec<([i64; 3], isize)>,
}

impl Neighborhood {
    pub fn new(dims: Dims, conn: Connectivity) -> Self {
        let extent = dims.as_array();
        let strides = dims.strides();
        let offsets = conn
            .offsets()
            .into_iter()
            .filter(|o| (0..3).all(|a| o[a] == 0 || extent[a] > 1))
            .map(|o| {
                let delta = (0..3).map(|a| o[a] as isize * strides[a] as isize).sum();
                (o, delta)
            })
            .collect();
        Self { dims, offsets }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Number of offsets that survive degenerate-axis filtering.
    pub fn size(&self) -> usize {
        self.offsets.len()
    }

    /// Calls `f(Some(j))` for each in-grid neighbor `j` of voxel `index` and
    /// `f(None)` for each neighbor position outside the grid.
    #[inline]
    pub fn for_each(&self, index: usize, mut f: impl FnMut(Option<usize>)) {
        let [x, y, z] = self.dims.coords(index);
        let (x, y, z) = (x as i64, y as i64, z as i64);
        for &(o, delta) in &self.offsets {
            if self.dims.contains(x + o[0], y + o[1], z + o[2]) {
                f(Some((index as isize + delta) as usize));
            } else {
                f(None);
            }
        }
    }

    /// In-grid neighbors of `index` only.
    #[inline]
    pub fn for_each_inside(&self, index: usize, mut f: impl FnMut(usize)) {
        self.for_each(index, |n| {
            if let Some(j) = n {
                f(j)
            }
        });
    }

    /// Half of the symmetric offset set (lexicographically positive offsets), so
    /// every unordered adjacent pair is visited exactly once.
    pub fn for_each_forward(&self, index: usize, mut f: impl FnMut(usize)) {
        let [x, y, z] = self.dims.coords(index);
        let (x, y, z) = (x as i64, y as i64, z as i64);
        for &(o, delta) in &self.offsets {
            if delta > 0 && self.dims.contains(x + o[0], y + o[1], z + o[2]) {
                f((index as isize + delta) as usize);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighborhood_sizes() {
        assert_eq!(Connectivity::Face6.offsets().len(), 6);
        assert_eq!(Connectivity::Edge18.offsets().len(), 18);
        assert_eq!(Connectivity::Vertex26.offsets().len(), 26);
    }

    #[test]
    fn offsets_are_unique_and_symmetric() {
        for conn in [Connectivity::Face6, Connectivity::Edge18, Connectivity::Vertex26] {
            let offs = conn.offsets();
            for (i, o) in offs.iter().enumerate() {
                assert!(!offs[i + 1..].contains(o), "{conn}: duplicate {o:?}");
                assert!(offs.contains(&[-o[0], -o[1], -o[2]]), "{conn}: {o:?} has no mirror");
            }
        }
    }

    #[test]
    fn degenerate_axes_are_dropped() {
        let flat = Neighborhood::new(Dims::new(5, 5, 1), Connectivity::Vertex26);
        assert_eq!(flat.size(), 8);
        let line = Neighborhood::new(Dims::new(7, 1, 1), Connectivity::Face6);
        assert_eq!(line.size(), 2);
    }

    #[test]
    fn forward_visits_each_pair_once() {
        let dims = Dims::new(3, 4, 2);
        let nb = Neighborhood::new(dims, Connectivity::Vertex26);
        let mut pairs = Vec::new();
        for i in 0..dims.len() {
            nb.for_each_forward(i, |j| pairs.push((i.min(j), i.max(j))));
        }
        let n = pairs.len();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), n);
        let mut all = 0;
        for i in 0..dims.len() {
            nb.for_each_inside(i, |_| all += 1);
        }
        assert_eq!(all, 2 * n);
    }
}
