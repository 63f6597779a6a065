use crate::geometry::{AtomicConfiguration, OVERLAP_TOLERANCE};
use crate::linalg::{self, Vec3};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub shift: [i32; 3],
}

/// Directed cutoff graph. Both `i→j` and `j→i` are stored for every pair.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub edges: Vec<Edge>,
    /// `r_j − r_i + shift·cell`
    pub vectors: Vec<Vec3>,
    pub distances: Vec<f64>,
    pub cutoff: f64,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn mean_neighbors(&self, n_atoms: usize) -> f64 {
        if n_atoms == 0 {
            0.0
        } else {
            self.edges.len() as f64 / n_atoms as f64
        }
    }
}

/// All directed pairs with separation in `(0, r_cut]`.
///
/// The pair vector is first wrapped to the nearest image; neighboring images
/// are then enumerated out to `r_cut`, so cells narrower than `2·r_cut` get
/// their periodic replicas (including an atom's own images) explicitly. When
/// the cell is wide enough this reduces to the minimum-image convention.
pub fn build_neighbor_list(config: &AtomicConfiguration, r_cut: f64) -> Result<NeighborList> {
    if !(r_cut > 0.0) {
        return Err(Error::NonPositiveCutoff(r_cut));
    }
    config.validate()?;

    let periodic = config.is_periodic();
    let (cell, inv) = if periodic {
        let cell = config.cell.ok_or(Error::SingularCell)?;
        let inv = linalg::inverse(&cell).ok_or(Error::SingularCell)?;
        (cell, inv)
    } else {
        (linalg::identity(), linalg::identity())
    };

    let mut reach = [0i32; 3];
    if periodic {
        let widths = config.cell_widths().ok_or(Error::SingularCell)?;
        for d in 0..3 {
            if config.pbc[d] {
                reach[d] = (r_cut / widths[d] + 0.5 + 1e-9).floor() as i32;
            }
        }
    }

    let n = config.len();
    let cut2 = r_cut * r_cut;
    let mut nl = NeighborList {
        edges: Vec::new(),
        vectors: Vec::new(),
        distances: Vec::new(),
        cutoff: r_cut,
    };

    for i in 0..n {
        for j in 0..n {
            let d0 = linalg::sub(config.positions[j], config.positions[i]);
            let mut base = [0i32; 3];
            if periodic {
                // fractional coordinates of d0: d0 = f · cell
                let f = linalg::vec_mat(d0, &inv);
                for d in 0..3 {
                    if config.pbc[d] {
                        base[d] = -(f[d].round() as i32);
                    }
                }
            }
            for a in -reach[0]..=reach[0] {
                for b in -reach[1]..=reach[1] {
                    for c in -reach[2]..=reach[2] {
                        let shift = [base[0] + a, base[1] + b, base[2] + c];
                        if i == j && shift == [0, 0, 0] {
                            continue;
                        }
                        let mut v = d0;
                        if periodic {
                            let s = [shift[0] as f64, shift[1] as f64, shift[2] as f64];
                            v = linalg::add(v, linalg::vec_mat(s, &cell));
                        }
                        let r2 = linalg::dot(v, v);
                        if r2 > cut2 {
                            continue;
                        }
                        let r = r2.sqrt();
                        if r < OVERLAP_TOLERANCE {
                            return Err(Error::OverlappingAtoms { i, j, distance: r });
                        }
                        nl.edges.push(Edge { i, j, shift });
                        nl.vectors.push(v);
                        nl.distances.push(r);
                    }
                }
            }
        }
    }
    Ok(nl)
}
