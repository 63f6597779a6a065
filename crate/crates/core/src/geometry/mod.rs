//! Atomic configurations, periodic images and cutoff neighbor lists.
//!
//! Positions are kept unwrapped. Periodic wrapping only happens while a
//! displacement is computed, and the lattice translation that was applied is
//! recorded on every edge as an integer `shift`.

mod elements;
mod neighbors;
pub mod xyz;

use std::collections::BTreeMap;

use crate::linalg::{self, Mat3, Vec3};
use crate::{Error, Result};

pub use elements::{atomic_number, symbol};
pub use neighbors::{build_neighbor_list, Edge, NeighborList};

/// Separation below which two atoms are reported as overlapping.
pub const OVERLAP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicConfiguration {
    /// Cartesian positions in Å.
    pub positions: Vec<Vec3>,
    /// Atomic numbers.
    pub species: Vec<u32>,
    /// Lattice vectors as rows, Å.
    pub cell: Option<Mat3>,
    pub pbc: [bool; 3],
    /// Reference energy, eV.
    pub energy: Option<f64>,
    /// Reference forces, eV/Å.
    pub forces: Option<Vec<Vec3>>,
    /// Extra `key=value` metadata carried through extended-XYZ headers.
    pub info: BTreeMap<String, String>,
}

impl AtomicConfiguration {
    /// Free (non-periodic) configuration.
    pub fn free(positions: Vec<Vec3>, species: Vec<u32>) -> Result<Self> {
        let c = Self {
            positions,
            species,
            cell: None,
            pbc: [false; 3],
            energy: None,
            forces: None,
            info: BTreeMap::new(),
        };
        c.validate()?;
        Ok(c)
    }

    /// Fully periodic configuration.
    pub fn periodic(positions: Vec<Vec3>, species: Vec<u32>, cell: Mat3) -> Result<Self> {
        let c = Self {
            positions,
            species,
            cell: Some(cell),
            pbc: [true; 3],
            energy: None,
            forces: None,
            info: BTreeMap::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.pbc.iter().any(|&p| p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.species.len() {
            return Err(Error::Shape(format!(
                "{} positions but {} species",
                self.positions.len(),
                self.species.len()
            )));
        }
        if let Some(f) = &self.forces {
            if f.len() != self.positions.len() {
                return Err(Error::Shape(format!(
                    "{} forces for {} atoms",
                    f.len(),
                    self.positions.len()
                )));
            }
        }
        if self.is_periodic() {
            match &self.cell {
                Some(c) if linalg::det(c).abs() > 1e-12 => {}
                _ => return Err(Error::SingularCell),
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> Option<f64> {
        self.cell.as_ref().map(|c| linalg::det(c).abs())
    }

    /// Perpendicular widths of the cell along each lattice direction.
    pub fn cell_widths(&self) -> Option<[f64; 3]> {
        let c = self.cell.as_ref()?;
        let v = linalg::det(c).abs();
        Some([
            v / linalg::norm(linalg::cross(c[1], c[2])),
            v / linalg::norm(linalg::cross(c[2], c[0])),
            v / linalg::norm(linalg::cross(c[0], c[1])),
        ])
    }

    /// Smallest perpendicular width over the periodic directions.
    pub fn min_periodic_width(&self) -> Option<f64> {
        let w = self.cell_widths()?;
        (0..3)
            .filter(|&d| self.pbc[d])
            .map(|d| w[d])
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))))
    }

    /// Wraps a displacement to the nearest image by rounding its fractional
    /// coordinates along periodic directions. Exact for orthogonal cells.
    pub fn minimum_image(&self, d: Vec3) -> Vec3 {
        let Some(cell) = self.cell.as_ref().filter(|_| self.is_periodic()) else {
            return d;
        };
        let Some(inv) = linalg::inverse(cell) else {
            return d;
        };
        let mut f = linalg::vec_mat(d, &inv);
        for k in 0..3 {
            if self.pbc[k] {
                f[k] -= f[k].round();
            }
        }
        linalg::vec_mat(f, cell)
    }

    /// Applies `r ↦ R·r + t` to positions, cell vectors and reference forces.
    pub fn transformed(&self, rotation: &Mat3, translation: Vec3) -> Self {
        let mut out = self.clone();
        for p in out.positions.iter_mut() {
            *p = linalg::add(linalg::mat_vec(rotation, *p), translation);
        }
        if let Some(c) = out.cell.as_mut() {
            for row in c.iter_mut() {
                *row = linalg::mat_vec(rotation, *row);
            }
        }
        if let Some(f) = out.forces.as_mut() {
            for v in f.iter_mut() {
                *v = linalg::mat_vec(rotation, *v);
            }
        }
        out
    }
}

/// `r_j − r_i + shift·cell`, the edge vector pointing from atom `i` to atom `j`.
pub fn displacement(
    config: &AtomicConfiguration,
    i: usize,
    j: usize,
    shift: [i32; 3],
) -> Result<Vec3> {
    let n = config.len();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    let mut d = linalg::sub(config.positions[j], config.positions[i]);
    if shift != [0, 0, 0] {
        let cell = config.cell.as_ref().ok_or(Error::SingularCell)?;
        for (k, &s) in shift.iter().enumerate() {
            if s != 0 {
                d = linalg::add(d, linalg::scale(cell[k], s as f64));
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn displacement_examples() {
        let c = AtomicConfiguration::free(vec![[0.0; 3], [1.0, 2.0, 3.0]], vec![14, 14]).unwrap();
        assert_eq!(displacement(&c, 0, 0, [0, 0, 0]).unwrap(), [0.0; 3]);
        assert_eq!(displacement(&c, 0, 1, [0, 0, 0]).unwrap(), [1.0, 2.0, 3.0]);

        let cell = [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]];
        let p = AtomicConfiguration::periodic(vec![[0.0; 3], [9.0, 0.0, 0.0]], vec![14, 14], cell)
            .unwrap();
        assert_eq!(displacement(&p, 0, 1, [-1, 0, 0]).unwrap(), [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn displacement_is_antisymmetric() {
        let cell = [[7.0, 0.5, 0.0], [0.0, 6.0, 0.3], [0.2, 0.0, 8.0]];
        let p = AtomicConfiguration::periodic(
            vec![[0.1, 0.2, 0.3], [5.0, -1.0, 2.0]],
            vec![14, 14],
            cell,
        )
        .unwrap();
        let a = displacement(&p, 0, 1, [1, -2, 1]).unwrap();
        let b = displacement(&p, 1, 0, [-1, 2, -1]).unwrap();
        for d in 0..3 {
            assert!((a[d] + b[d]).abs() < 1e-14);
        }
    }

    #[test]
    fn displacement_rejects_bad_index() {
        let c = AtomicConfiguration::free(vec![[0.0; 3]], vec![14]).unwrap();
        assert!(matches!(
            displacement(&c, 0, 3, [0, 0, 0]),
            Err(Error::IndexOutOfRange { index: 3, len: 1 })
        ));
    }

    #[test]
    fn validation_catches_bad_shapes() {
        assert!(AtomicConfiguration::free(vec![[0.0; 3]], vec![]).is_err());
        let singular = [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            AtomicConfiguration::periodic(vec![[0.0; 3]], vec![14], singular),
            Err(Error::SingularCell)
        ));
    }
}
