//! Equivariant message-passing potential with classical or circuit readouts.
//!
//! Each interaction layer emits one energy per atom; the total energy is the
//! sum over atoms and layers, and forces are its negative position gradient.

mod checkpoint;
mod config;
mod model;

pub use checkpoint::{Checkpoint, OptimizerState, TrainingMetadata, CHECKPOINT_VERSION};
pub use config::{PotentialConfig, Readout};
pub use model::{Model, ParamEntry};

use model::{Eval, Graph};

use crate::equivariant::{EquivariantTensor, Irreps};
use crate::geometry::{build_neighbor_list, NeighborList};
use crate::geometry::AtomicConfiguration;
use crate::linalg::Vec3;
use crate::real::{Dual, Real};
use crate::vqc::MeasurementMode;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyForces {
    /// eV
    pub total_energy: f64,
    /// `[layer][atom]`, eV; sums to `total_energy`.
    pub per_atom_per_layer: Vec<Vec<f64>>,
    /// eV/Å, present when requested.
    pub forces: Option<Vec<Vec3>>,
}

/// Everything the training loss needs from one labelled configuration.
#[derive(Clone, Debug)]
pub struct ConfigGradient {
    pub energy: f64,
    pub forces: Vec<Vec3>,
    /// `∂E/∂θ`
    pub d_energy: Vec<f64>,
    /// `∂/∂θ Σ_i |F̂_i − F_i|²` for the reference forces that were supplied.
    pub d_force_sq: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Potential {
    model: Model,
    params: Vec<f64>,
}

impl Potential {
    /// Freshly initialized parameters drawn from `seed`.
    pub fn new(config: &PotentialConfig, seed: u64) -> Result<Self> {
        let model = Model::new(config)?;
        let params = model.init_params(seed);
        Ok(Self { model, params })
    }

    pub fn from_params(config: &PotentialConfig, params: Vec<f64>) -> Result<Self> {
        let model = Model::new(config)?;
        if params.len() != model.n_params {
            return Err(Error::Shape(format!(
                "{} parameters for a model needing {}",
                params.len(),
                model.n_params
            )));
        }
        Ok(Self { model, params })
    }

    pub fn config(&self) -> &PotentialConfig {
        &self.model.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for a model needing {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn species_indices(&self, species: &[u32]) -> Result<Vec<usize>> {
        species
            .iter()
            .map(|&z| self.model.config.species_index(z))
            .collect()
    }

    fn graph<T: Real>(
        &self,
        species: &[u32],
        nl: &NeighborList,
        tangent: Option<&[Vec3]>,
    ) -> Result<Graph<T>> {
        let edges: Vec<(usize, usize)> = nl.edges.iter().map(|e| (e.i, e.j)).collect();
        let vectors = nl
            .vectors
            .iter()
            .zip(&edges)
            .map(|(v, &(i, j))| {
                let mut out = [T::zero(); 3];
                for d in 0..3 {
                    out[d] = T::cst(v[d]);
                    if let Some(t) = tangent {
                        out[d] = out[d].with_tangent(t[j][d] - t[i][d]);
                    }
                }
                out
            })
            .collect();
        Ok(Graph {
            species: self.species_indices(species)?,
            edges,
            vectors,
        })
    }

    fn neighbors(&self, config: &AtomicConfiguration) -> Result<NeighborList> {
        build_neighbor_list(config, self.model.config.r_cut)
    }

    /// Energy (and optionally forces) with stream key 0 for shot sampling.
    pub fn energy_forces(
        &self,
        config: &AtomicConfiguration,
        mode: &MeasurementMode,
        with_forces: bool,
    ) -> Result<EnergyForces> {
        self.energy_forces_keyed(config, mode, with_forces, 0)
    }

    /// Like [`Potential::energy_forces`]; under shots, atom `i` of layer `t`
    /// draws from the stream `(seed, i, t, key)`.
    pub fn energy_forces_keyed(
        &self,
        config: &AtomicConfiguration,
        mode: &MeasurementMode,
        with_forces: bool,
        key: u64,
    ) -> Result<EnergyForces> {
        let quantum = self.model.config.readout.ansatz().is_some();
        if with_forces && quantum && matches!(mode, MeasurementMode::Shots { .. }) {
            return Err(Error::ForcesUnavailableUnderShots);
        }
        if let MeasurementMode::Shots { shots: 0, .. } = mode {
            return Err(Error::ZeroShots);
        }
        let nl = self.neighbors(config)?;
        let g = self.graph::<f64>(&config.species, &nl, None)?;
        let eval = Eval::from_mode(mode, key, with_forces);
        let tape = self.model.forward(&self.params, &g, eval)?;
        let n = config.len();
        let per_atom_per_layer = tape.energies.chunks(n.max(1)).map(|c| c.to_vec()).collect();
        let forces = with_forces.then(|| {
            let (_, gvec) = self.model.backward(&self.params, &g, &tape, false);
            edge_to_forces(n, &g.edges, &gvec)
        });
        Ok(EnergyForces {
            total_energy: tape.total(),
            per_atom_per_layer: if n == 0 {
                vec![Vec::new(); self.model.layers.len()]
            } else {
                per_atom_per_layer
            },
            forces,
        })
    }

    pub fn energy(&self, config: &AtomicConfiguration, mode: &MeasurementMode) -> Result<f64> {
        Ok(self.energy_forces(config, mode, false)?.total_energy)
    }

    /// Energy, forces and parameter gradients of `E` and of the squared
    /// force error against `reference_forces` (exact readout only).
    pub fn gradients(&self, config: &AtomicConfiguration, reference_forces: &[Vec3]) -> Result<ConfigGradient> {
        let n = config.len();
        if reference_forces.len() != n {
            return Err(Error::Shape(format!(
                "{} reference forces for {n} atoms",
                reference_forces.len()
            )));
        }
        let nl = self.neighbors(config)?;
        let eval = Eval::Exact { grad: true };

        let g = self.graph::<f64>(&config.species, &nl, None)?;
        let tape = self.model.forward(&self.params, &g, eval)?;
        let (_, gvec) = self.model.backward(&self.params, &g, &tape, false);
        let forces = edge_to_forces(n, &g.edges, &gvec);
        let v: Vec<Vec3> = forces
            .iter()
            .zip(reference_forces)
            .map(|(f, r)| [f[0] - r[0], f[1] - r[1], f[2] - r[2]])
            .collect();

        // Seeding positions with tangent v turns the parameter gradient's
        // tangent into ∂(v·∇E)/∂θ = −∂(v·F̂)/∂θ.
        let gd = self.graph::<Dual>(&config.species, &nl, Some(&v))?;
        let tape_d = self.model.forward(&self.params, &gd, eval)?;
        let (gp, _) = self.model.backward(&self.params, &gd, &tape_d, true);
        Ok(ConfigGradient {
            energy: tape.total(),
            forces,
            d_energy: gp.iter().map(|d| d.re).collect(),
            d_force_sq: gp.iter().map(|d| -2.0 * d.eps).collect(),
        })
    }

    /// Hidden features before the first layer: the species embedding in the
    /// even-scalar block, zeros elsewhere.
    pub fn embed_nodes(&self, species: &[u32]) -> Result<Vec<EquivariantTensor>> {
        let idx = self.species_indices(species)?;
        let h0 = self.model.embed::<f64>(&self.params, &idx);
        let m = &self.model;
        Ok((0..idx.len())
            .map(|i| {
                let mut t = EquivariantTensor::zeros(m.config.hidden_irreps.clone());
                t.data[m.off0..m.off0 + m.mul0].copy_from_slice(&h0[i * m.mul0..(i + 1) * m.mul0]);
                t
            })
            .collect())
    }

    /// Applies interaction layer `t` to hidden features `h`. Layer 0 reads
    /// only the even-scalar block of its input.
    pub fn interaction_layer(
        &self,
        t: usize,
        h: &[EquivariantTensor],
        species: &[u32],
        nl: &NeighborList,
    ) -> Result<Vec<EquivariantTensor>> {
        let m = &self.model;
        if t >= m.layers.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: m.layers.len(),
            });
        }
        if h.len() != species.len() {
            return Err(Error::Shape(format!("{} feature tensors for {} atoms", h.len(), species.len())));
        }
        let hidden = &m.config.hidden_irreps;
        let mut flat = Vec::new();
        for x in h {
            if &x.irreps != hidden {
                return Err(Error::Shape(format!("features are {}, expected {hidden}", x.irreps)));
            }
            if t == 0 {
                flat.extend_from_slice(&x.data[m.off0..m.off0 + m.mul0]);
            } else {
                flat.extend_from_slice(&x.data);
            }
        }
        let g = self.graph::<f64>(species, nl, None)?;
        let (y, rbf, _) = m.edge_features(&g);
        let lt = m.layer_forward(t, &self.params, &g, &y, &rbf, flat);
        let dh = hidden.dim();
        lt.h_out
            .chunks(dh)
            .map(|c| EquivariantTensor::new(hidden.clone(), c.to_vec()))
            .collect()
    }

    /// Raw output of layer `t`'s readout for one atom's features, before the
    /// energy scale and per-species shift.
    pub fn readout(&self, t: usize, h: &EquivariantTensor, mode: &MeasurementMode) -> Result<f64> {
        let m = &self.model;
        if t >= m.layers.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: m.layers.len(),
            });
        }
        if h.irreps != m.config.hidden_irreps {
            return Err(Error::Shape(format!(
                "features are {}, expected {}",
                h.irreps, m.config.hidden_irreps
            )));
        }
        let (out, _) = m.readout_forward(t, &self.params, &h.data, Eval::from_mode(mode, 0, false))?;
        Ok(out[0])
    }

    pub fn hidden_irreps(&self) -> &Irreps {
        &self.model.config.hidden_irreps
    }
}

fn edge_to_forces<T: Real>(n: usize, edges: &[(usize, usize)], gvec: &[[T; 3]]) -> Vec<Vec3> {
    let mut f = vec![[0.0; 3]; n];
    for (&(i, j), g) in edges.iter().zip(gvec) {
        for d in 0..3 {
            f[i][d] += g[d].re();
            f[j][d] -= g[d].re();
        }
    }
    f
}
