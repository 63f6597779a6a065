use serde::{Deserialize, Serialize};

use crate::equivariant::{Irrep, Irreps};
use crate::vqc::AnsatzSpec;
use crate::{Error, Result};

/// How latent invariant features become per-atom energies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Readout {
    /// `Σ_k W_k·SiLU(dense(h_0e))_k` with `hidden` units.
    Classical { hidden: usize },
    /// Compression to `n_main + n_qft` angles, π·tanh squashing, circuit, affine map.
    Vqc { ansatz: AnsatzSpec },
}

impl Readout {
    pub fn ansatz(&self) -> Option<&AnsatzSpec> {
        match self {
            Readout::Vqc { ansatz } => Some(ansatz),
            Readout::Classical { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub hidden_irreps: Irreps,
    pub n_layers: usize,
    /// Å
    pub r_cut: f64,
    pub n_rbf: usize,
    pub envelope_p: u32,
    pub radial_mlp_sizes: Vec<usize>,
    pub readout: Readout,
    /// Atomic numbers, in embedding-table order.
    pub species: Vec<u32>,
    /// Messages are summed and divided by the square root of this.
    pub avg_num_neighbors: f64,
    /// Per-species energy offset (eV/atom), spread evenly over the layers.
    pub energy_shift: Vec<f64>,
    /// Multiplies every readout output (eV).
    pub energy_scale: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            hidden_irreps: "64x0e + 64x0o + 64x1o + 64x1e + 8x2o + 8x2e"
                .parse()
                .expect("valid irreps"),
            n_layers: 5,
            r_cut: 4.5,
            n_rbf: 8,
            envelope_p: 2,
            radial_mlp_sizes: vec![64, 64],
            readout: Readout::Classical { hidden: 32 },
            species: vec![14],
            avg_num_neighbors: 20.0,
            energy_shift: vec![0.0],
            energy_scale: 1.0,
        }
    }
}

impl PotentialConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_layers == 0 {
            return bad("n_layers must be at least 1");
        }
        if !(self.r_cut > 0.0) {
            return Err(Error::NonPositiveCutoff(self.r_cut));
        }
        if self.n_rbf == 0 || self.envelope_p == 0 {
            return bad("n_rbf and envelope_p must be at least 1");
        }
        if self.species.is_empty() {
            return bad("at least one species is required");
        }
        if self.energy_shift.len() != self.species.len() {
            return bad("energy_shift needs one entry per species");
        }
        if self.hidden_irreps.count(Irrep::SCALAR) == 0 {
            return bad("hidden irreps need an even scalar block for the readout");
        }
        if self
            .hidden_irreps
            .blocks()
            .iter()
            .filter(|b| b.ir.is_scalar())
            .count()
            > 1
        {
            return bad("hidden irreps must contain a single 0e block");
        }
        if self.radial_mlp_sizes.contains(&0) {
            return bad("radial MLP layers must be non-empty");
        }
        if !(self.avg_num_neighbors > 0.0) || !(self.energy_scale.is_finite()) {
            return bad("avg_num_neighbors must be positive and energy_scale finite");
        }
        match &self.readout {
            Readout::Classical { hidden } if *hidden == 0 => bad("readout hidden size is zero"),
            Readout::Vqc { ansatz } => ansatz.validate(),
            _ => Ok(()),
        }
    }

    /// Index of `z` in the species table.
    pub fn species_index(&self, z: u32) -> Result<usize> {
        self.species
            .iter()
            .position(|&s| s == z)
            .ok_or(Error::UnknownSpecies(z))
    }

    pub fn irreps_sh(&self) -> Irreps {
        Irreps::spherical_harmonics(self.hidden_irreps.l_max())
    }
}
