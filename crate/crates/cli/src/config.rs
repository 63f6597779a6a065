use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hqcmlp::potential::{PotentialConfig, Readout};
use hqcmlp::reference_sw::DatasetSpec;
use hqcmlp::simulate::{Ensemble, McProtocol, MdProtocol};
use hqcmlp::training::TrainConfig;
use hqcmlp::vqc::{AnsatzSpec, Variant};
use serde::{Deserialize, Serialize};

/// Everything one experiment needs. Missing keys take their defaults; unknown
/// keys are an error.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Derive `avg_num_neighbors`, the energy shift and the readout scale
    /// from the training split before initializing a fresh model.
    pub normalize_from_data: Option<bool>,
    pub files: Files,
    pub data: DataSection,
    pub model: PotentialConfig,
    pub training: TrainConfig,
    pub md: MdSection,
    pub mc: McSection,
    pub rdf: RdfSection,
    pub shots: ShotsSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Files {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub trajectory: PathBuf,
    pub trajectory_csv: PathBuf,
    pub rdf_csv: PathBuf,
    pub shots_csv: PathBuf,
}

impl Default for Files {
    fn default() -> Self {
        Self {
            dataset: "dataset.xyz".into(),
            checkpoint: "checkpoint.json".into(),
            loss_csv: "loss.csv".into(),
            trajectory: "trajectory.xyz".into(),
            trajectory_csv: "trajectory.csv".into(),
            rdf_csv: "rdf.csv".into(),
            shots_csv: "shots.csv".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub n_configs: usize,
    pub n_atoms: usize,
    /// Cubic cell edge (Å).
    pub cell_length: f64,
    pub temperature: f64,
    pub equilibration_sweeps: usize,
    pub decorrelation_sweeps: usize,
    pub lattice_start: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = DatasetSpec::default();
        Self {
            n_configs: d.n_configs,
            n_atoms: d.n_atoms,
            cell_length: d.cell[0][0],
            temperature: d.temperature,
            equilibration_sweeps: d.equilibration_sweeps,
            decorrelation_sweeps: d.decorrelation_sweeps,
            lattice_start: d.lattice_start,
        }
    }
}

impl DataSection {
    pub fn spec(&self, seed: u64) -> DatasetSpec {
        let l = self.cell_length;
        DatasetSpec {
            n_configs: self.n_configs,
            n_atoms: self.n_atoms,
            cell: [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, l]],
            temperature: self.temperature,
            seed,
            equilibration_sweeps: self.equilibration_sweeps,
            decorrelation_sweeps: self.decorrelation_sweeps,
            lattice_start: self.lattice_start,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Nve,
    Nvt,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdSection {
    pub ensemble: EnsembleKind,
    /// Thermostat target (K).
    pub temperature: f64,
    pub chain_length: usize,
    /// Thermostat time constant (fs); defaults to 100 steps.
    pub tau: Option<f64>,
    /// fs
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
    /// Maxwell–Boltzmann draw (K); defaults to the thermostat target.
    pub initial_temperature: Option<f64>,
}

impl Default for MdSection {
    fn default() -> Self {
        Self {
            ensemble: EnsembleKind::Nvt,
            temperature: 2000.0,
            chain_length: 3,
            tau: None,
            dt: 0.5,
            n_steps: 2000,
            stride: 10,
            initial_temperature: None,
        }
    }
}

impl MdSection {
    pub fn protocol(&self, seed: u64) -> MdProtocol {
        MdProtocol {
            ensemble: match self.ensemble {
                EnsembleKind::Nve => Ensemble::Nve,
                EnsembleKind::Nvt => Ensemble::Nvt {
                    temperature: self.temperature,
                    chain_length: self.chain_length,
                    tau: self.tau,
                },
            },
            dt: self.dt,
            n_steps: self.n_steps,
            stride: self.stride,
            initial_temperature: Some(self.initial_temperature.unwrap_or(self.temperature)),
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub temperature: f64,
    pub equilibration_sweeps: usize,
    pub sweeps: usize,
    pub stride: usize,
    pub max_displacement: f64,
    /// Energy-only sampling with a shot-mode circuit readout.
    pub shots: Option<u64>,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            temperature: 2000.0,
            equilibration_sweeps: 200,
            sweeps: 1000,
            stride: 5,
            max_displacement: 0.1,
            shots: None,
        }
    }
}

impl McSection {
    pub fn protocol(&self, seed: u64) -> McProtocol {
        McProtocol {
            temperature: self.temperature,
            equilibration_sweeps: self.equilibration_sweeps,
            sweeps: self.sweeps,
            stride: self.stride,
            max_displacement: self.max_displacement,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RdfSection {
    pub r_max: f64,
    pub bin_width: f64,
    /// Range of the L2 comparison against a reference trajectory.
    pub compare_range: (f64, f64),
}

impl Default for RdfSection {
    fn default() -> Self {
        Self {
            r_max: hqcmlp::analysis::DEFAULT_R_MAX,
            bin_width: hqcmlp::analysis::DEFAULT_BIN_WIDTH,
            compare_range: (1.5, 4.5),
        }
    }
}

impl RdfSection {
    pub fn n_bins(&self) -> Result<usize> {
        if !(self.bin_width > 0.0) || !(self.r_max > 0.0) {
            bail!("rdf.r_max and rdf.bin_width must be positive");
        }
        Ok((self.r_max / self.bin_width).round() as usize)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotsSection {
    pub counts: Vec<u64>,
    pub repeats: usize,
    /// Configurations drawn from the front of the test split.
    pub n_configs: usize,
}

impl Default for ShotsSection {
    fn default() -> Self {
        Self {
            counts: (3..=8).map(|k| 1u64 << (2 * k)).collect(),
            repeats: 20,
            n_configs: 20,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn normalize(&self) -> bool {
        self.normalize_from_data.unwrap_or(true)
    }
}

/// `classical` or `vqc:<Variant>`.
pub fn parse_readout(s: &str) -> Result<Readout> {
    if s.eq_ignore_ascii_case("classical") {
        return Ok(Readout::Classical { hidden: 32 });
    }
    match s.split_once(':') {
        Some((kind, variant)) if kind.eq_ignore_ascii_case("vqc") => {
            let v: Variant = variant.parse()?;
            Ok(Readout::Vqc { ansatz: AnsatzSpec::new(v) })
        }
        _ => bail!("readout must be 'classical' or 'vqc:<Variant>', got '{s}'"),
    }
}
