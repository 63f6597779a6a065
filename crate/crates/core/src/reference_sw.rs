//! Stillinger–Weber silicon, the ground-truth oracle for desk-scale datasets.
//!
//! `E = Σ_{i<j} φ₂(r_ij) + Σ_i Σ_{j<k} φ₃(r_ij, r_ik, θ_jik)` with
//! `φ₂(r) = Aε(B(σ/r)^p − (σ/r)^q)·exp(σ/(r − aσ))` and
//! `φ₃ = λε(cos θ − cos θ₀)²·exp(γσ/(r_ij − aσ))·exp(γσ/(r_ik − aσ))`.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::geometry::{build_neighbor_list, AtomicConfiguration};
use crate::linalg::{self, Mat3, Vec3};
use crate::potential::EnergyForces;
use crate::simulate::{self, EnergyModel, McProtocol};
use crate::{Error, Result};

pub const SILICON: u32 = 14;

/// Published silicon parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwParameters {
    /// eV
    pub epsilon: f64,
    /// Å
    pub sigma: f64,
    pub a: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub cos_theta0: f64,
    pub big_a: f64,
    pub big_b: f64,
    pub p: f64,
    pub q: f64,
}

impl Default for SwParameters {
    fn default() -> Self {
        Self {
            epsilon: 2.1683,
            sigma: 2.0951,
            a: 1.80,
            lambda: 21.0,
            gamma: 1.20,
            cos_theta0: -1.0 / 3.0,
            big_a: 7.049556277,
            big_b: 0.6022245584,
            p: 4.0,
            q: 0.0,
        }
    }
}

impl SwParameters {
    /// `aσ`, where both terms vanish smoothly.
    pub fn cutoff(&self) -> f64 {
        self.a * self.sigma
    }

    /// Hex SHA-256 over the little-endian parameter values, for dataset provenance.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in [
            self.epsilon,
            self.sigma,
            self.a,
            self.lambda,
            self.gamma,
            self.cos_theta0,
            self.big_a,
            self.big_b,
            self.p,
            self.q,
        ] {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `(φ₂(r), dφ₂/dr)`.
    pub fn pair(&self, r: f64) -> (f64, f64) {
        let rc = self.cutoff();
        if r >= rc {
            return (0.0, 0.0);
        }
        let s = self.sigma / r;
        let sp = s.powf(self.p);
        let sq = s.powf(self.q);
        let e = (self.sigma / (r - rc)).exp();
        let poly = self.big_b * sp - sq;
        let dpoly = (-self.p * self.big_b * sp + self.q * sq) / r;
        let de = -self.sigma / ((r - rc) * (r - rc));
        let ae = self.big_a * self.epsilon;
        (ae * poly * e, ae * e * (dpoly + poly * de))
    }

    /// `(exp(γσ/(r − aσ)), derivative)`, zero beyond the cutoff.
    fn radial3(&self, r: f64) -> (f64, f64) {
        let rc = self.cutoff();
        if r >= rc {
            return (0.0, 0.0);
        }
        let gs = self.gamma * self.sigma;
        let e = (gs / (r - rc)).exp();
        (e, -e * gs / ((r - rc) * (r - rc)))
    }
}

#[derive(Clone, Debug, Default)]
pub struct StillingerWeber {
    pub params: SwParameters,
}

impl StillingerWeber {
    pub fn new(params: SwParameters) -> Self {
        Self { params }
    }

    /// Energy, per-atom energies (one pseudo-layer) and analytic forces.
    pub fn energy_forces(&self, config: &AtomicConfiguration) -> Result<EnergyForces> {
        if let Some(&z) = config.species.iter().find(|&&z| z != SILICON) {
            return Err(Error::NonSilicon(z));
        }
        let n = config.len();
        let prm = &self.params;
        let nl = build_neighbor_list(config, prm.cutoff())?;
        let mut per_atom = vec![0.0; n];
        let mut grad = vec![[0.0; 3]; n];
        // edge gradient lands on j with + and on i with −
        let mut push = |i: usize, j: usize, g: Vec3| {
            for d in 0..3 {
                grad[j][d] += g[d];
                grad[i][d] -= g[d];
            }
        };

        let mut by_atom: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, edge) in nl.edges.iter().enumerate() {
            by_atom[edge.i].push(e);
            let r = nl.distances[e];
            let (phi, dphi) = prm.pair(r);
            per_atom[edge.i] += 0.5 * phi;
            push(edge.i, edge.j, linalg::scale(nl.vectors[e], 0.5 * dphi / r));
        }

        let le = prm.lambda * prm.epsilon;
        for (i, list) in by_atom.iter().enumerate() {
            for (a, &e1) in list.iter().enumerate() {
                let (u1, r1) = (nl.vectors[e1], nl.distances[e1]);
                let (x1, dx1) = prm.radial3(r1);
                for &e2 in &list[a + 1..] {
                    let (u2, r2) = (nl.vectors[e2], nl.distances[e2]);
                    let (x2, dx2) = prm.radial3(r2);
                    let c = linalg::dot(u1, u2) / (r1 * r2);
                    let dc = c - prm.cos_theta0;
                    per_atom[i] += le * dc * dc * x1 * x2;
                    let ang = 2.0 * le * dc * x1 * x2;
                    let g1 = linalg::add(
                        linalg::scale(linalg::sub(linalg::scale(u2, 1.0 / (r1 * r2)), linalg::scale(u1, c / (r1 * r1))), ang),
                        linalg::scale(u1, le * dc * dc * dx1 * x2 / r1),
                    );
                    let g2 = linalg::add(
                        linalg::scale(linalg::sub(linalg::scale(u1, 1.0 / (r1 * r2)), linalg::scale(u2, c / (r2 * r2))), ang),
                        linalg::scale(u2, le * dc * dc * x1 * dx2 / r2),
                    );
                    push(i, nl.edges[e1].j, g1);
                    push(i, nl.edges[e2].j, g2);
                }
            }
        }
        Ok(EnergyForces {
            total_energy: per_atom.iter().sum(),
            per_atom_per_layer: vec![per_atom],
            forces: Some(grad.iter().map(|g| [-g[0], -g[1], -g[2]]).collect()),
        })
    }

    pub fn energy(&self, config: &AtomicConfiguration) -> Result<f64> {
        Ok(self.energy_forces(config)?.total_energy)
    }
}

impl EnergyModel for StillingerWeber {
    fn energy(&self, config: &AtomicConfiguration, _key: u64) -> Result<f64> {
        StillingerWeber::energy(self, config)
    }

    fn energy_forces(&self, config: &AtomicConfiguration) -> Result<(f64, Vec<Vec3>)> {
        let ef = StillingerWeber::energy_forces(self, config)?;
        Ok((ef.total_energy, ef.forces.expect("always computed")))
    }
}

/// Energy and forces of a configuration under the default silicon parameters.
pub fn sw_energy_forces(config: &AtomicConfiguration) -> Result<EnergyForces> {
    StillingerWeber::default().energy_forces(config)
}

/// Diamond-lattice silicon: `reps³` conventional cells of edge `a0`.
pub fn diamond(a0: f64, reps: usize) -> Result<AtomicConfiguration> {
    const BASIS: [[f64; 3]; 8] = [
        [0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
        [0.25, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.75, 0.25, 0.75],
        [0.75, 0.75, 0.25],
    ];
    let mut pos = Vec::with_capacity(8 * reps.pow(3));
    for x in 0..reps {
        for y in 0..reps {
            for z in 0..reps {
                for b in BASIS {
                    pos.push([
                        (x as f64 + b[0]) * a0,
                        (y as f64 + b[1]) * a0,
                        (z as f64 + b[2]) * a0,
                    ]);
                }
            }
        }
    }
    let l = a0 * reps as f64;
    let n = pos.len();
    AtomicConfiguration::periodic(pos, vec![SILICON; n], [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, l]])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSpec {
    pub n_configs: usize,
    pub n_atoms: usize,
    pub cell: Mat3,
    /// K
    pub temperature: f64,
    pub seed: u64,
    /// MC sweeps before the first snapshot.
    pub equilibration_sweeps: usize,
    /// MC sweeps between snapshots.
    pub decorrelation_sweeps: usize,
    /// Start from a diamond lattice (when the cell holds whole conventional
    /// cells) instead of random insertion. A lattice start superheats: single
    /// atom moves take thousands of sweeps to melt a 64-atom crystal.
    pub lattice_start: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let l = 10.862;
        Self {
            n_configs: 1000,
            n_atoms: 64,
            cell: [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, l]],
            temperature: 3000.0,
            seed: 0,
            equilibration_sweeps: 200,
            decorrelation_sweeps: 10,
            lattice_start: false,
        }
    }
}

/// Closest allowed approach in a generated configuration (Å).
pub const MIN_SEPARATION: f64 = 1.5;

/// Starting structure: seeded random insertion with 2 Å minimum spacing, or a
/// diamond lattice if requested and `n_atoms` fills the cubic cell with whole
/// conventional cells.
pub fn initial_structure(spec: &DatasetSpec) -> Result<AtomicConfiguration> {
    let c = spec.cell;
    let cubic = c[0][1] == 0.0 && c[0][2] == 0.0 && c[1][0] == 0.0 && c[1][2] == 0.0 && c[2][0] == 0.0
        && c[2][1] == 0.0 && c[0][0] == c[1][1] && c[1][1] == c[2][2];
    let reps = ((spec.n_atoms / 8) as f64).cbrt().round() as usize;
    if spec.lattice_start && cubic && reps > 0 && 8 * reps.pow(3) == spec.n_atoms {
        return diamond(c[0][0] / reps as f64, reps);
    }
    use rand::Rng;
    let mut r = crate::rng::stream(spec.seed, &[0x5717]);
    let probe = AtomicConfiguration::periodic(vec![], vec![], c)?;
    let mut pos: Vec<Vec3> = Vec::new();
    let mut tries = 0;
    while pos.len() < spec.n_atoms {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidConfig(format!(
                "could not place {} atoms at least 2 Å apart",
                spec.n_atoms
            )));
        }
        let f: Vec3 = [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()];
        let p = linalg::vec_mat(f, &c);
        let ok = pos.iter().all(|q| linalg::norm(probe.minimum_image(linalg::sub(p, *q))) >= 2.0);
        if ok {
            pos.push(p);
        }
    }
    AtomicConfiguration::periodic(pos, vec![SILICON; spec.n_atoms], c)
}

/// Samples SW silicon with Metropolis MC at `spec.temperature` and labels
/// every snapshot with SW energies and forces. At `T = 0` only downhill
/// moves are accepted.
pub fn generate_dataset(spec: &DatasetSpec, params: &SwParameters) -> Result<Vec<AtomicConfiguration>> {
    if !(spec.temperature >= 0.0) {
        return Err(Error::NonPositiveTemperature(spec.temperature));
    }
    if spec.n_configs == 0 || spec.n_atoms == 0 {
        return Err(Error::Empty("dataset with no configurations or atoms".into()));
    }
    let sw = StillingerWeber::new(*params);
    let start = initial_structure(spec)?;
    let protocol = McProtocol {
        temperature: spec.temperature,
        equilibration_sweeps: spec.equilibration_sweeps,
        sweeps: spec.n_configs * spec.decorrelation_sweeps,
        stride: spec.decorrelation_sweeps.max(1),
        max_displacement: 0.1,
        seed: spec.seed,
    };
    let traj = simulate::run_mc(&start, &sw, &protocol)?;
    let hash = params.hash();
    let mut out = Vec::with_capacity(spec.n_configs);
    // without decorrelation sweeps every frame is the equilibrated start
    let skip = usize::from(spec.decorrelation_sweeps > 0);
    for k in 0..spec.n_configs {
        let snap = &traj.snapshots[(skip + k).min(traj.snapshots.len() - 1)];
        let mut c = snap.config.clone();
        check_density(&c)?;
        let ef = sw.energy_forces(&c)?;
        c.energy = Some(ef.total_energy);
        c.forces = ef.forces;
        c.info.insert("generator".into(), format!("hqcmlp-{}", env!("CARGO_PKG_VERSION")));
        c.info.insert("seed".into(), spec.seed.to_string());
        c.info.insert("temperature_K".into(), format!("{}", spec.temperature));
        c.info.insert("sw_hash".into(), hash.clone());
        c.info.insert("frame".into(), k.to_string());
        out.push(c);
    }
    Ok(out)
}

fn check_density(c: &AtomicConfiguration) -> Result<()> {
    let nl = build_neighbor_list(c, MIN_SEPARATION)?;
    if let Some((e, d)) = nl.edges.iter().zip(&nl.distances).next() {
        return Err(Error::UnphysicalDensity {
            i: e.i,
            j: e.j,
            distance: *d,
        });
    }
    Ok(())
}
