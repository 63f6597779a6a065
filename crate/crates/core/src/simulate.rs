//! Molecular dynamics (velocity Verlet, Nosé–Hoover chain) and Metropolis
//! Monte Carlo over any [`EnergyModel`].
//!
//! Units: Å, fs, amu, eV, K.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{xyz, AtomicConfiguration};
use crate::linalg::{self, Vec3};
use crate::potential::Potential;
use crate::rng;
use crate::vqc::MeasurementMode;
use crate::{Error, Result};

pub mod units {
    /// Boltzmann constant, eV/K.
    pub const KB: f64 = 8.617333262e-5;
    /// Acceleration of 1 eV/Å acting on 1 amu, in Å/fs².
    pub const ACCEL: f64 = 9.64853321e-3;
    /// amu
    pub const SILICON_MASS: f64 = 28.0855;
}

use units::{ACCEL, KB};

/// Anything that assigns an energy (and, for MD, forces) to a configuration.
pub trait EnergyModel: Sync {
    /// `key` distinguishes repeated evaluations for models with sampling noise.
    fn energy(&self, config: &AtomicConfiguration, key: u64) -> Result<f64>;
    fn energy_forces(&self, config: &AtomicConfiguration) -> Result<(f64, Vec<Vec3>)>;
}

/// A trained potential evaluated in a fixed measurement mode.
pub struct PotentialModel<'a> {
    pub potential: &'a Potential,
    pub mode: MeasurementMode,
}

impl EnergyModel for PotentialModel<'_> {
    fn energy(&self, config: &AtomicConfiguration, key: u64) -> Result<f64> {
        Ok(self
            .potential
            .energy_forces_keyed(config, &self.mode, false, key)?
            .total_energy)
    }

    fn energy_forces(&self, config: &AtomicConfiguration) -> Result<(f64, Vec<Vec3>)> {
        let ef = self.potential.energy_forces(config, &self.mode, true)?;
        Ok((ef.total_energy, ef.forces.expect("requested")))
    }
}

/// `E = ½ k |r − r₀|²` summed over atoms; an analytic oracle for tests.
#[derive(Clone, Debug)]
pub struct Harmonic {
    pub k: f64,
    pub centers: Vec<Vec3>,
}

impl EnergyModel for Harmonic {
    fn energy(&self, config: &AtomicConfiguration, _key: u64) -> Result<f64> {
        Ok(self.energy_forces(config)?.0)
    }

    fn energy_forces(&self, config: &AtomicConfiguration) -> Result<(f64, Vec<Vec3>)> {
        let mut e = 0.0;
        let mut f = Vec::with_capacity(config.len());
        for (p, c) in config.positions.iter().zip(&self.centers) {
            let d = linalg::sub(*p, *c);
            e += 0.5 * self.k * linalg::dot(d, d);
            f.push(linalg::scale(d, -self.k));
        }
        Ok((e, f))
    }
}

pub fn kinetic_energy(velocities: &[Vec3], masses: &[f64]) -> f64 {
    velocities
        .iter()
        .zip(masses)
        .map(|(v, m)| 0.5 * m * linalg::dot(*v, *v))
        .sum::<f64>()
        / ACCEL
}

/// Velocities from Maxwell–Boltzmann at `temperature` with zero total momentum.
pub fn maxwell_boltzmann<R: Rng + ?Sized>(masses: &[f64], temperature: f64, rng: &mut R) -> Vec<Vec3> {
    let mut v: Vec<Vec3> = masses
        .iter()
        .map(|m| {
            let s = (KB * temperature * ACCEL / m).sqrt();
            let mut x = [0.0; 3];
            for c in x.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *c = z * s;
            }
            x
        })
        .collect();
    if masses.len() > 1 {
        let mt: f64 = masses.iter().sum();
        let mut p = [0.0; 3];
        for (vi, m) in v.iter().zip(masses) {
            for d in 0..3 {
                p[d] += m * vi[d];
            }
        }
        for vi in v.iter_mut() {
            for d in 0..3 {
                vi[d] -= p[d] / mt;
            }
        }
    }
    v
}

/// Nosé–Hoover chain variables; `v` are thermostat velocities (1/fs).
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub xi: Vec<f64>,
    pub v: Vec<f64>,
    /// eV·fs²
    pub q: Vec<f64>,
    pub temperature: f64,
}

impl Chain {
    /// Masses `Q₁ = N_f·k_B·T·τ²`, `Q_k = k_B·T·τ²`.
    pub fn new(length: usize, temperature: f64, tau: f64, dof: usize) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::NonPositiveTemperature(temperature));
        }
        if length == 0 {
            return Err(Error::InvalidConfig("chain length must be at least 1".into()));
        }
        let kt = KB * temperature;
        let q = (0..length)
            .map(|k| if k == 0 { dof as f64 * kt * tau * tau } else { kt * tau * tau })
            .collect();
        Ok(Self {
            xi: vec![0.0; length],
            v: vec![0.0; length],
            q,
            temperature,
        })
    }

    /// Thermostat contribution to the conserved quantity.
    pub fn energy(&self, dof: usize) -> f64 {
        let kt = KB * self.temperature;
        let mut e = 0.0;
        for k in 0..self.xi.len() {
            e += 0.5 * self.q[k] * self.v[k] * self.v[k];
            e += if k == 0 { dof as f64 * kt * self.xi[0] } else { kt * self.xi[k] };
        }
        e
    }

    fn force(&self, k: usize, ke: f64, dof: usize) -> f64 {
        let kt = KB * self.temperature;
        if k == 0 {
            (2.0 * ke - dof as f64 * kt) / self.q[0]
        } else {
            (self.q[k - 1] * self.v[k - 1] * self.v[k - 1] - kt) / self.q[k]
        }
    }

    /// Propagates the chain by `dt/2` and returns the particle velocity scale.
    fn half_step(&mut self, ke: f64, dof: usize, dt: f64) -> f64 {
        let m = self.v.len();
        let (d2, d4, d8) = (dt / 2.0, dt / 4.0, dt / 8.0);
        let update = |c: &mut Self, k: usize, ke: f64| {
            if k + 1 < m {
                c.v[k] *= (-c.v[k + 1] * d8).exp();
            }
            c.v[k] += c.force(k, ke, dof) * d4;
            if k + 1 < m {
                c.v[k] *= (-c.v[k + 1] * d8).exp();
            }
        };
        for k in (0..m).rev() {
            update(self, k, ke);
        }
        let s = (-self.v[0] * d2).exp();
        let ke = ke * s * s;
        for k in 0..m {
            self.xi[k] += self.v[k] * d2;
        }
        for k in 0..m {
            update(self, k, ke);
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct MdState {
    pub config: AtomicConfiguration,
    /// Å/fs
    pub velocities: Vec<Vec3>,
    /// amu
    pub masses: Vec<f64>,
    /// eV/Å, consistent with `config`.
    pub forces: Vec<Vec3>,
    pub e_pot: f64,
    pub chain: Option<Chain>,
    /// fs
    pub time: f64,
    pub step: usize,
    /// Degrees of freedom for the kinetic temperature.
    pub dof: usize,
}

impl MdState {
    pub fn new(
        config: AtomicConfiguration,
        velocities: Vec<Vec3>,
        masses: Vec<f64>,
        model: &dyn EnergyModel,
    ) -> Result<Self> {
        let n = config.len();
        if velocities.len() != n || masses.len() != n {
            return Err(Error::Shape(format!(
                "{n} atoms, {} velocities, {} masses",
                velocities.len(),
                masses.len()
            )));
        }
        let (e_pot, forces) = model.energy_forces(&config)?;
        let dof = if n > 1 { 3 * n - 3 } else { 3 * n };
        Ok(Self {
            config,
            velocities,
            masses,
            forces,
            e_pot,
            chain: None,
            time: 0.0,
            step: 0,
            dof,
        })
    }

    pub fn kinetic_energy(&self) -> f64 {
        kinetic_energy(&self.velocities, &self.masses)
    }

    pub fn temperature(&self) -> f64 {
        2.0 * self.kinetic_energy() / (self.dof as f64 * KB)
    }

    /// `E_pot + E_kin`, plus the thermostat energy when a chain is attached.
    pub fn conserved(&self) -> f64 {
        self.e_pot + self.kinetic_energy() + self.chain.as_ref().map_or(0.0, |c| c.energy(self.dof))
    }

    fn scale_velocities(&mut self, s: f64) {
        for v in self.velocities.iter_mut() {
            *v = linalg::scale(*v, s);
        }
    }
}

/// One kick–drift–kick step.
pub fn velocity_verlet_step(state: &mut MdState, model: &dyn EnergyModel, dt: f64) -> Result<()> {
    for ((v, f), m) in state.velocities.iter_mut().zip(&state.forces).zip(&state.masses) {
        for d in 0..3 {
            v[d] += 0.5 * dt * f[d] * ACCEL / m;
        }
    }
    for (p, v) in state.config.positions.iter_mut().zip(&state.velocities) {
        for d in 0..3 {
            p[d] += dt * v[d];
        }
    }
    let (e, f) = model.energy_forces(&state.config)?;
    state.e_pot = e;
    state.forces = f;
    for ((v, f), m) in state.velocities.iter_mut().zip(&state.forces).zip(&state.masses) {
        for d in 0..3 {
            v[d] += 0.5 * dt * f[d] * ACCEL / m;
        }
    }
    state.time += dt;
    state.step += 1;
    Ok(())
}

/// Chain half step, velocity Verlet, chain half step. The state's chain
/// must already be attached.
pub fn nose_hoover_step(state: &mut MdState, model: &dyn EnergyModel, dt: f64) -> Result<()> {
    let dof = state.dof;
    let mut chain = state
        .chain
        .take()
        .ok_or_else(|| Error::InvalidConfig("no thermostat attached".into()))?;
    let s = chain.half_step(state.kinetic_energy(), dof, dt);
    state.scale_velocities(s);
    let r = velocity_verlet_step(state, model, dt);
    if r.is_ok() {
        let s = chain.half_step(state.kinetic_energy(), dof, dt);
        state.scale_velocities(s);
    }
    state.chain = Some(chain);
    r
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ensemble {
    Nve,
    Nvt {
        /// K
        temperature: f64,
        chain_length: usize,
        /// fs; `None` means `100·dt`.
        tau: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdProtocol {
    pub ensemble: Ensemble,
    /// fs
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
    /// Initial Maxwell–Boltzmann temperature (K); `None` starts at rest.
    pub initial_temperature: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub config: AtomicConfiguration,
    pub step: usize,
    /// fs for MD, sweeps for MC.
    pub time: f64,
    pub e_pot: f64,
    pub e_kin: f64,
    pub temperature: f64,
    /// MD: `H(t) − H(0)`; MC: running acceptance ratio.
    pub monitor: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// `"delta_h"` or `"acceptance"`.
    pub monitor_name: &'static str,
}

impl Trajectory {
    pub fn configs(&self) -> Vec<AtomicConfiguration> {
        self.snapshots.iter().map(|s| s.config.clone()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "step,time_fs,e_pot,e_kin,t_inst,{}", self.monitor_name)?;
        for s in &self.snapshots {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.step, s.time, s.e_pot, s.e_kin, s.temperature, s.monitor
            )?;
        }
        Ok(())
    }

    /// Multi-frame extended XYZ next to a CSV sidecar with the same stem.
    pub fn write(&self, xyz_path: impl AsRef<Path>, csv_path: impl AsRef<Path>) -> Result<()> {
        let mut frames = Vec::with_capacity(self.snapshots.len());
        for s in &self.snapshots {
            let mut c = s.config.clone();
            c.energy = Some(s.e_pot);
            c.info.insert("step".into(), s.step.to_string());
            frames.push(c);
        }
        xyz::write_file(xyz_path, &frames)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Non-periodic runs abort once an atom is this far from the initial centroid (Å).
pub const ESCAPE_RADIUS: f64 = 100.0;

fn centroid(c: &AtomicConfiguration) -> Vec3 {
    let n = c.len().max(1) as f64;
    let mut s = [0.0; 3];
    for p in &c.positions {
        s = linalg::add(s, *p);
    }
    linalg::scale(s, 1.0 / n)
}

pub fn run_md(
    initial: &AtomicConfiguration,
    masses: &[f64],
    model: &dyn EnergyModel,
    protocol: &MdProtocol,
) -> Result<Trajectory> {
    let mut r = rng::stream(protocol.seed, &[0x3d]);
    let velocities = match protocol.initial_temperature {
        Some(t) if t > 0.0 => maxwell_boltzmann(masses, t, &mut r),
        Some(t) if t < 0.0 => return Err(Error::NonPositiveTemperature(t)),
        _ => vec![[0.0; 3]; initial.len()],
    };
    let mut state = MdState::new(initial.clone(), velocities, masses.to_vec(), model)?;
    run_md_from(&mut state, model, protocol)
}

/// Continues an existing state; the returned trajectory starts with its current snapshot.
pub fn run_md_from(state: &mut MdState, model: &dyn EnergyModel, protocol: &MdProtocol) -> Result<Trajectory> {
    if let Ensemble::Nvt {
        temperature,
        chain_length,
        tau,
    } = protocol.ensemble
    {
        if state.chain.is_none() {
            let tau = tau.unwrap_or(100.0 * protocol.dt);
            state.chain = Some(Chain::new(chain_length, temperature, tau, state.dof)?);
        }
    }
    let stride = protocol.stride.max(1);
    let h0 = state.conserved();
    let center = centroid(&state.config);
    let snap = |s: &MdState| Snapshot {
        config: s.config.clone(),
        step: s.step,
        time: s.time,
        e_pot: s.e_pot,
        e_kin: s.kinetic_energy(),
        temperature: s.temperature(),
        monitor: s.conserved() - h0,
    };
    let mut traj = Trajectory {
        snapshots: vec![snap(state)],
        monitor_name: "delta_h",
    };
    for k in 1..=protocol.n_steps {
        match protocol.ensemble {
            Ensemble::Nve => velocity_verlet_step(state, model, protocol.dt)?,
            Ensemble::Nvt { .. } => nose_hoover_step(state, model, protocol.dt)?,
        }
        if !state.config.is_periodic() {
            if let Some(i) = state
                .config
                .positions
                .iter()
                .position(|p| linalg::norm(linalg::sub(*p, center)) > ESCAPE_RADIUS)
            {
                return Err(Error::AtomEscaped(i));
            }
        }
        if k % stride == 0 {
            traj.snapshots.push(snap(state));
        }
    }
    Ok(traj)
}

/// Metropolis rule with a pre-drawn uniform `u ∈ [0, 1)`.
pub fn metropolis_accept(delta_e: f64, temperature: f64, u: f64) -> bool {
    if delta_e <= 0.0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    u < (-delta_e / (KB * temperature)).exp()
}

#[derive(Clone, Debug)]
pub struct McState {
    pub config: AtomicConfiguration,
    /// eV; the value the chain last accepted.
    pub energy: f64,
    /// K
    pub temperature: f64,
    /// Å
    pub max_displacement: f64,
    pub accepted: u64,
    pub attempted: u64,
    pub rng: rng::Rng,
    /// Counts energy evaluations; passed to the model as the sampling key.
    pub evaluations: u64,
}

impl McState {
    pub fn new(
        config: AtomicConfiguration,
        model: &dyn EnergyModel,
        temperature: f64,
        max_displacement: f64,
        seed: u64,
    ) -> Result<Self> {
        if temperature < 0.0 || !temperature.is_finite() {
            return Err(Error::NonPositiveTemperature(temperature));
        }
        let energy = model.energy(&config, 0)?;
        Ok(Self {
            config,
            energy,
            temperature,
            max_displacement,
            accepted: 0,
            attempted: 0,
            rng: rng::stream(seed, &[0x3c]),
            evaluations: 1,
        })
    }

    pub fn acceptance(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

/// Uniform single-atom displacement within `±max_displacement` per axis.
pub fn metropolis_step(state: &mut McState, model: &dyn EnergyModel) -> Result<bool> {
    let n = state.config.len();
    if n == 0 {
        return Ok(false);
    }
    let i = state.rng.random_range(0..n);
    let delta = state.max_displacement;
    let mut d = [0.0; 3];
    for c in d.iter_mut() {
        *c = state.rng.random_range(-delta..=delta);
    }
    let old = state.config.positions[i];
    state.config.positions[i] = linalg::add(old, d);
    let e_new = model.energy(&state.config, state.evaluations);
    state.evaluations += 1;
    state.attempted += 1;
    let u: f64 = state.rng.random();
    let accept = match e_new {
        Ok(e) => metropolis_accept(e - state.energy, state.temperature, u).then_some(e),
        // a move that brings atoms on top of each other is simply rejected
        Err(Error::OverlappingAtoms { .. }) => None,
        Err(e) => {
            state.config.positions[i] = old;
            return Err(e);
        }
    };
    match accept {
        Some(e) => {
            state.energy = e;
            state.accepted += 1;
            Ok(true)
        }
        None => {
            state.config.positions[i] = old;
            Ok(false)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McProtocol {
    /// K
    pub temperature: f64,
    /// Sweeps with step-size tuning toward 40–60 % acceptance, not recorded.
    pub equilibration_sweeps: usize,
    /// Production sweeps at the frozen step size.
    pub sweeps: usize,
    pub stride: usize,
    /// Initial step size (Å).
    pub max_displacement: f64,
    pub seed: u64,
}

fn sweep(state: &mut McState, model: &dyn EnergyModel) -> Result<f64> {
    let n = state.config.len();
    let mut acc = 0;
    for _ in 0..n {
        acc += metropolis_step(state, model)? as usize;
    }
    Ok(acc as f64 / n.max(1) as f64)
}

pub fn run_mc(initial: &AtomicConfiguration, model: &dyn EnergyModel, protocol: &McProtocol) -> Result<Trajectory> {
    let mut state = McState::new(
        initial.clone(),
        model,
        protocol.temperature,
        protocol.max_displacement,
        protocol.seed,
    )?;
    for _ in 0..protocol.equilibration_sweeps {
        let a = sweep(&mut state, model)?;
        if a > 0.6 {
            state.max_displacement *= 1.1;
        } else if a < 0.4 {
            state.max_displacement *= 0.9;
        }
    }
    state.accepted = 0;
    state.attempted = 0;
    let stride = protocol.stride.max(1);
    let snap = |s: &McState, k: usize| Snapshot {
        config: s.config.clone(),
        step: k,
        time: k as f64,
        e_pot: s.energy,
        e_kin: 0.0,
        temperature: s.temperature,
        monitor: s.acceptance(),
    };
    let mut traj = Trajectory {
        snapshots: vec![snap(&state, 0)],
        monitor_name: "acceptance",
    };
    for k in 1..=protocol.sweeps {
        sweep(&mut state, model)?;
        if k % stride == 0 {
            traj.snapshots.push(snap(&state, k));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_sw::{diamond, StillingerWeber};

    fn particle(p: Vec3) -> AtomicConfiguration {
        AtomicConfiguration::free(vec![p], vec![14]).unwrap()
    }

    struct Free;
    impl EnergyModel for Free {
        fn energy(&self, _: &AtomicConfiguration, _: u64) -> Result<f64> {
            Ok(0.0)
        }
        fn energy_forces(&self, c: &AtomicConfiguration) -> Result<(f64, Vec<Vec3>)> {
            Ok((0.0, vec![[0.0; 3]; c.len()]))
        }
    }

    #[test]
    fn free_particle_drifts() {
        let mut s = MdState::new(particle([1.0, 2.0, 3.0]), vec![[0.1, -0.2, 0.0]], vec![28.0], &Free).unwrap();
        velocity_verlet_step(&mut s, &Free, 0.5).unwrap();
        assert_eq!(s.config.positions[0], [1.0 + 0.05, 2.0 - 0.1, 3.0]);
        assert_eq!(s.time, 0.5);
    }

    #[test]
    fn harmonic_period() {
        let (k, m) = (2.0, 28.0);
        let omega = (k * ACCEL / m).sqrt();
        let period = 2.0 * std::f64::consts::PI / omega;
        let dt = period / 1000.0;
        let h = Harmonic {
            k,
            centers: vec![[0.0; 3]],
        };
        let mut s = MdState::new(particle([0.1, 0.0, 0.0]), vec![[0.0; 3]], vec![m], &h).unwrap();
        // time between successive upward zero crossings of the velocity
        let mut crossings = Vec::new();
        let mut prev = s.velocities[0][0];
        for _ in 0..3000 {
            velocity_verlet_step(&mut s, &h, dt).unwrap();
            let v = s.velocities[0][0];
            if prev < 0.0 && v >= 0.0 {
                let frac = -prev / (v - prev);
                crossings.push(s.time - dt + frac * dt);
            }
            prev = v;
        }
        assert!(crossings.len() >= 2);
        let measured = crossings[1] - crossings[0];
        assert!((measured / period - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nve_is_time_reversible() {
        let sw = StillingerWeber::default();
        let mut c = diamond(5.431, 1).unwrap();
        let mut r = rng::stream(3, &[]);
        for p in c.positions.iter_mut() {
            for d in p.iter_mut() {
                *d += r.random_range(-0.1..0.1);
            }
        }
        let masses = vec![units::SILICON_MASS; 8];
        let v = maxwell_boltzmann(&masses, 1000.0, &mut r);
        let start = c.positions.clone();
        let mut s = MdState::new(c, v, masses, &sw).unwrap();
        for _ in 0..100 {
            velocity_verlet_step(&mut s, &sw, 0.5).unwrap();
        }
        s.velocities.iter_mut().for_each(|v| *v = linalg::scale(*v, -1.0));
        for _ in 0..100 {
            velocity_verlet_step(&mut s, &sw, 0.5).unwrap();
        }
        for (a, b) in s.config.positions.iter().zip(&start) {
            assert!(linalg::norm(linalg::sub(*a, *b)) < 1e-8);
        }
    }

    #[test]
    fn nvt_at_equilibrium_starts_like_plain_verlet() {
        let sw = StillingerWeber::default();
        let c = diamond(5.431, 1).unwrap();
        let masses = vec![units::SILICON_MASS; 8];
        let mut r = rng::stream(8, &[]);
        let v = maxwell_boltzmann(&masses, 500.0, &mut r);
        let mut a = MdState::new(c, v, masses, &sw).unwrap();
        let t = a.temperature();
        let mut b = a.clone();
        a.chain = Some(Chain::new(3, t, 50.0, a.dof).unwrap());
        nose_hoover_step(&mut a, &sw, 0.5).unwrap();
        velocity_verlet_step(&mut b, &sw, 0.5).unwrap();
        for (x, y) in a.velocities.iter().zip(&b.velocities) {
            assert!(linalg::norm(linalg::sub(*x, *y)) < 1e-7 * linalg::norm(*y).max(1e-3));
        }
        assert!(matches!(Chain::new(3, 0.0, 1.0, 3), Err(Error::NonPositiveTemperature(_))));
    }

    #[test]
    fn zero_steps_and_zero_sweeps() {
        let sw = StillingerWeber::default();
        let c = diamond(5.431, 1).unwrap();
        let md = run_md(
            &c,
            &[units::SILICON_MASS; 8],
            &sw,
            &MdProtocol {
                ensemble: Ensemble::Nve,
                dt: 0.5,
                n_steps: 0,
                stride: 1,
                initial_temperature: Some(300.0),
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(md.snapshots.len(), 1);
        let mc = run_mc(
            &c,
            &sw,
            &McProtocol {
                temperature: 300.0,
                equilibration_sweeps: 0,
                sweeps: 0,
                stride: 1,
                max_displacement: 0.1,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(mc.snapshots.len(), 1);
        assert_eq!(mc.snapshots[0].config, c);
    }

    #[test]
    fn metropolis_rule() {
        assert!(metropolis_accept(-1.0, 300.0, 0.999));
        assert!(metropolis_accept(0.0, 300.0, 0.999));
        let kt = KB * 300.0;
        let mut r = rng::stream(2, &[]);
        let n = 100_000;
        let acc = (0..n).filter(|_| metropolis_accept(kt, 300.0, r.random())).count();
        let freq = acc as f64 / n as f64;
        assert!((freq / (-1f64).exp() - 1.0).abs() < 0.01, "{freq}");
    }

    #[test]
    fn harmonic_variance_matches_boltzmann() {
        let (k, t) = (1.5, 800.0);
        let h = Harmonic {
            k,
            centers: vec![[0.0; 3]],
        };
        let mut s = McState::new(particle([0.0; 3]), &h, t, 0.4, 17).unwrap();
        let mut sum2 = 0.0;
        let n = 400_000;
        for _ in 0..n {
            metropolis_step(&mut s, &h).unwrap();
            sum2 += s.config.positions[0].iter().map(|x| x * x).sum::<f64>();
        }
        let var = sum2 / (3.0 * n as f64);
        assert!((var / (KB * t / k) - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn mc_is_seeded() {
        let sw = StillingerWeber::default();
        let c = diamond(5.431, 1).unwrap();
        let p = McProtocol {
            temperature: 2000.0,
            equilibration_sweeps: 3,
            sweeps: 4,
            stride: 2,
            max_displacement: 0.2,
            seed: 4,
        };
        let a = run_mc(&c, &sw, &p).unwrap();
        let b = run_mc(&c, &sw, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 3);
        let last = a.snapshots.last().unwrap();
        assert!((sw.energy(&last.config).unwrap() - last.e_pot).abs() < 1e-12);
    }
}
