//! Variational quantum circuit readout, simulated as a dense statevector.
//!
//! The readout circuit is: RY angle embedding of every wire, an optional QFT
//! on the auxiliary register, then `layers` repetitions of trainable RX
//! rotations followed by the variant's entangler. The output is `⟨Z⟩` on main
//! wire 0. Gradients with respect to both the trainable angles and the
//! embedded inputs come from a single adjoint sweep.

mod state;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::real::Real;
use crate::{Error, Result};

pub use state::{
    angle_embedding, sample_expectation, Complex, Gate, QuantumState, MAX_QUBITS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    NoEntangler,
    BasicEntanglerCX,
    BasicEntanglerCZ,
    QFTEntanglerCX,
    QFTEntanglerCZ,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::NoEntangler,
        Variant::BasicEntanglerCX,
        Variant::BasicEntanglerCZ,
        Variant::QFTEntanglerCX,
        Variant::QFTEntanglerCZ,
    ];

    pub fn uses_qft(self) -> bool {
        matches!(self, Variant::QFTEntanglerCX | Variant::QFTEntanglerCZ)
    }

    fn entangler(self, c: usize, t: usize) -> Option<Gate<f64>> {
        match self {
            Variant::NoEntangler => None,
            Variant::BasicEntanglerCX | Variant::QFTEntanglerCX => Some(Gate::CX(c, t)),
            Variant::BasicEntanglerCZ | Variant::QFTEntanglerCZ => Some(Gate::CZ(c, t)),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ansatz variant '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub variant: Variant,
    pub n_main: usize,
    pub n_qft: usize,
    pub layers: usize,
}

impl AnsatzSpec {
    /// Eight main qubits, three layers, and a three-qubit QFT register for
    /// the QFT variants.
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            n_main: 8,
            n_qft: if variant.uses_qft() { 3 } else { 0 },
            layers: 3,
        }
    }

    pub fn width(&self) -> usize {
        self.n_main + self.n_qft
    }

    pub fn n_params(&self) -> usize {
        self.layers * self.width()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidConfig("ansatz needs at least one layer".into()));
        }
        if self.n_main == 0 {
            return Err(Error::InvalidConfig("ansatz needs a main register".into()));
        }
        if (self.n_qft > 0) != self.variant.uses_qft() {
            return Err(Error::InvalidConfig(format!(
                "{} requires n_qft {} 0",
                self.variant,
                if self.variant.uses_qft() { ">" } else { "=" }
            )));
        }
        if self.width() > MAX_QUBITS {
            return Err(Error::TooManyQubits(self.width()));
        }
        Ok(())
    }
}

/// Trainable RX angles, row-major `(layers, n_main + n_qft)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VQCParams {
    pub theta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasurementMode {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Where a rotation angle comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Angle {
    Fixed,
    Theta(usize),
    Input(usize),
}

/// Standard QFT on `qubits` (first entry most significant): Hadamards,
/// controlled phases `π/2^(k−j)`, then the reversing swaps.
pub fn qft_gates(qubits: &[usize]) -> Result<Vec<Gate>> {
    if qubits.is_empty() {
        return Err(Error::InvalidConfig("QFT on an empty register".into()));
    }
    for (k, q) in qubits.iter().enumerate() {
        if qubits[..k].contains(q) {
            return Err(Error::InvalidQubit {
                qubit: *q,
                n_qubits: qubits.len(),
            });
        }
    }
    let m = qubits.len();
    let mut g = Vec::new();
    for j in 0..m {
        g.push(Gate::H(qubits[j]));
        for k in j + 1..m {
            g.push(Gate::CPhase(qubits[k], qubits[j], PI / (1u64 << (k - j)) as f64));
        }
    }
    for j in 0..m / 2 {
        g.push(Gate::Swap(qubits[j], qubits[m - 1 - j]));
    }
    Ok(g)
}

pub fn qft(state: &mut QuantumState, qubits: &[usize]) -> Result<()> {
    for g in qft_gates(qubits)? {
        state.apply(g)?;
    }
    Ok(())
}

/// Gate sequence of the trainable block (QFT preamble included).
fn ansatz_sequence(spec: &AnsatzSpec) -> Vec<(Gate<f64>, Angle)> {
    let mut seq = Vec::new();
    let w = spec.width();
    if spec.variant.uses_qft() {
        let aux: Vec<usize> = (spec.n_main..w).collect();
        for g in qft_gates(&aux).expect("aux register is non-empty") {
            seq.push((g, Angle::Fixed));
        }
    }
    for layer in 0..spec.layers {
        for k in 0..w {
            seq.push((Gate::RX(k, 0.0), Angle::Theta(layer * w + k)));
        }
        if spec.n_main > 1 {
            for k in 0..spec.n_main {
                let t = (k + 1) % spec.n_main;
                if let Some(g) = spec.variant.entangler(k, t) {
                    seq.push((g, Angle::Fixed));
                }
            }
        }
        if spec.variant.uses_qft() {
            if let Some(g) = spec.variant.entangler(spec.n_main, 0) {
                seq.push((g, Angle::Fixed));
            }
        }
    }
    seq
}

fn resolve<T: Real>(g: Gate<f64>, a: Angle, theta: &[f64], inputs: &[T]) -> Gate<T> {
    let angle = match a {
        Angle::Fixed => T::zero(),
        Angle::Theta(k) => T::cst(theta[k]),
        Angle::Input(k) => inputs[k],
    };
    match g {
        Gate::RX(q, _) => Gate::RX(q, angle),
        Gate::RY(q, _) => Gate::RY(q, angle),
        Gate::H(q) => Gate::H(q),
        Gate::CX(a, b) => Gate::CX(a, b),
        Gate::CZ(a, b) => Gate::CZ(a, b),
        Gate::CPhase(a, b, p) => Gate::CPhase(a, b, p),
        Gate::Swap(a, b) => Gate::Swap(a, b),
    }
}

fn check_shapes(spec: &AnsatzSpec, theta: &[f64], n_inputs: Option<usize>) -> Result<()> {
    spec.validate()?;
    if theta.len() != spec.n_params() {
        return Err(Error::Shape(format!(
            "{} rotation angles for an ansatz with {}",
            theta.len(),
            spec.n_params()
        )));
    }
    if let Some(n) = n_inputs {
        if n != spec.width() {
            return Err(Error::Shape(format!(
                "{n} input angles for a {}-qubit circuit",
                spec.width()
            )));
        }
    }
    Ok(())
}

/// Applies the trainable block (QFT preamble, RX layers, entanglers).
pub fn apply_ansatz(state: &mut QuantumState, spec: &AnsatzSpec, params: &VQCParams) -> Result<()> {
    check_shapes(spec, &params.theta, None)?;
    if state.n_qubits != spec.width() {
        return Err(Error::Shape(format!(
            "{}-qubit state for a {}-qubit ansatz",
            state.n_qubits,
            spec.width()
        )));
    }
    for (g, a) in ansatz_sequence(spec) {
        state.apply(resolve::<f64>(g, a, &params.theta, &[]))?;
    }
    Ok(())
}

/// Exact inverse of [`apply_ansatz`].
pub fn apply_ansatz_inverse(
    state: &mut QuantumState,
    spec: &AnsatzSpec,
    params: &VQCParams,
) -> Result<()> {
    check_shapes(spec, &params.theta, None)?;
    for (g, a) in ansatz_sequence(spec).into_iter().rev() {
        state.apply(resolve::<f64>(g, a, &params.theta, &[]).dagger())?;
    }
    Ok(())
}

/// Final state of the full readout circuit.
pub fn circuit_state<T: Real>(
    spec: &AnsatzSpec,
    theta: &[f64],
    inputs: &[T],
) -> Result<QuantumState<T>> {
    check_shapes(spec, theta, Some(inputs.len()))?;
    let mut s = state::embed(inputs)?;
    for (g, a) in ansatz_sequence(spec) {
        s.apply_unchecked(resolve(g, a, theta, inputs));
    }
    Ok(s)
}

/// Exact `⟨Z⟩` on main wire 0.
pub fn expectation<T: Real>(spec: &AnsatzSpec, theta: &[f64], inputs: &[T]) -> Result<T> {
    Ok(circuit_state(spec, theta, inputs)?.expectation_z_unchecked(0))
}

/// `⟨Z⟩` under the given measurement mode; shot noise is drawn from `rng`.
pub fn measure<R: Rng + ?Sized>(
    spec: &AnsatzSpec,
    theta: &[f64],
    inputs: &[f64],
    shots: Option<u64>,
    rng: &mut R,
) -> Result<f64> {
    let z = expectation(spec, theta, inputs)?;
    match shots {
        None => Ok(z),
        Some(s) => sample_expectation(z, s, rng),
    }
}

/// Sample estimate of `⟨Z_q⟩` for a given state.
pub fn sample_shots(state: &QuantumState, qubit: usize, mode: &MeasurementMode) -> Result<f64> {
    let z = state.expectation_z(qubit)?;
    match *mode {
        MeasurementMode::Exact => Ok(z),
        MeasurementMode::Shots { shots, seed } => {
            sample_expectation(z, shots, &mut crate::rng::stream(seed, &[]))
        }
    }
}

/// `⟨Z⟩` together with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct VqcGradients<T = f64> {
    pub value: T,
    pub d_theta: Vec<T>,
    pub d_inputs: Vec<T>,
}

/// Adjoint-method derivatives of `⟨Z_0⟩` with respect to the trainable angles
/// and the embedded input angles.
pub fn vqc_gradients<T: Real>(
    spec: &AnsatzSpec,
    theta: &[f64],
    inputs: &[T],
    mode: &MeasurementMode,
) -> Result<VqcGradients<T>> {
    if !matches!(mode, MeasurementMode::Exact) {
        return Err(Error::GradientInShotsMode);
    }
    check_shapes(spec, theta, Some(inputs.len()))?;
    let mut seq: Vec<(Gate<T>, Angle)> = (0..spec.width())
        .map(|k| (Gate::RY(k, inputs[k]), Angle::Input(k)))
        .collect();
    for (g, a) in ansatz_sequence(spec) {
        seq.push((resolve(g, a, theta, inputs), a));
    }

    let mut psi = circuit_state(spec, theta, inputs)?;
    let value = psi.expectation_z_unchecked(0);
    let mut lambda = psi.clone();
    let m0 = 1 << (spec.width() - 1);
    for (i, a) in lambda.amps.iter_mut().enumerate() {
        if i & m0 != 0 {
            *a = Complex::new(-a.re, -a.im);
        }
    }

    let mut d_theta = vec![T::zero(); theta.len()];
    let mut d_inputs = vec![T::zero(); inputs.len()];
    for &(g, a) in seq.iter().rev() {
        let slot = match a {
            Angle::Theta(k) => Some(&mut d_theta[k]),
            Angle::Input(k) => Some(&mut d_inputs[k]),
            Angle::Fixed => None,
        };
        if let Some(slot) = slot {
            let (q, is_y) = match g {
                Gate::RX(q, _) => (q, false),
                Gate::RY(q, _) => (q, true),
                _ => unreachable!("only rotations carry angles"),
            };
            *slot += psi.generator_overlap(&lambda, q, is_y);
        }
        let gd = g.dagger();
        psi.apply_unchecked(gd);
        lambda.apply_unchecked(gd);
    }
    Ok(VqcGradients {
        value,
        d_theta,
        d_inputs,
    })
}
