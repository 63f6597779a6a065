//! Dense statevector with gate-local updates.
//!
//! Wire 0 is the most significant bit: basis index `Σ_k b_k·2^(n−1−k)`.

use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::real::Real;
use crate::{Error, Result};

pub const MAX_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Complex<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    /// `−i·z`
    pub fn times_minus_i(self) -> Self {
        Self::new(self.im, -self.re)
    }
}

impl<T: Real> Add for Complex<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Real> Sub for Complex<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Real> Mul for Complex<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate<T = f64> {
    RX(usize, T),
    RY(usize, T),
    H(usize),
    CX(usize, usize),
    CZ(usize, usize),
    /// Controlled phase `diag(1, 1, 1, e^{iφ})`.
    CPhase(usize, usize, f64),
    Swap(usize, usize),
}

impl<T: Real> Gate<T> {
    pub fn dagger(self) -> Self {
        match self {
            Gate::RX(q, t) => Gate::RX(q, -t),
            Gate::RY(q, t) => Gate::RY(q, -t),
            Gate::CPhase(c, t, phi) => Gate::CPhase(c, t, -phi),
            g => g,
        }
    }

    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::RX(q, _) | Gate::RY(q, _) | Gate::H(q) => (q, None),
            Gate::CX(a, b) | Gate::CZ(a, b) | Gate::CPhase(a, b, _) | Gate::Swap(a, b) => {
                (a, Some(b))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T = f64> {
    pub n_qubits: usize,
    pub amps: Vec<Complex<T>>,
}

impl<T: Real> QuantumState<T> {
    /// `|0…0⟩`
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(n_qubits));
        }
        let mut amps = vec![Complex::zero(); 1 << n_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: s.amps.len(),
            });
        }
        s.amps[0] = Complex::zero();
        s.amps[index] = Complex::new(T::one(), T::zero());
        Ok(s)
    }

    pub fn norm_sqr(&self) -> T {
        let mut s = T::zero();
        for a in &self.amps {
            s += a.norm_sqr();
        }
        s
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn check(&self, gate: &Gate<T>) -> Result<()> {
        let (a, b) = gate.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= self.n_qubits {
                return Err(Error::InvalidQubit {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        if b == Some(a) {
            return Err(Error::InvalidQubit {
                qubit: a,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: Gate<T>) -> Result<()> {
        self.check(&gate)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: Gate<T>) {
        match gate {
            Gate::RX(q, theta) => {
                let h = theta * 0.5;
                let (c, s) = (h.cos(), h.sin());
                let m = self.mask(q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = a0.scale(c) + a1.times_minus_i().scale(s);
                        self.amps[i | m] = a0.times_minus_i().scale(s) + a1.scale(c);
                    }
                }
            }
            Gate::RY(q, theta) => {
                let h = theta * 0.5;
                let (c, s) = (h.cos(), h.sin());
                let m = self.mask(q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = a0.scale(c) - a1.scale(s);
                        self.amps[i | m] = a0.scale(s) + a1.scale(c);
                    }
                }
            }
            Gate::H(q) => {
                let r = T::cst(std::f64::consts::FRAC_1_SQRT_2);
                let m = self.mask(q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = (a0 + a1).scale(r);
                        self.amps[i | m] = (a0 - a1).scale(r);
                    }
                }
            }
            Gate::CX(c, t) => {
                let (mc, mt) = (self.mask(c), self.mask(t));
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        self.amps.swap(i, i | mt);
                    }
                }
            }
            Gate::CZ(c, t) => {
                let m = self.mask(c) | self.mask(t);
                for i in 0..self.amps.len() {
                    if i & m == m {
                        self.amps[i] = Complex::new(-self.amps[i].re, -self.amps[i].im);
                    }
                }
            }
            Gate::CPhase(c, t, phi) => {
                let m = self.mask(c) | self.mask(t);
                let ph = Complex::new(T::cst(phi.cos()), T::cst(phi.sin()));
                for i in 0..self.amps.len() {
                    if i & m == m {
                        self.amps[i] = self.amps[i] * ph;
                    }
                }
            }
            Gate::Swap(a, b) => {
                let (ma, mb) = (self.mask(a), self.mask(b));
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, (i & !ma) | mb);
                    }
                }
            }
        }
    }

    /// `⟨Z_q⟩ = Σ |a|²·(±1)`.
    pub fn expectation_z(&self, qubit: usize) -> Result<T> {
        if qubit >= self.n_qubits {
            return Err(Error::InvalidQubit {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(self.expectation_z_unchecked(qubit))
    }

    pub(crate) fn expectation_z_unchecked(&self, qubit: usize) -> T {
        let m = self.mask(qubit);
        let mut z = T::zero();
        for (i, a) in self.amps.iter().enumerate() {
            if i & m == 0 {
                z += a.norm_sqr();
            } else {
                z -= a.norm_sqr();
            }
        }
        z
    }

    /// `Im⟨λ|G_q|ψ⟩` for the generator `G ∈ {X, Y}` of a rotation on `q`.
    pub(crate) fn generator_overlap(&self, lambda: &Self, q: usize, y: bool) -> T {
        let m = self.mask(q);
        let mut acc = T::zero();
        for i in 0..self.amps.len() {
            if i & m != 0 {
                continue;
            }
            let (p0, p1) = (self.amps[i], self.amps[i | m]);
            let (l0, l1) = (lambda.amps[i].conj(), lambda.amps[i | m].conj());
            if y {
                // Y = [[0, −i], [i, 0]]
                acc += (l1 * p0).re - (l0 * p1).re;
            } else {
                acc += (l0 * p1).im + (l1 * p0).im;
            }
        }
        acc
    }
}

/// `⊗_k RY(angle_k)|0⟩`, built as a product state.
pub fn angle_embedding(angles: &[f64], n_qubits: usize) -> Result<QuantumState> {
    if angles.len() != n_qubits {
        return Err(Error::Shape(format!(
            "{} angles for {n_qubits} qubits",
            angles.len()
        )));
    }
    embed(angles)
}

pub(crate) fn embed<T: Real>(angles: &[T]) -> Result<QuantumState<T>> {
    let n = angles.len();
    let mut s = QuantumState::zero(n)?;
    let half: Vec<(T, T)> = angles
        .iter()
        .map(|&a| ((a * 0.5).cos(), (a * 0.5).sin()))
        .collect();
    for (i, amp) in s.amps.iter_mut().enumerate() {
        let mut v = T::one();
        for (k, &(c, sn)) in half.iter().enumerate() {
            v *= if i & (1 << (n - 1 - k)) == 0 { c } else { sn };
        }
        *amp = Complex::new(v, T::zero());
    }
    Ok(s)
}

/// Sample estimate of `⟨Z⟩` from `shots` projective measurements.
///
/// The number of `+1` outcomes is drawn as one `Binomial(S, (1+⟨Z⟩)/2)`
/// variate, which has the same law as `S` independent Bernoulli trials.
pub fn sample_expectation<R: Rng + ?Sized>(z: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let p = ((1.0 + z) / 2.0).clamp(0.0, 1.0);
    let ones = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .sample(rng);
    Ok(2.0 * ones as f64 / shots as f64 - 1.0)
}
