use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Parity of the degree-`l` spherical harmonics, `(−1)^l`.
    pub fn of_harmonic(l: usize) -> Parity {
        if l % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Irrep {
    pub l: usize,
    pub parity: Parity,
}

impl Irrep {
    pub const fn new(l: usize, parity: Parity) -> Self {
        Self { l, parity }
    }

    pub const SCALAR: Irrep = Irrep::new(0, Parity::Even);

    pub fn dim(self) -> usize {
        2 * self.l + 1
    }

    pub fn is_scalar(self) -> bool {
        self.l == 0 && self.parity == Parity::Even
    }
}

impl fmt::Display for Irrep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.parity {
            Parity::Even => 'e',
            Parity::Odd => 'o',
        };
        write!(f, "{}{}", self.l, p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MulIrrep {
    pub mul: usize,
    pub ir: Irrep,
}

impl MulIrrep {
    pub fn dim(&self) -> usize {
        self.mul * self.ir.dim()
    }
}

/// Ordered list of `(multiplicity, l, parity)` blocks, e.g. `"8x0e + 4x1o"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Irreps(Vec<MulIrrep>);

impl Irreps {
    pub fn new(blocks: Vec<MulIrrep>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| b.mul == 0) {
            return Err(Error::IrrepsParse(format!(
                "zero multiplicity for {}",
                b.ir
            )));
        }
        Ok(Self(blocks))
    }

    /// `1x0e + 1x1o + 1x2e + …` up to `l_max`.
    pub fn spherical_harmonics(l_max: usize) -> Self {
        Self(
            (0..=l_max)
                .map(|l| MulIrrep {
                    mul: 1,
                    ir: Irrep::new(l, Parity::of_harmonic(l)),
                })
                .collect(),
        )
    }

    pub fn blocks(&self) -> &[MulIrrep] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(|b| b.dim()).sum()
    }

    /// Start offset of each block in the flat layout.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.0
            .iter()
            .map(|b| {
                let o = off;
                off += b.dim();
                o
            })
            .collect()
    }

    pub fn l_max(&self) -> usize {
        self.0.iter().map(|b| b.ir.l).max().unwrap_or(0)
    }

    /// Total multiplicity of the given irrep.
    pub fn count(&self, ir: Irrep) -> usize {
        self.0.iter().filter(|b| b.ir == ir).map(|b| b.mul).sum()
    }

    /// Number of channels with `l > 0`; each one receives a gate scalar.
    pub fn num_gated(&self) -> usize {
        self.0.iter().filter(|b| b.ir.l > 0).map(|b| b.mul).sum()
    }

    /// Index of the first block carrying `ir`.
    pub fn position(&self, ir: Irrep) -> Option<usize> {
        self.0.iter().position(|b| b.ir == ir)
    }
}

impl fmt::Display for Irreps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|b| format!("{}x{}", b.mul, b.ir))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl FromStr for Irreps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Irreps::default());
        }
        let mut blocks = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            let bad = || Error::IrrepsParse(format!("bad term '{term}'"));
            let (mul, rest) = match term.split_once('x') {
                Some((m, r)) => (m.trim().parse::<usize>().map_err(|_| bad())?, r.trim()),
                None => (1, term),
            };
            let parity = match rest.chars().last() {
                Some('e') => Parity::Even,
                Some('o') => Parity::Odd,
                _ => return Err(bad()),
            };
            let l = rest[..rest.len() - 1].parse::<usize>().map_err(|_| bad())?;
            blocks.push(MulIrrep {
                mul,
                ir: Irrep::new(l, parity),
            });
        }
        Irreps::new(blocks)
    }
}

impl Serialize for Irreps {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Irreps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Feature vector laid out block by block as `(multiplicity, 2l+1)` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivariantTensor {
    pub irreps: Irreps,
    pub data: Vec<f64>,
}

impl EquivariantTensor {
    pub fn new(irreps: Irreps, data: Vec<f64>) -> Result<Self> {
        if data.len() != irreps.dim() {
            return Err(Error::Shape(format!(
                "{} values for irreps {irreps} of dimension {}",
                data.len(),
                irreps.dim()
            )));
        }
        Ok(Self { irreps, data })
    }

    pub fn zeros(irreps: Irreps) -> Self {
        let n = irreps.dim();
        Self {
            irreps,
            data: vec![0.0; n],
        }
    }

    /// Values of block `k`, row-major `(mul, 2l+1)`.
    pub fn block(&self, k: usize) -> &[f64] {
        let off = self.irreps.offsets()[k];
        &self.data[off..off + self.irreps.blocks()[k].dim()]
    }

    /// Applies `D^(l)(R)` to every block and the parity sign if `inversion` is set.
    pub fn transformed(&self, rotation: &crate::linalg::Mat3, inversion: bool) -> Result<Self> {
        let mut out = self.clone();
        for (k, off) in self.irreps.offsets().into_iter().enumerate() {
            let b = self.irreps.blocks()[k];
            let d = b.ir.dim();
            let wd = super::wigner_d(b.ir.l, rotation)?;
            let sign = if inversion { b.ir.parity.sign() } else { 1.0 };
            for u in 0..b.mul {
                for m in 0..d {
                    let mut acc = 0.0;
                    for n in 0..d {
                        acc += wd[m][n] * self.data[off + u * d + n];
                    }
                    out.data[off + u * d + m] = sign * acc;
                }
            }
        }
        Ok(out)
    }
}
