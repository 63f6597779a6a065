//! Per-irrep linear maps: channels mix within an `(l, parity)` class, the
//! `m` components never do.

use super::irreps::{EquivariantTensor, Irreps};
use crate::real::Real;
use crate::{Error, Result};

#[derive(Clone, Debug)]
struct Block {
    bi: usize,
    bo: usize,
    /// First weight of the `mul_out × mul_in` row-major matrix.
    weight: usize,
}

#[derive(Clone, Debug)]
pub struct LinearMap {
    pub irreps_in: Irreps,
    pub irreps_out: Irreps,
    blocks: Vec<Block>,
    /// `(output block, first bias)` for even scalar outputs when biased.
    biases: Vec<(usize, usize)>,
    n_weights: usize,
    off_in: Vec<usize>,
    off_out: Vec<usize>,
}

impl LinearMap {
    /// Every output block must have at least one input block of the same irrep.
    pub fn new(irreps_in: &Irreps, irreps_out: &Irreps, bias: bool) -> Result<Self> {
        Self::build(irreps_in, irreps_out, bias, false)
    }

    /// Like [`LinearMap::new`], but output blocks without a matching input stay zero.
    pub fn new_partial(irreps_in: &Irreps, irreps_out: &Irreps, bias: bool) -> Self {
        Self::build(irreps_in, irreps_out, bias, true).expect("partial maps always build")
    }

    fn build(irreps_in: &Irreps, irreps_out: &Irreps, bias: bool, partial: bool) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut n = 0;
        for (bo, o) in irreps_out.blocks().iter().enumerate() {
            let mut found = false;
            for (bi, i) in irreps_in.blocks().iter().enumerate() {
                if i.ir == o.ir {
                    blocks.push(Block { bi, bo, weight: n });
                    n += o.mul * i.mul;
                    found = true;
                }
            }
            if !found && !partial {
                return Err(Error::UnreachableIrrep(format!(
                    "{} is not present in {irreps_in}",
                    o.ir
                )));
            }
        }
        let mut biases = Vec::new();
        if bias {
            for (bo, o) in irreps_out.blocks().iter().enumerate() {
                if o.ir.is_scalar() {
                    biases.push((bo, n));
                    n += o.mul;
                }
            }
        }
        Ok(Self {
            irreps_in: irreps_in.clone(),
            irreps_out: irreps_out.clone(),
            blocks,
            biases,
            n_weights: n,
            off_in: irreps_in.offsets(),
            off_out: irreps_out.offsets(),
        })
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    /// Input multiplicity feeding output block `bo`, used for initialization.
    pub fn fan_in(&self, bo: usize) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.bo == bo)
            .map(|b| self.irreps_in.blocks()[b.bi].mul)
            .sum()
    }

    /// `(offset, len, fan_in)` of every weight matrix, and `(offset, len)` of biases.
    pub fn weight_ranges(&self) -> (Vec<(usize, usize, usize)>, Vec<(usize, usize)>) {
        let w = self
            .blocks
            .iter()
            .map(|b| {
                let mo = self.irreps_out.blocks()[b.bo].mul;
                let mi = self.irreps_in.blocks()[b.bi].mul;
                (b.weight, mo * mi, self.fan_in(b.bo))
            })
            .collect();
        let bias = self
            .biases
            .iter()
            .map(|&(bo, off)| (off, self.irreps_out.blocks()[bo].mul))
            .collect();
        (w, bias)
    }

    /// `out = W·x (+ b)`; `out` is overwritten.
    pub fn forward<T: Real>(&self, w: &[f64], x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        let bi = self.irreps_in.blocks();
        let bo = self.irreps_out.blocks();
        for b in &self.blocks {
            let (mi, mo, d) = (bi[b.bi].mul, bo[b.bo].mul, bo[b.bo].ir.dim());
            let xin = &x[self.off_in[b.bi]..][..mi * d];
            let o = &mut out[self.off_out[b.bo]..][..mo * d];
            for v in 0..mo {
                let row = &w[b.weight + v * mi..][..mi];
                let ov = &mut o[v * d..][..d];
                for (u, &wu) in row.iter().enumerate() {
                    let xu = &xin[u * d..][..d];
                    for m in 0..d {
                        ov[m] += xu[m] * wu;
                    }
                }
            }
        }
        for &(b, off) in &self.biases {
            let mo = bo[b].mul;
            for v in 0..mo {
                out[self.off_out[b] + v] += T::cst(w[off + v]);
            }
        }
    }

    /// Accumulates `∂/∂x` and `∂/∂w` of `⟨g, W·x + b⟩`.
    pub fn backward<T: Real>(
        &self,
        w: &[f64],
        x: &[T],
        g: &[T],
        mut gx: Option<&mut [T]>,
        mut gw: Option<&mut [T]>,
    ) {
        let bi = self.irreps_in.blocks();
        let bo = self.irreps_out.blocks();
        for b in &self.blocks {
            let (mi, mo, d) = (bi[b.bi].mul, bo[b.bo].mul, bo[b.bo].ir.dim());
            let xin = &x[self.off_in[b.bi]..][..mi * d];
            let go = &g[self.off_out[b.bo]..][..mo * d];
            for v in 0..mo {
                let gv = &go[v * d..][..d];
                for u in 0..mi {
                    let xu = &xin[u * d..][..d];
                    if let Some(gw) = gw.as_deref_mut() {
                        let mut acc = T::zero();
                        for m in 0..d {
                            acc += gv[m] * xu[m];
                        }
                        gw[b.weight + v * mi + u] += acc;
                    }
                    if let Some(gx) = gx.as_deref_mut() {
                        let wu = w[b.weight + v * mi + u];
                        let gxu = &mut gx[self.off_in[b.bi] + u * d..][..d];
                        for m in 0..d {
                            gxu[m] += gv[m] * wu;
                        }
                    }
                }
            }
        }
        if let Some(gw) = gw.as_deref_mut() {
            for &(b, off) in &self.biases {
                for v in 0..bo[b].mul {
                    gw[off + v] += g[self.off_out[b] + v];
                }
            }
        }
    }
}

/// Applies a bias-free per-irrep linear map with the given weights.
pub fn linear_per_irrep(
    x: &EquivariantTensor,
    out_irreps: &Irreps,
    weights: &[f64],
) -> Result<EquivariantTensor> {
    let map = LinearMap::new(&x.irreps, out_irreps, false)?;
    if weights.len() != map.n_weights() {
        return Err(Error::Shape(format!(
            "{} weights for a map needing {}",
            weights.len(),
            map.n_weights()
        )));
    }
    let mut out = EquivariantTensor::zeros(out_irreps.clone());
    map.forward(weights, &x.data, &mut out.data);
    Ok(out)
}
