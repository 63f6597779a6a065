//! Gated nonlinearity.
//!
//! Even scalars go through SiLU, odd scalars through tanh (odd function, so
//! parity survives), and every `l > 0` channel is scaled by the sigmoid of
//! its own invariant gate scalar.

use super::irreps::{EquivariantTensor, Irreps, Parity};
use crate::real::Real;
use crate::{Error, Result};

/// `out = gate(x, gates)`; `gates.len()` equals `irreps.num_gated()`.
pub fn gate_forward<T: Real>(irreps: &Irreps, x: &[T], gates: &[T], out: &mut [T]) {
    let mut off = 0;
    let mut g = 0;
    for b in irreps.blocks() {
        let d = b.ir.dim();
        if b.ir.l == 0 {
            for k in off..off + b.mul {
                out[k] = match b.ir.parity {
                    Parity::Even => x[k].silu(),
                    Parity::Odd => x[k].tanh(),
                };
            }
        } else {
            for u in 0..b.mul {
                let s = gates[g].sigmoid();
                g += 1;
                for m in 0..d {
                    let k = off + u * d + m;
                    out[k] = x[k] * s;
                }
            }
        }
        off += b.mul * d;
    }
}

/// Accumulates gradients into `gx` and `ggates`.
pub fn gate_backward<T: Real>(
    irreps: &Irreps,
    x: &[T],
    gates: &[T],
    g_out: &[T],
    gx: &mut [T],
    ggates: &mut [T],
) {
    let mut off = 0;
    let mut g = 0;
    for b in irreps.blocks() {
        let d = b.ir.dim();
        if b.ir.l == 0 {
            for k in off..off + b.mul {
                gx[k] += g_out[k]
                    * match b.ir.parity {
                        Parity::Even => x[k].silu_grad(),
                        Parity::Odd => {
                            let t = x[k].tanh();
                            T::one() - t * t
                        }
                    };
            }
        } else {
            for u in 0..b.mul {
                let s = gates[g].sigmoid();
                let mut acc = T::zero();
                for m in 0..d {
                    let k = off + u * d + m;
                    gx[k] += g_out[k] * s;
                    acc += g_out[k] * x[k];
                }
                ggates[g] += acc * s * (T::one() - s);
                g += 1;
            }
        }
        off += b.mul * d;
    }
}

pub fn gated_nonlinearity(x: &EquivariantTensor, gate_scalars: &[f64]) -> Result<EquivariantTensor> {
    let n = x.irreps.num_gated();
    if gate_scalars.len() != n {
        return Err(Error::Shape(format!(
            "{} gate scalars for {n} gated channels",
            gate_scalars.len()
        )));
    }
    let mut out = EquivariantTensor::zeros(x.irreps.clone());
    gate_forward(&x.irreps, &x.data, gate_scalars, &mut out.data);
    Ok(out)
}
