//! Real Wigner-D matrices by exact spherical quadrature.
//!
//! `D_ab(R) = (1/4π) ∫ Y_a(R·u) Y_b(u) dΩ`. The integrand is a polynomial of
//! degree `2l` on the sphere, so Gauss–Legendre in `cos θ` times a uniform
//! grid in `φ` integrates it exactly. The construction never touches the
//! Clebsch–Gordan code, which makes it usable as an equivariance oracle.

use super::harmonics;
use crate::linalg::{self, Mat3};
use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `(2l+1)×(2l+1)` matrix with `Y^(l)(R·u) = D·Y^(l)(u)`.
pub fn wigner_d(l: usize, rotation: &Mat3) -> Result<Vec<Vec<f64>>> {
    if !linalg::is_rotation(rotation, 1e-9) {
        return Err(Error::NotRotation);
    }
    let d = 2 * l + 1;
    if l == 0 {
        return Ok(vec![vec![1.0]]);
    }
    let (nodes, weights) = gauss_legendre(l + 2);
    let n_phi = 2 * l + 2;
    let mut out = vec![vec![0.0; d]; d];
    let mut ya = vec![0.0; harmonics::sh_dim(l)];
    let mut yb = vec![0.0; harmonics::sh_dim(l)];
    let base = l * l;
    for (&z, &wz) in nodes.iter().zip(&weights) {
        let s = (1.0 - z * z).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64;
            let u = [s * phi.cos(), s * phi.sin(), z];
            let ru = linalg::mat_vec(rotation, u);
            harmonics::evaluate(l, ru, &mut ya, None);
            harmonics::evaluate(l, u, &mut yb, None);
            // dΩ weight: wz · 2π/n_phi, divided by 4π
            let w = wz / (2.0 * n_phi as f64);
            for a in 0..d {
                for b in 0..d {
                    out[a][b] += w * ya[base + a] * yb[base + b];
                }
            }
        }
    }
    Ok(out)
}
