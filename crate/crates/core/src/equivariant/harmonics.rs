//! Real spherical harmonics in component normalization, `Σ_m Y_m² = 2l+1`.
//!
//! Within each degree the components run over `m = −l..l`, except `l = 1`
//! which is stored as `(x, y, z)` so that `Y^(1)(u) = √3·u`.

use crate::real::Real;
use crate::{Error, Result};

/// Number of components for all degrees `0..=l_max`.
pub const fn sh_dim(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Signed order `m` stored at position `p` of the degree-`l` block.
pub fn order_at(l: usize, p: usize) -> i64 {
    if l == 1 {
        [1, -1, 0][p]
    } else {
        p as i64 - l as i64
    }
}

/// Position of order `m` inside the degree-`l` block.
pub fn position_of(l: usize, m: i64) -> usize {
    if l == 1 {
        match m {
            1 => 0,
            -1 => 1,
            _ => 2,
        }
    } else {
        (m + l as i64) as usize
    }
}

fn factorial_ratio(l: usize, m: usize) -> f64 {
    // (l-m)! / (l+m)!
    let mut r = 1.0;
    for k in (l - m + 1)..=(l + m) {
        r /= k as f64;
    }
    r
}

/// Real harmonics of a unit vector; one `Vec` per degree.
pub fn spherical_harmonics(l_max: usize, u: [f64; 3]) -> Result<Vec<Vec<f64>>> {
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitVector(n));
    }
    let mut flat = vec![0.0; sh_dim(l_max)];
    evaluate(l_max, u, &mut flat, None);
    Ok((0..=l_max)
        .map(|l| flat[l * l..(l + 1) * (l + 1)].to_vec())
        .collect())
}

/// Evaluates the harmonic polynomials at `u` (flat layout) and optionally
/// their Cartesian gradient. The polynomials are homogeneous extensions, so
/// `u` should be a unit vector for the values to be harmonics proper.
pub fn evaluate<T: Real>(l_max: usize, u: [T; 3], out: &mut [T], mut grad: Option<&mut [[T; 3]]>) {
    let [x, y, z] = u;
    // (x + i y)^m
    let mut pw_re = Vec::with_capacity(l_max + 1);
    let mut pw_im = Vec::with_capacity(l_max + 1);
    pw_re.push(T::one());
    pw_im.push(T::zero());
    for m in 1..=l_max {
        let (a, b) = (pw_re[m - 1], pw_im[m - 1]);
        pw_re.push(a * x - b * y);
        pw_im.push(a * y + b * x);
    }

    // P̃_l^m(z) = d^m P_l / dz^m and its z-derivative, indexed [m][l].
    let mut p = vec![vec![T::zero(); l_max + 1]; l_max + 1];
    let mut dp = vec![vec![T::zero(); l_max + 1]; l_max + 1];
    for m in 0..=l_max {
        let dfact: f64 = (1..=m).map(|k| (2 * k - 1) as f64).product();
        p[m][m] = T::cst(dfact);
        if m < l_max {
            p[m][m + 1] = z * (dfact * (2 * m + 1) as f64);
            dp[m][m + 1] = T::cst(dfact * (2 * m + 1) as f64);
        }
        for l in (m + 2)..=l_max {
            let a = (2 * l - 1) as f64;
            let b = (l + m - 1) as f64;
            let c = 1.0 / (l - m) as f64;
            p[m][l] = (z * p[m][l - 1] * a - p[m][l - 2] * b) * c;
            dp[m][l] = ((p[m][l - 1] + z * dp[m][l - 1]) * a - dp[m][l - 2] * b) * c;
        }
    }

    for l in 0..=l_max {
        let base = l * l;
        for m in 0..=l {
            let mut k = ((2 * l + 1) as f64 * factorial_ratio(l, m)).sqrt();
            if m > 0 {
                k *= std::f64::consts::SQRT_2;
            }
            let plm = p[m][l] * k;
            let dplm = dp[m][l] * k;
            if m == 0 {
                let pos = base + position_of(l, 0);
                out[pos] = plm;
                if let Some(g) = grad.as_deref_mut() {
                    g[pos] = [T::zero(), T::zero(), dplm];
                }
                continue;
            }
            let mf = m as f64;
            let pc = base + position_of(l, m as i64);
            let ps = base + position_of(l, -(m as i64));
            out[pc] = plm * pw_re[m];
            out[ps] = plm * pw_im[m];
            if let Some(g) = grad.as_deref_mut() {
                let (re1, im1) = (pw_re[m - 1] * mf, pw_im[m - 1] * mf);
                g[pc] = [plm * re1, -(plm * im1), dplm * pw_re[m]];
                g[ps] = [plm * im1, plm * re1, dplm * pw_im[m]];
            }
        }
    }
}

/// Harmonics of the direction of an arbitrary nonzero vector `r`.
pub fn evaluate_direction<T: Real>(l_max: usize, r: [T; 3], out: &mut [T]) {
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let inv = T::one() / n;
    evaluate(l_max, [r[0] * inv, r[1] * inv, r[2] * inv], out, None);
}

/// Backpropagates `g_out` (gradient w.r.t. the harmonics of `r/|r|`) to `r`.
pub fn direction_backward<T: Real>(l_max: usize, r: [T; 3], g_out: &[T]) -> [T; 3] {
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let inv = T::one() / n;
    let u = [r[0] * inv, r[1] * inv, r[2] * inv];
    let dim = sh_dim(l_max);
    let mut vals = vec![T::zero(); dim];
    let mut grad = vec![[T::zero(); 3]; dim];
    evaluate(l_max, u, &mut vals, Some(&mut grad));
    let mut gu = [T::zero(); 3];
    for (g, gv) in grad.iter().zip(g_out) {
        for d in 0..3 {
            gu[d] += g[d] * *gv;
        }
    }
    let proj = gu[0] * u[0] + gu[1] * u[1] + gu[2] * u[2];
    [
        (gu[0] - proj * u[0]) * inv,
        (gu[1] - proj * u[1]) * inv,
        (gu[2] - proj * u[2]) * inv,
    ]
}
