//! Clebsch–Gordan coefficients in the real harmonic basis.
//!
//! Complex coefficients come from Racah's closed form and are rotated into
//! the real basis used by [`super::harmonics`]. The result is either purely
//! real or purely imaginary depending on `l1 + l2 + l3`; the nonzero part is
//! kept, which only fixes a global phase.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::harmonics::position_of;

/// Dense `(2l1+1)·(2l2+1)·(2l3+1)` tensor plus its nonzero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CgTensor {
    pub l: [usize; 3],
    pub dense: Vec<f64>,
    /// `(a, b, c, value)` for every nonzero coefficient.
    pub nnz: Vec<(usize, usize, usize, f64)>,
}

impl CgTensor {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        let [_, l2, l3] = self.l;
        self.dense[(a * (2 * l2 + 1) + b) * (2 * l3 + 1) + c]
    }

    pub fn is_zero(&self) -> bool {
        self.nnz.is_empty()
    }
}

fn fact(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Complex `⟨l1 m1 l2 m2 | l3 m3⟩` with the Condon–Shortley convention.
pub fn complex_cg(l1: i64, m1: i64, l2: i64, m2: i64, l3: i64, m3: i64) -> f64 {
    if m1 + m2 != m3 || l3 < (l1 - l2).abs() || l3 > l1 + l2 {
        return 0.0;
    }
    if m1.abs() > l1 || m2.abs() > l2 || m3.abs() > l3 {
        return 0.0;
    }
    let pre = ((2 * l3 + 1) as f64 * fact(l3 + l1 - l2) * fact(l3 - l1 + l2) * fact(l1 + l2 - l3)
        / fact(l1 + l2 + l3 + 1))
    .sqrt();
    let pre = pre
        * (fact(l3 + m3)
            * fact(l3 - m3)
            * fact(l1 - m1)
            * fact(l1 + m1)
            * fact(l2 - m2)
            * fact(l2 + m2))
        .sqrt();
    let mut sum = 0.0;
    for k in 0..=(l1 + l2 + l3) {
        let den = [
            k,
            l1 + l2 - l3 - k,
            l1 - m1 - k,
            l2 + m2 - k,
            l3 - l2 + m1 + k,
            l3 - l1 - m2 + k,
        ];
        if den.iter().any(|&d| d < 0) {
            continue;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / den.iter().map(|&d| fact(d)).product::<f64>();
    }
    pre * sum
}

/// Complex change of basis: `Y_real[p] = Σ_m U[p][m+l] · Y_complex[m]`, rows in
/// storage order of the real harmonics.
fn real_basis(l: usize) -> Vec<Vec<(f64, f64)>> {
    let d = 2 * l + 1;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = vec![vec![(0.0, 0.0); d]; d];
    let col = |m: i64| (m + l as i64) as usize;
    for m in -(l as i64)..=(l as i64) {
        let row = position_of(l, m);
        if m == 0 {
            u[row][col(0)] = (1.0, 0.0);
        } else if m > 0 {
            let sg = if m % 2 == 0 { 1.0 } else { -1.0 };
            u[row][col(m)] = (sg * s, 0.0);
            u[row][col(-m)] = (s, 0.0);
        } else {
            let mu = -m;
            let sg = if mu % 2 == 0 { 1.0 } else { -1.0 };
            u[row][col(-mu)] = (0.0, s);
            u[row][col(mu)] = (0.0, -sg * s);
        }
    }
    u
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn conj(a: (f64, f64)) -> (f64, f64) {
    (a.0, -a.1)
}

fn compute(l1: usize, l2: usize, l3: usize) -> CgTensor {
    let (d1, d2, d3) = (2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1);
    let mut dense = vec![0.0; d1 * d2 * d3];
    let allowed = l3 + l1.min(l2) >= l1.max(l2) && l3 <= l1 + l2;
    if !allowed {
        return CgTensor {
            l: [l1, l2, l3],
            dense,
            nnz: Vec::new(),
        };
    }
    let (u1, u2, u3) = (real_basis(l1), real_basis(l2), real_basis(l3));
    let mut re = vec![0.0; dense.len()];
    let mut im = vec![0.0; dense.len()];
    for a in 0..d1 {
        for b in 0..d2 {
            for c in 0..d3 {
                let mut acc = (0.0, 0.0);
                for i1 in 0..d1 {
                    let x1 = conj(u1[a][i1]);
                    if x1 == (0.0, 0.0) {
                        continue;
                    }
                    for i2 in 0..d2 {
                        let x2 = conj(u2[b][i2]);
                        if x2 == (0.0, 0.0) {
                            continue;
                        }
                        let m1 = i1 as i64 - l1 as i64;
                        let m2 = i2 as i64 - l2 as i64;
                        let m3 = m1 + m2;
                        if m3.abs() > l3 as i64 {
                            continue;
                        }
                        let x3 = u3[c][(m3 + l3 as i64) as usize];
                        let cg = complex_cg(l1 as i64, m1, l2 as i64, m2, l3 as i64, m3);
                        let t = cmul(cmul(x1, x2), x3);
                        acc.0 += t.0 * cg;
                        acc.1 += t.1 * cg;
                    }
                }
                let k = (a * d2 + b) * d3 + c;
                re[k] = acc.0;
                im[k] = acc.1;
            }
        }
    }
    let n_re: f64 = re.iter().map(|v| v * v).sum();
    let n_im: f64 = im.iter().map(|v| v * v).sum();
    let src = if n_re >= n_im { re } else { im };
    let mut nnz = Vec::new();
    for a in 0..d1 {
        for b in 0..d2 {
            for c in 0..d3 {
                let k = (a * d2 + b) * d3 + c;
                let v = src[k];
                if v.abs() > 1e-13 {
                    dense[k] = v;
                    nnz.push((a, b, c, v));
                }
            }
        }
    }
    // fix the sign so the largest entry is positive
    if let Some(&(_, _, _, v)) = nnz
        .iter()
        .max_by(|x, y| x.3.abs().partial_cmp(&y.3.abs()).unwrap())
    {
        if v < 0.0 {
            dense.iter_mut().for_each(|x| *x = -*x);
            nnz.iter_mut().for_each(|e| e.3 = -e.3);
        }
    }
    CgTensor {
        l: [l1, l2, l3],
        dense,
        nnz,
    }
}

/// Memoized coefficient tensors, shareable across threads.
#[derive(Debug, Default)]
pub struct CGCache {
    map: RwLock<HashMap<(usize, usize, usize), Arc<CgTensor>>>,
}

impl CGCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, l1: usize, l2: usize, l3: usize) -> Arc<CgTensor> {
        if let Some(t) = self.map.read().unwrap().get(&(l1, l2, l3)) {
            return t.clone();
        }
        let t = Arc::new(compute(l1, l2, l3));
        self.map
            .write()
            .unwrap()
            .entry((l1, l2, l3))
            .or_insert(t)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Real-basis coupling tensor for `l1 ⊗ l2 → l3`; zero outside the triangle rule.
pub fn clebsch_gordan(l1: usize, l2: usize, l3: usize, cache: &CGCache) -> Arc<CgTensor> {
    cache.get(l1, l2, l3)
}
