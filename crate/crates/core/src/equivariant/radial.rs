//! Bessel radial basis with a smooth polynomial cutoff envelope.

use crate::real::Real;
use crate::{Error, Result};

/// `u(d) = 1 − (p+1)(p+2)/2·d^p + p(p+2)·d^(p+1) − p(p+1)/2·d^(p+2)`, zero for `d ≥ 1`.
pub fn envelope<T: Real>(d: T, p: u32) -> (T, T) {
    if d.re() >= 1.0 {
        return (T::zero(), T::zero());
    }
    let pf = p as f64;
    let a = (pf + 1.0) * (pf + 2.0) / 2.0;
    let b = pf * (pf + 2.0);
    let c = pf * (pf + 1.0) / 2.0;
    let dp1 = d.powi(p as i32 - 1);
    let dp = dp1 * d;
    let val = T::one() - dp * a + dp * d * b - dp * d * d * c;
    let der = dp1 * (-a * pf) + dp * (b * (pf + 1.0)) - dp * d * (c * (pf + 2.0));
    (val, der)
}

/// `sqrt(2/r_c)·sin(nπr/r_c)/r · u(r/r_c)` for `n = 1..=n_basis`.
pub fn bessel_rbf(r: f64, r_c: f64, n_basis: usize, p: u32) -> Result<Vec<f64>> {
    if !(r > 0.0) || !(r_c > 0.0) {
        return Err(Error::NonPositiveRadius(r));
    }
    if n_basis == 0 || p == 0 {
        return Err(Error::InvalidConfig(
            "bessel basis needs n_basis ≥ 1 and p ≥ 1".into(),
        ));
    }
    let mut out = vec![0.0; n_basis];
    evaluate(r, r_c, p, &mut out, None);
    Ok(out)
}

/// Basis values and, optionally, their derivative with respect to `r`.
pub fn evaluate<T: Real>(r: T, r_c: f64, p: u32, out: &mut [T], dout: Option<&mut [T]>) {
    let d = r * (1.0 / r_c);
    let (env, denv) = envelope(d, p);
    if d.re() >= 1.0 {
        out.iter_mut().for_each(|v| *v = T::zero());
        if let Some(g) = dout {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
        return;
    }
    let pref = (2.0 / r_c).sqrt();
    let inv_r = T::one() / r;
    let denv_dr = denv * (1.0 / r_c);
    let mut dout = dout;
    for (k, v) in out.iter_mut().enumerate() {
        let w = (k + 1) as f64 * std::f64::consts::PI / r_c;
        let s = (r * w).sin();
        let c = (r * w).cos();
        let b = s * inv_r * pref;
        *v = b * env;
        if let Some(g) = dout.as_deref_mut() {
            let db = (c * w * inv_r - s * inv_r * inv_r) * pref;
            g[k] = db * env + b * denv_dr;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j0(x: f64) -> f64 {
        x.sin() / x
    }

    fn j1(x: f64) -> f64 {
        x.sin() / (x * x) - x.cos() / x
    }

    #[test]
    fn zero_at_and_beyond_cutoff() {
        for n in 1..=8 {
            let v = bessel_rbf(4.5, 4.5, n, 2).unwrap();
            assert!(v.iter().all(|x| x.abs() < 1e-15));
        }
        assert_eq!(bessel_rbf(7.0, 4.5, 8, 2).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn envelope_boundary_values() {
        for p in 1..6 {
            assert_eq!(envelope(0.0f64, p).0, 1.0);
            let (v, dv) = envelope(1.0 - 1e-12f64, p);
            assert!(v.abs() < 1e-9 && dv.abs() < 1e-9);
        }
    }

    #[test]
    fn matches_closed_form_with_spherical_bessel() {
        let (r, rc, p) = (2.25, 4.5, 2u32);
        let v = bessel_rbf(r, rc, 3, p).unwrap();
        let d: f64 = r / rc;
        let env = 1.0 - 6.0 * d * d + 8.0 * d.powi(3) - 3.0 * d.powi(4);
        for n in 1..=3 {
            let x = n as f64 * std::f64::consts::PI;
            let want = (2.0 / rc.powi(3)).sqrt() * j0(x * d) / j1(x).abs() * env;
            assert!((v[n - 1] - want).abs() < 1e-13, "n={n}");
        }
        // n = 1 at r_c/2: sqrt(2/4.5)·sin(π/2)/2.25·(1 − 6/4 + 1 − 3/16)
        assert!((v[0] - (2.0f64 / 4.5).sqrt() / 2.25 * 0.3125).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_differences_and_vanishes_at_cutoff() {
        let (rc, p) = (4.5, 2);
        let mut v = vec![0.0; 8];
        let mut g = vec![0.0; 8];
        let (mut vp, mut vm) = (vec![0.0; 8], vec![0.0; 8]);
        for &r in &[0.7, 1.9, 3.3, 4.4] {
            evaluate(r, rc, p, &mut v, Some(&mut g));
            let h = 1e-6;
            evaluate(r + h, rc, p, &mut vp, None);
            evaluate(r - h, rc, p, &mut vm, None);
            for k in 0..8 {
                let num = (vp[k] - vm[k]) / (2.0 * h);
                assert!((num - g[k]).abs() < 1e-7);
            }
        }
        // straddle the cutoff: value and slope continuous at zero
        let h = 1e-5;
        evaluate(rc - h, rc, p, &mut v, Some(&mut g));
        assert!(v.iter().all(|x| x.abs() < 1e-8));
        assert!(g.iter().all(|x| x.abs() < 1e-3));
        evaluate(rc + h, rc, p, &mut v, Some(&mut g));
        assert!(v.iter().chain(&g).all(|x| *x == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(bessel_rbf(0.0, 4.5, 8, 2).is_err());
        assert!(bessel_rbf(-1.0, 4.5, 8, 2).is_err());
        assert!(bessel_rbf(1.0, 4.5, 0, 2).is_err());
    }
}
