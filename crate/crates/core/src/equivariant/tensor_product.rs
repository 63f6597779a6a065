//! Weighted Clebsch–Gordan tensor product with per-channel-pair weights.
//!
//! Every allowed `(l1,p1) ⊗ (l2,p2) → (l3,p1·p2)` path produces
//! `mul_a·mul_b` output channels, channel `(u, v)` scaled by its own weight.
//! Weights can be data dependent (one set per edge), which is how radial
//! information enters the messages.

use std::sync::Arc;

use super::cg::{CGCache, CgTensor};
use super::irreps::{EquivariantTensor, Irrep, Irreps, MulIrrep};
use crate::real::Real;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Path {
    pub ia: usize,
    pub ib: usize,
    /// Output block.
    pub io: usize,
    /// First channel of this path inside the output block.
    pub channel: usize,
    /// First weight of this path.
    pub weight: usize,
    pub cg: Arc<CgTensor>,
}

#[derive(Clone, Debug)]
pub struct TensorProduct {
    pub irreps_a: Irreps,
    pub irreps_b: Irreps,
    pub irreps_out: Irreps,
    pub paths: Vec<Path>,
    n_weights: usize,
    off_a: Vec<usize>,
    off_b: Vec<usize>,
    off_o: Vec<usize>,
}

impl TensorProduct {
    /// Builds all paths into `targets`; targets nobody can reach are dropped.
    pub fn new(irreps_a: &Irreps, irreps_b: &Irreps, targets: &[Irrep], cache: &CGCache) -> Self {
        let mut counts = vec![0usize; targets.len()];
        let mut raw = Vec::new();
        let mut n_weights = 0;
        for (ia, ba) in irreps_a.blocks().iter().enumerate() {
            for (ib, bb) in irreps_b.blocks().iter().enumerate() {
                for (t, ir) in targets.iter().enumerate() {
                    let (l1, l2) = (ba.ir.l, bb.ir.l);
                    if ir.parity != ba.ir.parity.times(bb.ir.parity)
                        || ir.l < l1.abs_diff(l2)
                        || ir.l > l1 + l2
                    {
                        continue;
                    }
                    raw.push((ia, ib, t, counts[t], n_weights, cache.get(l1, l2, ir.l)));
                    counts[t] += ba.mul * bb.mul;
                    n_weights += ba.mul * bb.mul;
                }
            }
        }
        let mut block_of = vec![usize::MAX; targets.len()];
        let mut blocks = Vec::new();
        for (t, ir) in targets.iter().enumerate() {
            if counts[t] > 0 {
                block_of[t] = blocks.len();
                blocks.push(MulIrrep {
                    mul: counts[t],
                    ir: *ir,
                });
            }
        }
        let irreps_out = Irreps::new(blocks).expect("multiplicities are positive");
        let paths = raw
            .into_iter()
            .map(|(ia, ib, t, channel, weight, cg)| Path {
                ia,
                ib,
                io: block_of[t],
                channel,
                weight,
                cg,
            })
            .collect();
        Self {
            off_a: irreps_a.offsets(),
            off_b: irreps_b.offsets(),
            off_o: irreps_out.offsets(),
            irreps_a: irreps_a.clone(),
            irreps_b: irreps_b.clone(),
            irreps_out,
            paths,
            n_weights,
        }
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    /// `out += a ⊗_w b`.
    pub fn forward<T: Real>(&self, a: &[T], b: &[T], w: &[T], out: &mut [T]) {
        let ba = self.irreps_a.blocks();
        let bb = self.irreps_b.blocks();
        let bo = self.irreps_out.blocks();
        for p in &self.paths {
            let (ma, mb) = (ba[p.ia].mul, bb[p.ib].mul);
            let (da, db, dout) = (ba[p.ia].ir.dim(), bb[p.ib].ir.dim(), bo[p.io].ir.dim());
            for u in 0..ma {
                let xa = &a[self.off_a[p.ia] + u * da..][..da];
                for v in 0..mb {
                    let k = u * mb + v;
                    let wk = w[p.weight + k];
                    let xb = &b[self.off_b[p.ib] + v * db..][..db];
                    let o = &mut out[self.off_o[p.io] + (p.channel + k) * dout..][..dout];
                    for &(i, j, c, cv) in &p.cg.nnz {
                        o[c] += wk * xa[i] * xb[j] * cv;
                    }
                }
            }
        }
    }

    /// Accumulates gradients of `⟨g_out, a ⊗_w b⟩` into `ga`, `gb`, `gw`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Real>(
        &self,
        a: &[T],
        b: &[T],
        w: &[T],
        g_out: &[T],
        mut ga: Option<&mut [T]>,
        mut gb: Option<&mut [T]>,
        mut gw: Option<&mut [T]>,
    ) {
        let ba = self.irreps_a.blocks();
        let bb = self.irreps_b.blocks();
        let bo = self.irreps_out.blocks();
        for p in &self.paths {
            let (ma, mb) = (ba[p.ia].mul, bb[p.ib].mul);
            let (da, db, dout) = (ba[p.ia].ir.dim(), bb[p.ib].ir.dim(), bo[p.io].ir.dim());
            for u in 0..ma {
                let oa = self.off_a[p.ia] + u * da;
                for v in 0..mb {
                    let k = u * mb + v;
                    let wk = w[p.weight + k];
                    let ob = self.off_b[p.ib] + v * db;
                    let g = &g_out[self.off_o[p.io] + (p.channel + k) * dout..][..dout];
                    let mut acc_w = T::zero();
                    for &(i, j, c, cv) in &p.cg.nnz {
                        let gc = g[c] * cv;
                        if gw.is_some() {
                            acc_w += gc * a[oa + i] * b[ob + j];
                        }
                        if let Some(ga) = ga.as_deref_mut() {
                            ga[oa + i] += gc * wk * b[ob + j];
                        }
                        if let Some(gb) = gb.as_deref_mut() {
                            gb[ob + j] += gc * wk * a[oa + i];
                        }
                    }
                    if let Some(gw) = gw.as_deref_mut() {
                        gw[p.weight + k] += acc_w;
                    }
                }
            }
        }
    }
}

/// Tensor product with one scalar weight per path into `out_irreps`.
///
/// `out_irreps` must list exactly the reachable irreps with the multiplicity
/// the paths produce (`Σ mul_a·mul_b` over contributing paths).
pub fn tensor_product(
    a: &EquivariantTensor,
    b: &EquivariantTensor,
    out_irreps: &Irreps,
    path_weights: &[f64],
    cache: &CGCache,
) -> Result<EquivariantTensor> {
    let targets: Vec<Irrep> = out_irreps.blocks().iter().map(|b| b.ir).collect();
    let tp = TensorProduct::new(&a.irreps, &b.irreps, &targets, cache);
    if tp.irreps_out != *out_irreps {
        return Err(Error::UnreachableIrrep(format!(
            "{} ⊗ {} can only produce {}, asked for {out_irreps}",
            a.irreps, b.irreps, tp.irreps_out
        )));
    }
    if path_weights.len() != tp.paths.len() {
        return Err(Error::Shape(format!(
            "{} path weights for {} paths",
            path_weights.len(),
            tp.paths.len()
        )));
    }
    let mut w = vec![0.0; tp.n_weights()];
    for (k, p) in tp.paths.iter().enumerate() {
        let n = a.irreps.blocks()[p.ia].mul * b.irreps.blocks()[p.ib].mul;
        w[p.weight..p.weight + n].fill(path_weights[k]);
    }
    let mut out = EquivariantTensor::zeros(tp.irreps_out.clone());
    tp.forward(&a.data, &b.data, &w, &mut out.data);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::real::Dual;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ir(s: &str) -> Irreps {
        s.parse().unwrap()
    }

    fn random(irreps: &Irreps, rng: &mut ChaCha8Rng) -> EquivariantTensor {
        let data = (0..irreps.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        EquivariantTensor::new(irreps.clone(), data).unwrap()
    }

    #[test]
    fn scalar_times_anything_scales() {
        let cache = CGCache::new();
        let a = EquivariantTensor::new(ir("1x0e"), vec![2.5]).unwrap();
        let bi = ir("2x0e + 1x1o + 1x2e");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random(&bi, &mut rng);
        let out = tensor_product(&a, &b, &bi, &[1.0, 1.0, 1.0], &cache).unwrap();
        for (o, x) in out.data.iter().zip(&b.data) {
            assert!((o - 2.5 * x).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weights_give_zero() {
        let cache = CGCache::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&ir("1x0e + 1x1o"), &mut rng);
        let b = random(&ir("1x1o"), &mut rng);
        let out_ir = ir("1x0e + 1x1o + 1x1e + 1x2e");
        let out = tensor_product(&a, &b, &out_ir, &[0.0; 4], &cache).unwrap();
        assert!(out.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn vector_dot_is_invariant() {
        let cache = CGCache::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&ir("1x1o"), &mut rng);
        let b = random(&ir("1x1o"), &mut rng);
        let out = tensor_product(&a, &b, &ir("1x0e"), &[1.0], &cache).unwrap();
        let dot: f64 = a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum();
        assert!((out.data[0] - dot / 3f64.sqrt()).abs() < 1e-14);
        for _ in 0..100 {
            let r = linalg::random_rotation(&mut rng);
            let ra = a.transformed(&r, false).unwrap();
            let rb = b.transformed(&r, false).unwrap();
            let o = tensor_product(&ra, &rb, &ir("1x0e"), &[1.0], &cache).unwrap();
            assert!((o.data[0] - out.data[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let cache = CGCache::new();
        let a = EquivariantTensor::zeros(ir("1x1o"));
        let b = EquivariantTensor::zeros(ir("1x1o"));
        assert!(matches!(
            tensor_product(&a, &b, &ir("1x0e"), &[1.0, 1.0], &cache),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            tensor_product(&a, &b, &ir("1x0o"), &[1.0], &cache),
            Err(Error::UnreachableIrrep(_))
        ));
        assert!(matches!(
            tensor_product(&a, &b, &ir("1x3o"), &[1.0], &cache),
            Err(Error::UnreachableIrrep(_))
        ));
    }

    #[test]
    fn equivariant_under_rotation_and_inversion() {
        let cache = CGCache::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ai = Irreps::spherical_harmonics(2);
        let bi = ir("2x0e + 2x0o + 2x1o + 2x1e + 1x2o + 1x2e");
        let targets: Vec<Irrep> = bi.blocks().iter().map(|b| b.ir).collect();
        let tp = TensorProduct::new(&ai, &bi, &targets, &cache);
        let w: Vec<f64> = (0..tp.n_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let run = |a: &EquivariantTensor, b: &EquivariantTensor| {
            let mut out = EquivariantTensor::zeros(tp.irreps_out.clone());
            tp.forward(&a.data, &b.data, &w, &mut out.data);
            out
        };
        for _ in 0..10 {
            let a = random(&ai, &mut rng);
            let b = random(&bi, &mut rng);
            let r = linalg::random_rotation(&mut rng);
            for inv in [false, true] {
                let lhs = run(&a.transformed(&r, inv).unwrap(), &b.transformed(&r, inv).unwrap());
                let rhs = run(&a, &b).transformed(&r, inv).unwrap();
                for (x, y) in lhs.data.iter().zip(&rhs.data) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn backward_matches_directional_derivative() {
        let cache = CGCache::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ai = Irreps::spherical_harmonics(2);
        let bi = ir("2x0e + 1x1o + 1x2e");
        let targets: Vec<Irrep> = "0e + 1o + 1e + 2e".parse::<Irreps>().unwrap()
            .blocks().iter().map(|b| b.ir).collect();
        let tp = TensorProduct::new(&ai, &bi, &targets, &cache);
        let gen = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let (a, b, w) = (gen(ai.dim(), &mut rng), gen(bi.dim(), &mut rng), gen(tp.n_weights(), &mut rng));
        let (da, db, dw) = (gen(ai.dim(), &mut rng), gen(bi.dim(), &mut rng), gen(tp.n_weights(), &mut rng));
        let g = gen(tp.irreps_out.dim(), &mut rng);

        let dual = |x: &[f64], t: &[f64]| -> Vec<Dual> {
            x.iter().zip(t).map(|(&re, &eps)| Dual { re, eps }).collect()
        };
        let mut out = vec![Dual::zero(); tp.irreps_out.dim()];
        tp.forward(&dual(&a, &da), &dual(&b, &db), &dual(&w, &dw), &mut out);
        let directional: f64 = out.iter().zip(&g).map(|(o, g)| o.eps * g).sum();

        let (mut ga, mut gb, mut gw) = (vec![0.0; a.len()], vec![0.0; b.len()], vec![0.0; w.len()]);
        tp.backward(&a, &b, &w, &g, Some(&mut ga), Some(&mut gb), Some(&mut gw));
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let pred = dot(&ga, &da) + dot(&gb, &db) + dot(&gw, &dw);
        assert!((pred - directional).abs() < 1e-12);
    }
}
