//! Network structure, parameter layout, and the generic forward/backward sweep.
//!
//! Parameters live in one flat `Vec<f64>`; every sub-map knows its offset.
//! The sweep is generic over [`Real`]: with `f64` edge vectors it yields
//! energies, forces and `∂E/∂θ`; with [`crate::real::Dual`] edge vectors
//! seeded by a displacement field `v` it additionally yields
//! `∂(v·∇E)/∂θ` in the tangent part of the parameter gradient.

use rand_distr::{Distribution, StandardNormal, Uniform};

use super::config::{PotentialConfig, Readout};
use crate::equivariant::gate::{gate_backward, gate_forward};
use crate::equivariant::{harmonics, radial, CGCache, Irrep, Irreps, LinearMap, MulIrrep, TensorProduct};
use crate::real::Real;
use crate::vqc::{self, AnsatzSpec, MeasurementMode};
use crate::{rng, Result};

/// Named view into the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub off: usize,
}

#[derive(Clone, Debug)]
pub(crate) enum ReadoutDef {
    Classical {
        hidden: usize,
        w1: usize,
        b1: usize,
        w2: usize,
    },
    Vqc {
        spec: AnsatzSpec,
        compress: usize,
        theta: usize,
        w_out: usize,
        b_out: usize,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct LayerDef {
    pub irreps_in: Irreps,
    pub si: LinearMap,
    pub si_off: usize,
    pub dense1: LinearMap,
    pub d1_off: usize,
    pub tp: TensorProduct,
    pub mlp: Vec<Dense>,
    pub dense2: LinearMap,
    pub d2_off: usize,
    pub dense3: LinearMap,
    pub d3_off: usize,
    pub gates: LinearMap,
    pub g_off: usize,
    pub readout: ReadoutDef,
}

/// Everything about the network that follows from a [`PotentialConfig`].
#[derive(Clone, Debug)]
pub struct Model {
    pub config: PotentialConfig,
    pub entries: Vec<ParamEntry>,
    pub n_params: usize,
    pub(crate) layers: Vec<LayerDef>,
    pub(crate) embed_off: usize,
    /// Even-scalar multiplicity and its offset inside the hidden features.
    pub(crate) mul0: usize,
    pub(crate) off0: usize,
    pub(crate) n_gated: usize,
    pub(crate) sh_lmax: usize,
    pub(crate) irreps_sh: Irreps,
}

struct Alloc {
    entries: Vec<ParamEntry>,
    n: usize,
}

impl Alloc {
    fn take(&mut self, name: String, shape: Vec<usize>) -> usize {
        let off = self.n;
        self.n += shape.iter().product::<usize>();
        self.entries.push(ParamEntry {
            name,
            shape,
            offset: off,
        });
        off
    }
}

impl Model {
    pub fn new(config: &PotentialConfig) -> Result<Self> {
        config.validate()?;
        let cache = CGCache::new();
        let hidden = config.hidden_irreps.clone();
        let n_species = config.species.len();
        let mul0 = hidden.count(Irrep::SCALAR);
        let off0 = hidden.offsets()[hidden.position(Irrep::SCALAR).expect("validated")];
        let n_gated = hidden.num_gated();
        let sh_lmax = hidden.l_max();
        let irreps_sh = Irreps::spherical_harmonics(sh_lmax);
        let targets: Vec<Irrep> = hidden.blocks().iter().map(|b| b.ir).collect();
        let gate_irreps = if n_gated > 0 {
            Irreps::new(vec![MulIrrep {
                mul: n_gated,
                ir: Irrep::SCALAR,
            }])?
        } else {
            Irreps::default()
        };

        let mut a = Alloc {
            entries: Vec::new(),
            n: 0,
        };
        let embed_off = a.take("embedding".into(), vec![n_species, mul0]);
        let mut layers = Vec::with_capacity(config.n_layers);
        for t in 0..config.n_layers {
            let irreps_in = if t == 0 {
                Irreps::new(vec![MulIrrep {
                    mul: mul0,
                    ir: Irrep::SCALAR,
                }])?
            } else {
                hidden.clone()
            };
            let si = LinearMap::new_partial(&irreps_in, &hidden, false);
            let si_off = a.take(format!("layer{t}.self_interaction"), vec![n_species, si.n_weights()]);
            let dense1 = LinearMap::new(&irreps_in, &irreps_in, true)?;
            let d1_off = a.take(format!("layer{t}.dense1"), vec![dense1.n_weights()]);
            let tp = TensorProduct::new(&irreps_sh, &irreps_in, &targets, &cache);
            let mut sizes = vec![config.n_rbf];
            sizes.extend(&config.radial_mlp_sizes);
            sizes.push(tp.n_weights());
            let mlp = sizes
                .windows(2)
                .enumerate()
                .map(|(k, w)| Dense {
                    n_in: w[0],
                    n_out: w[1],
                    off: a.take(format!("layer{t}.radial.{k}"), vec![w[0], w[1]]),
                })
                .collect();
            let dense2 = LinearMap::new_partial(&tp.irreps_out, &hidden, true);
            let d2_off = a.take(format!("layer{t}.dense2"), vec![dense2.n_weights()]);
            let dense3 = LinearMap::new(&hidden, &hidden, true)?;
            let d3_off = a.take(format!("layer{t}.dense3"), vec![dense3.n_weights()]);
            let gates = LinearMap::new_partial(&hidden, &gate_irreps, true);
            let g_off = a.take(format!("layer{t}.gates"), vec![gates.n_weights()]);
            let readout = match &config.readout {
                Readout::Classical { hidden: h } => ReadoutDef::Classical {
                    hidden: *h,
                    w1: a.take(format!("layer{t}.readout.w1"), vec![*h, mul0]),
                    b1: a.take(format!("layer{t}.readout.b1"), vec![*h]),
                    w2: a.take(format!("layer{t}.readout.w2"), vec![*h]),
                },
                Readout::Vqc { ansatz } => ReadoutDef::Vqc {
                    spec: *ansatz,
                    compress: a.take(format!("layer{t}.vqc.compress"), vec![ansatz.width(), mul0]),
                    theta: a.take(
                        format!("layer{t}.vqc.theta"),
                        vec![ansatz.layers, ansatz.width()],
                    ),
                    w_out: a.take(format!("layer{t}.vqc.w_out"), vec![1]),
                    b_out: a.take(format!("layer{t}.vqc.b_out"), vec![1]),
                },
            };
            layers.push(LayerDef {
                irreps_in,
                si,
                si_off,
                dense1,
                d1_off,
                tp,
                mlp,
                dense2,
                d2_off,
                dense3,
                d3_off,
                gates,
                g_off,
                readout,
            });
        }
        Ok(Self {
            config: config.clone(),
            entries: a.entries,
            n_params: a.n,
            layers,
            embed_off,
            mul0,
            off0,
            n_gated,
            sh_lmax,
            irreps_sh,
        })
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Normal(0, 1/fan_in) weights, zero biases, θ ~ U(−0.1, 0.1), `w_out = 0.1`.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, &[0x1417]);
        let mut p = vec![0.0; self.n_params];
        let mut normal = |p: &mut [f64], off: usize, len: usize, fan_in: usize| {
            let s = 1.0 / (fan_in.max(1) as f64).sqrt();
            for v in &mut p[off..off + len] {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = z * s;
            }
        };
        let linear = |p: &mut [f64], map: &LinearMap, base: usize, normal: &mut dyn FnMut(&mut [f64], usize, usize, usize)| {
            let (w, _) = map.weight_ranges();
            for (off, len, fan_in) in w {
                normal(p, base + off, len, fan_in);
            }
        };
        let n_species = self.config.species.len();
        normal(&mut p, self.embed_off, n_species * self.mul0, 1);
        for l in &self.layers {
            for s in 0..n_species {
                linear(&mut p, &l.si, l.si_off + s * l.si.n_weights(), &mut normal);
            }
            linear(&mut p, &l.dense1, l.d1_off, &mut normal);
            for d in &l.mlp {
                normal(&mut p, d.off, d.n_in * d.n_out, d.n_in);
            }
            linear(&mut p, &l.dense2, l.d2_off, &mut normal);
            linear(&mut p, &l.dense3, l.d3_off, &mut normal);
            linear(&mut p, &l.gates, l.g_off, &mut normal);
            match l.readout {
                ReadoutDef::Classical { hidden, w1, w2, .. } => {
                    normal(&mut p, w1, hidden * self.mul0, self.mul0);
                    normal(&mut p, w2, hidden, hidden);
                }
                ReadoutDef::Vqc {
                    spec,
                    compress,
                    w_out,
                    ..
                } => {
                    normal(&mut p, compress, spec.width() * self.mul0, self.mul0);
                    p[w_out] = 0.1;
                }
            }
        }
        let uni = Uniform::new(-0.1, 0.1).expect("valid range");
        for l in &self.layers {
            if let ReadoutDef::Vqc { spec, theta, .. } = l.readout {
                for v in &mut p[theta..theta + spec.n_params()] {
                    *v = uni.sample(&mut r);
                }
            }
        }
        p
    }
}

/// How readout circuits are measured during a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Eval {
    /// Exact expectation; `grad` requests circuit gradients for a later backward.
    Exact { grad: bool },
    /// Finite shots drawn from the stream `(seed, atom, layer, key)`.
    Shots { shots: u64, seed: u64, key: u64 },
}

impl Eval {
    pub fn from_mode(mode: &MeasurementMode, key: u64, grad: bool) -> Self {
        match *mode {
            MeasurementMode::Exact => Eval::Exact { grad },
            MeasurementMode::Shots { shots, seed } => Eval::Shots { shots, seed, key },
        }
    }
}

/// Atoms and directed edges of one configuration.
pub(crate) struct Graph<T> {
    pub species: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub vectors: Vec<[T; 3]>,
}

pub(crate) enum ReadoutTape<T> {
    Classical { pre: Vec<T> },
    Vqc { grads: Vec<vqc::VqcGradients<T>>, c: Vec<T> },
}

pub(crate) struct LayerTape<T> {
    pub h_in: Vec<T>,
    pub d1: Vec<T>,
    /// Per radial-MLP layer: inputs (E×n_in) and pre-activations (E×n_out).
    pub mlp_in: Vec<Vec<T>>,
    pub mlp_pre: Vec<Vec<T>>,
    pub w: Vec<T>,
    pub m: Vec<T>,
    pub d2: Vec<T>,
    pub d3: Vec<T>,
    pub gates: Vec<T>,
    pub h_out: Vec<T>,
    pub readout: Option<ReadoutTape<T>>,
}

pub(crate) struct Tape<T> {
    pub n_atoms: usize,
    pub y: Vec<T>,
    pub drbf: Vec<T>,
    pub layers: Vec<LayerTape<T>>,
    /// `E_i^(t)`, layer-major.
    pub energies: Vec<T>,
}

impl<T: Real> Tape<T> {
    pub fn total(&self) -> T {
        let mut s = T::zero();
        for e in &self.energies {
            s += *e;
        }
        s
    }
}

impl Model {
    pub(crate) fn edge_features<T: Real>(&self, g: &Graph<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
        let dsh = self.irreps_sh.dim();
        let nr = self.config.n_rbf;
        let ne = g.edges.len();
        let mut y = vec![T::zero(); ne * dsh];
        let mut rbf = vec![T::zero(); ne * nr];
        let mut drbf = vec![T::zero(); ne * nr];
        for (e, v) in g.vectors.iter().enumerate() {
            harmonics::evaluate_direction(self.sh_lmax, *v, &mut y[e * dsh..(e + 1) * dsh]);
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            radial::evaluate(
                r,
                self.config.r_cut,
                self.config.envelope_p,
                &mut rbf[e * nr..(e + 1) * nr],
                Some(&mut drbf[e * nr..(e + 1) * nr]),
            );
        }
        (y, rbf, drbf)
    }

    /// Compact layer-0 input: the species embedding rows.
    pub(crate) fn embed<T: Real>(&self, p: &[f64], species: &[usize]) -> Vec<T> {
        let mut h = Vec::with_capacity(species.len() * self.mul0);
        for &s in species {
            let row = &p[self.embed_off + s * self.mul0..][..self.mul0];
            h.extend(row.iter().map(|&v| T::cst(v)));
        }
        h
    }

    pub(crate) fn layer_forward<T: Real>(
        &self,
        t: usize,
        p: &[f64],
        g: &Graph<T>,
        y: &[T],
        rbf: &[T],
        h_in: Vec<T>,
    ) -> LayerTape<T> {
        let l = &self.layers[t];
        let n = g.species.len();
        let din = l.irreps_in.dim();
        let dh = self.config.hidden_irreps.dim();
        let dm = l.tp.irreps_out.dim();
        let dsh = self.irreps_sh.dim();
        let nr = self.config.n_rbf;
        let nw = l.tp.n_weights();
        let ne = g.edges.len();

        let mut d1 = vec![T::zero(); n * din];
        for i in 0..n {
            l.dense1
                .forward(&p[l.d1_off..], &h_in[i * din..(i + 1) * din], &mut d1[i * din..(i + 1) * din]);
        }

        // radial MLP, one row per edge
        let mut mlp_in = Vec::with_capacity(l.mlp.len());
        let mut mlp_pre = Vec::with_capacity(l.mlp.len());
        let mut x: Vec<T> = rbf.to_vec();
        for (k, d) in l.mlp.iter().enumerate() {
            let last = k + 1 == l.mlp.len();
            let wts = &p[d.off..d.off + d.n_in * d.n_out];
            let mut pre = vec![T::zero(); ne * d.n_out];
            for e in 0..ne {
                let xi = &x[e * d.n_in..(e + 1) * d.n_in];
                let out = &mut pre[e * d.n_out..(e + 1) * d.n_out];
                for (i, &xv) in xi.iter().enumerate() {
                    let row = &wts[i * d.n_out..(i + 1) * d.n_out];
                    for (o, &wv) in out.iter_mut().zip(row) {
                        *o += xv * wv;
                    }
                }
            }
            let next = if last {
                pre.clone()
            } else {
                pre.iter().map(|v| v.silu()).collect()
            };
            mlp_in.push(std::mem::replace(&mut x, next));
            mlp_pre.push(pre);
        }
        let w = x;
        debug_assert_eq!(w.len(), ne * nw);
        let _ = nr;

        let mut m = vec![T::zero(); n * dm];
        for (e, &(i, j)) in g.edges.iter().enumerate() {
            l.tp.forward(
                &y[e * dsh..(e + 1) * dsh],
                &d1[j * din..(j + 1) * din],
                &w[e * nw..(e + 1) * nw],
                &mut m[i * dm..(i + 1) * dm],
            );
        }
        let norm = 1.0 / self.config.avg_num_neighbors.sqrt();
        for v in m.iter_mut() {
            *v = *v * norm;
        }

        let ng = self.n_gated;
        let mut d2 = vec![T::zero(); n * dh];
        let mut d3 = vec![T::zero(); n * dh];
        let mut gates = vec![T::zero(); n * ng];
        let mut h_out = vec![T::zero(); n * dh];
        let mut si = vec![T::zero(); dh];
        for i in 0..n {
            let r = i * dh..(i + 1) * dh;
            l.dense2.forward(&p[l.d2_off..], &m[i * dm..(i + 1) * dm], &mut d2[r.clone()]);
            l.dense3.forward(&p[l.d3_off..], &d2[r.clone()], &mut d3[r.clone()]);
            l.gates
                .forward(&p[l.g_off..], &d2[r.clone()], &mut gates[i * ng..(i + 1) * ng]);
            gate_forward(
                &self.config.hidden_irreps,
                &d3[r.clone()],
                &gates[i * ng..(i + 1) * ng],
                &mut h_out[r.clone()],
            );
            let s_off = l.si_off + g.species[i] * l.si.n_weights();
            l.si.forward(&p[s_off..], &h_in[i * din..(i + 1) * din], &mut si);
            for (o, s) in h_out[r].iter_mut().zip(&si) {
                *o += *s;
            }
        }
        LayerTape {
            h_in,
            d1,
            mlp_in,
            mlp_pre,
            w,
            m,
            d2,
            d3,
            gates,
            h_out,
            readout: None,
        }
    }

    /// Raw readout outputs (before energy scale/shift) for every atom.
    pub(crate) fn readout_forward<T: Real>(
        &self,
        t: usize,
        p: &[f64],
        h: &[T],
        eval: Eval,
    ) -> Result<(Vec<T>, ReadoutTape<T>)> {
        let dh = self.config.hidden_irreps.dim();
        let n = h.len() / dh;
        let mul0 = self.mul0;
        let x = |i: usize| &h[i * dh + self.off0..i * dh + self.off0 + mul0];
        match self.layers[t].readout {
            ReadoutDef::Classical { hidden, w1, b1, w2 } => {
                let mut pre = vec![T::zero(); n * hidden];
                let mut out = vec![T::zero(); n];
                for i in 0..n {
                    let xi = x(i);
                    for v in 0..hidden {
                        let mut acc = T::cst(p[b1 + v]);
                        for (u, &xu) in xi.iter().enumerate() {
                            acc += xu * p[w1 + v * mul0 + u];
                        }
                        pre[i * hidden + v] = acc;
                        out[i] += acc.silu() * p[w2 + v];
                    }
                }
                Ok((out, ReadoutTape::Classical { pre }))
            }
            ReadoutDef::Vqc {
                spec,
                compress,
                theta,
                w_out,
                b_out,
            } => {
                let width = spec.width();
                let th = &p[theta..theta + spec.n_params()];
                let mut c = vec![T::zero(); n * width];
                let mut out = vec![T::zero(); n];
                let mut grads = Vec::new();
                for i in 0..n {
                    let xi = x(i);
                    let ci = &mut c[i * width..(i + 1) * width];
                    for (k, ck) in ci.iter_mut().enumerate() {
                        for (u, &xu) in xi.iter().enumerate() {
                            *ck += xu * p[compress + k * mul0 + u];
                        }
                    }
                    let angles: Vec<T> =
                        ci.iter().map(|&v| v.tanh() * std::f64::consts::PI).collect();
                    let z = match eval {
                        Eval::Exact { grad: true } => {
                            let g = vqc::vqc_gradients(&spec, th, &angles, &MeasurementMode::Exact)?;
                            let z = g.value;
                            grads.push(g);
                            z
                        }
                        Eval::Exact { grad: false } => vqc::expectation(&spec, th, &angles)?,
                        Eval::Shots { shots, seed, key } => {
                            let z = vqc::expectation(&spec, th, &angles)?;
                            let mut r = rng::stream(seed, &[i as u64, t as u64, key]);
                            T::cst(vqc::sample_expectation(z.re(), shots, &mut r)?)
                        }
                    };
                    out[i] = z * p[w_out] + T::cst(p[b_out]);
                }
                Ok((out, ReadoutTape::Vqc { grads, c }))
            }
        }
    }

    /// Full sweep; keeps everything the backward pass needs.
    pub(crate) fn forward<T: Real>(&self, p: &[f64], g: &Graph<T>, eval: Eval) -> Result<Tape<T>> {
        let n = g.species.len();
        let (y, rbf, drbf) = self.edge_features(g);
        let mut h = self.embed::<T>(p, &g.species);
        let mut layers = Vec::with_capacity(self.layers.len());
        let n_layers = self.layers.len();
        let scale = self.config.energy_scale;
        let mut energies = Vec::with_capacity(n * n_layers);
        for t in 0..n_layers {
            let mut lt = self.layer_forward(t, p, g, &y, &rbf, h);
            let (out, rt) = self.readout_forward(t, p, &lt.h_out, eval)?;
            for (i, o) in out.into_iter().enumerate() {
                let shift = self.config.energy_shift[g.species[i]] / n_layers as f64;
                energies.push(o * scale + T::cst(shift));
            }
            lt.readout = Some(rt);
            h = lt.h_out.clone();
            layers.push(lt);
        }
        Ok(Tape {
            n_atoms: n,
            y,
            drbf,
            layers,
            energies,
        })
    }

    /// Gradient of the total energy with respect to parameters and edge vectors.
    pub(crate) fn backward<T: Real>(
        &self,
        p: &[f64],
        g: &Graph<T>,
        tape: &Tape<T>,
        want_params: bool,
    ) -> (Vec<T>, Vec<[T; 3]>) {
        let n = tape.n_atoms;
        let ne = g.edges.len();
        let dh = self.config.hidden_irreps.dim();
        let dsh = self.irreps_sh.dim();
        let nr = self.config.n_rbf;
        let ng = self.n_gated;
        let mul0 = self.mul0;
        let scale = self.config.energy_scale;
        let mut gp = if want_params {
            vec![T::zero(); self.n_params]
        } else {
            Vec::new()
        };
        let mut gy = vec![T::zero(); ne * dsh];
        let mut grbf = vec![T::zero(); ne * nr];
        let norm = 1.0 / self.config.avg_num_neighbors.sqrt();

        // gradient w.r.t. the current layer's output features
        let mut gh = vec![T::zero(); n * dh];
        for t in (0..self.layers.len()).rev() {
            let l = &self.layers[t];
            let lt = &tape.layers[t];
            let din = l.irreps_in.dim();
            let dm = l.tp.irreps_out.dim();
            let nw = l.tp.n_weights();

            // readout: every E_i^(t) enters the total with weight 1
            match (&l.readout, lt.readout.as_ref().expect("forward ran")) {
                (&ReadoutDef::Classical { hidden, w1, b1, w2 }, ReadoutTape::Classical { pre }) => {
                    for i in 0..n {
                        let xo = i * dh + self.off0;
                        for v in 0..hidden {
                            let a = pre[i * hidden + v];
                            let gpre = a.silu_grad() * (p[w2 + v] * scale);
                            if want_params {
                                gp[w2 + v] += a.silu() * scale;
                                gp[b1 + v] += gpre;
                            }
                            for u in 0..mul0 {
                                if want_params {
                                    gp[w1 + v * mul0 + u] += gpre * lt.h_out[xo + u];
                                }
                                gh[xo + u] += gpre * p[w1 + v * mul0 + u];
                            }
                        }
                    }
                }
                (
                    &ReadoutDef::Vqc {
                        spec,
                        compress,
                        theta,
                        w_out,
                        b_out,
                    },
                    ReadoutTape::Vqc { grads, c },
                ) => {
                    let width = spec.width();
                    for i in 0..n {
                        let gr = &grads[i];
                        let gz = T::cst(p[w_out] * scale);
                        if want_params {
                            gp[w_out] += gr.value * scale;
                            gp[b_out] += T::cst(scale);
                            for (k, d) in gr.d_theta.iter().enumerate() {
                                gp[theta + k] += *d * gz;
                            }
                        }
                        let xo = i * dh + self.off0;
                        for k in 0..width {
                            let th = c[i * width + k].tanh();
                            let gc = gr.d_inputs[k] * gz * (T::one() - th * th) * std::f64::consts::PI;
                            for u in 0..mul0 {
                                if want_params {
                                    gp[compress + k * mul0 + u] += gc * lt.h_out[xo + u];
                                }
                                gh[xo + u] += gc * p[compress + k * mul0 + u];
                            }
                        }
                    }
                }
                _ => unreachable!("readout tape matches its definition"),
            }

            // h_out = SI(h_in) + Gate(dense3(d2), gates(d2))
            let mut gh_in = vec![T::zero(); n * din];
            let mut gm = vec![T::zero(); n * dm];
            let mut gd3 = vec![T::zero(); dh];
            let mut gg = vec![T::zero(); ng];
            let mut gd2 = vec![T::zero(); dh];
            for i in 0..n {
                let r = i * dh..(i + 1) * dh;
                let s_off = l.si_off + g.species[i] * l.si.n_weights();
                l.si.backward(
                    &p[s_off..],
                    &lt.h_in[i * din..(i + 1) * din],
                    &gh[r.clone()],
                    Some(&mut gh_in[i * din..(i + 1) * din]),
                    if want_params {
                        Some(&mut gp[s_off..s_off + l.si.n_weights()])
                    } else {
                        None
                    },
                );
                gd3.iter_mut().for_each(|v| *v = T::zero());
                gg.iter_mut().for_each(|v| *v = T::zero());
                gd2.iter_mut().for_each(|v| *v = T::zero());
                gate_backward(
                    &self.config.hidden_irreps,
                    &lt.d3[r.clone()],
                    &lt.gates[i * ng..(i + 1) * ng],
                    &gh[r.clone()],
                    &mut gd3,
                    &mut gg,
                );
                l.dense3.backward(
                    &p[l.d3_off..],
                    &lt.d2[r.clone()],
                    &gd3,
                    Some(&mut gd2),
                    if want_params {
                        Some(&mut gp[l.d3_off..l.d3_off + l.dense3.n_weights()])
                    } else {
                        None
                    },
                );
                l.gates.backward(
                    &p[l.g_off..],
                    &lt.d2[r.clone()],
                    &gg,
                    Some(&mut gd2),
                    if want_params {
                        Some(&mut gp[l.g_off..l.g_off + l.gates.n_weights()])
                    } else {
                        None
                    },
                );
                l.dense2.backward(
                    &p[l.d2_off..],
                    &lt.m[i * dm..(i + 1) * dm],
                    &gd2,
                    Some(&mut gm[i * dm..(i + 1) * dm]),
                    if want_params {
                        Some(&mut gp[l.d2_off..l.d2_off + l.dense2.n_weights()])
                    } else {
                        None
                    },
                );
            }
            for v in gm.iter_mut() {
                *v = *v * norm;
            }

            // messages
            let mut gd1 = vec![T::zero(); n * din];
            let mut gw = vec![T::zero(); ne * nw];
            for (e, &(i, j)) in g.edges.iter().enumerate() {
                l.tp.backward(
                    &tape.y[e * dsh..(e + 1) * dsh],
                    &lt.d1[j * din..(j + 1) * din],
                    &lt.w[e * nw..(e + 1) * nw],
                    &gm[i * dm..(i + 1) * dm],
                    Some(&mut gy[e * dsh..(e + 1) * dsh]),
                    Some(&mut gd1[j * din..(j + 1) * din]),
                    Some(&mut gw[e * nw..(e + 1) * nw]),
                );
            }

            // radial MLP, last layer first
            let mut gx = gw;
            for (k, d) in l.mlp.iter().enumerate().rev() {
                let last = k + 1 == l.mlp.len();
                let pre = &lt.mlp_pre[k];
                let xin = &lt.mlp_in[k];
                let mut gpre = gx;
                if !last {
                    for (gv, a) in gpre.iter_mut().zip(pre) {
                        *gv = *gv * a.silu_grad();
                    }
                }
                let mut gxin = vec![T::zero(); ne * d.n_in];
                for e in 0..ne {
                    let go = &gpre[e * d.n_out..(e + 1) * d.n_out];
                    let xi = &xin[e * d.n_in..(e + 1) * d.n_in];
                    for i in 0..d.n_in {
                        let row = &p[d.off + i * d.n_out..d.off + (i + 1) * d.n_out];
                        let mut acc = T::zero();
                        for (o, &wv) in row.iter().enumerate() {
                            acc += go[o] * wv;
                        }
                        gxin[e * d.n_in + i] = acc;
                        if want_params {
                            let gw = &mut gp[d.off + i * d.n_out..d.off + (i + 1) * d.n_out];
                            for (o, gwv) in gw.iter_mut().enumerate() {
                                *gwv += go[o] * xi[i];
                            }
                        }
                    }
                }
                gx = gxin;
            }
            for (a, b) in grbf.iter_mut().zip(&gx) {
                *a += *b;
            }

            // dense1
            for i in 0..n {
                l.dense1.backward(
                    &p[l.d1_off..],
                    &lt.h_in[i * din..(i + 1) * din],
                    &gd1[i * din..(i + 1) * din],
                    Some(&mut gh_in[i * din..(i + 1) * din]),
                    if want_params {
                        Some(&mut gp[l.d1_off..l.d1_off + l.dense1.n_weights()])
                    } else {
                        None
                    },
                );
            }
            gh = gh_in;
        }
        if want_params {
            for (i, &s) in g.species.iter().enumerate() {
                for u in 0..mul0 {
                    gp[self.embed_off + s * mul0 + u] += gh[i * mul0 + u];
                }
            }
        }

        let mut gvec = vec![[T::zero(); 3]; ne];
        for (e, v) in g.vectors.iter().enumerate() {
            let mut gv = harmonics::direction_backward(self.sh_lmax, *v, &gy[e * dsh..(e + 1) * dsh]);
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let mut gr = T::zero();
            for k in 0..nr {
                gr += grbf[e * nr + k] * tape.drbf[e * nr + k];
            }
            let inv = T::one() / r;
            for d in 0..3 {
                gv[d] += gr * v[d] * inv;
            }
            gvec[e] = gv;
        }
        (gp, gvec)
    }
}
