//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails. `HQCMLP_ACCEPTANCE=1,3,7` runs a subset; CSVs and checkpoints
//! land in `target/tmp/acceptance/`.
//!
//! Criterion 5 runs before 4 because it trains the models the later criteria
//! reuse. In a subset run without 5, the first criterion that needs a trained
//! model pays for the training inside its own time budget.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use hqcmlp::analysis::{self, RdfResult};
use hqcmlp::geometry::{xyz, AtomicConfiguration};
use hqcmlp::linalg::{self, Mat3, Vec3};
use hqcmlp::potential::{Checkpoint, Potential, PotentialConfig, Readout};
use hqcmlp::reference_sw::{self, DatasetSpec, StillingerWeber, SwParameters};
use hqcmlp::rng;
use hqcmlp::simulate::{self, units, Ensemble, Harmonic, McProtocol, McState, MdProtocol, PotentialModel};
use hqcmlp::training::{self, EpochRecord, LossWeights, TrainConfig, Trainer};
use hqcmlp::vqc::{
    self, angle_embedding, qft, qft_gates, AnsatzSpec, Gate, MeasurementMode, QuantumState, VQCParams, Variant,
};
use rand::Rng;
use rayon::ThreadPool;

type Res<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

const SEED: u64 = 20240607;
const N_ATOMS: usize = 16;
const MC_TEMPERATURE: f64 = 2000.0;
const RDF_BINS: usize = 90;
const SHOT_COUNTS: [u64; 3] = [100, 1_000, 10_000];

fn cell16() -> f64 {
    // Same density as 64 atoms in a 10.862 Å cell.
    10.862 / 4f64.cbrt()
}

fn model_config(readout: Readout) -> PotentialConfig {
    PotentialConfig {
        hidden_irreps: "8x0e + 4x0o + 4x1o + 4x1e + 2x2o + 2x2e".parse().unwrap(),
        n_layers: 2,
        r_cut: 4.5,
        radial_mlp_sizes: vec![16],
        readout,
        ..Default::default()
    }
}

fn readouts() -> Vec<(String, Readout)> {
    let mut v = vec![("classical".to_string(), Readout::Classical { hidden: 16 })];
    for var in Variant::ALL {
        v.push((var.to_string(), Readout::Vqc { ansatz: AnsatzSpec::new(var) }));
    }
    v
}

fn artifacts() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn save(name: &str, bytes: &[u8]) {
    std::fs::write(artifacts().join(name), bytes).unwrap();
}

fn pool(threads: usize) -> ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Res<Verdict> {
    Ok(Verdict { pass, detail })
}

// ---------------------------------------------------------------------------
// shared fixtures

struct Trained {
    potential: Potential,
    history: Vec<EpochRecord>,
    loss_csv: String,
}

struct Fixtures {
    dataset: Option<Vec<AtomicConfiguration>>,
    classical: Option<Trained>,
    vqc: Option<Trained>,
    liquid64: Option<AtomicConfiguration>,
    exact_frames: Option<Vec<AtomicConfiguration>>,
    sw_rdf: Option<(RdfResult, String)>,
}

fn dataset_spec() -> DatasetSpec {
    let l = cell16();
    DatasetSpec {
        n_configs: 200,
        n_atoms: N_ATOMS,
        cell: [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, l]],
        temperature: 3000.0,
        seed: SEED,
        equilibration_sweeps: 200,
        decorrelation_sweeps: 10,
        lattice_start: false,
    }
}

fn train_config(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs,
        seed: SEED,
        stop_at: Some((10.0, 0.3)),
        ..Default::default()
    }
}

fn train(data: &[AtomicConfiguration], readout: Readout, max_epochs: usize) -> Res<Trained> {
    let (tr, va, _) = training::split_dataset(data, SEED)?;
    let mut cfg = model_config(readout);
    training::dataset_stats(&tr, cfg.r_cut)?.apply(&mut cfg);
    let mut t = Trainer::new(Potential::new(&cfg, SEED)?, train_config(max_epochs));
    t.run(&tr, &va, |_, _| Ok(()), |_| Ok(()))?;
    let mut csv = Vec::new();
    training::write_loss_csv(&mut csv, &t.history)?;
    Ok(Trained {
        potential: t.best_potential(),
        history: t.history.clone(),
        loss_csv: String::from_utf8(csv)?,
    })
}

impl Fixtures {
    fn dataset(&mut self) -> Res<&Vec<AtomicConfiguration>> {
        if self.dataset.is_none() {
            let d = reference_sw::generate_dataset(&dataset_spec(), &SwParameters::default())?;
            xyz::write_file(artifacts().join("dataset.xyz"), &d)?;
            self.dataset = Some(d);
        }
        Ok(self.dataset.as_ref().unwrap())
    }

    fn trained(&mut self, quantum: bool) -> Res<&Trained> {
        let have = if quantum { self.vqc.is_some() } else { self.classical.is_some() };
        if !have {
            let readout = if quantum {
                Readout::Vqc { ansatz: AnsatzSpec::new(Variant::BasicEntanglerCZ) }
            } else {
                Readout::Classical { hidden: 16 }
            };
            let data = self.dataset()?.clone();
            let t = train(&data, readout, 500)?;
            let tag = if quantum { "vqc" } else { "classical" };
            save(&format!("loss_{tag}.csv"), t.loss_csv.as_bytes());
            Checkpoint::from_potential(&t.potential, SEED).save(artifacts().join(format!("{tag}.json")))?;
            if quantum {
                self.vqc = Some(t);
            } else {
                self.classical = Some(t);
            }
        }
        Ok(if quantum { self.vqc.as_ref() } else { self.classical.as_ref() }.unwrap())
    }

    /// 64 SW atoms in the 10.862 Å cell, melted at 3000 K from random insertion.
    fn liquid64(&mut self) -> Res<AtomicConfiguration> {
        if self.liquid64.is_none() {
            let spec = DatasetSpec {
                n_configs: 1,
                seed: SEED,
                ..Default::default()
            };
            self.liquid64 = Some(reference_sw::generate_dataset(&spec, &SwParameters::default())?.remove(0));
        }
        Ok(self.liquid64.clone().unwrap())
    }

    /// MC frames of the exact-mode circuit model.
    fn exact_frames(&mut self) -> Res<&Vec<AtomicConfiguration>> {
        if self.exact_frames.is_none() {
            let init = self.liquid64()?;
            let pot = self.trained(true)?.potential.clone();
            let model = PotentialModel { potential: &pot, mode: MeasurementMode::Exact };
            self.exact_frames = Some(simulate::run_mc(&init, &model, &mc_protocol(MC_SWEEPS))?.configs());
        }
        Ok(self.exact_frames.as_ref().unwrap())
    }

    fn sw_rdf(&mut self) -> Res<(RdfResult, String)> {
        if self.sw_rdf.is_none() {
            self.sw_rdf = Some(sw_rdf(self.liquid64()?, MC_SWEEPS)?);
        }
        Ok(self.sw_rdf.clone().unwrap())
    }
}

const MC_EQUILIBRATION: usize = 300;
const MC_SWEEPS: usize = 1000;

fn mc_protocol(sweeps: usize) -> McProtocol {
    McProtocol {
        temperature: MC_TEMPERATURE,
        equilibration_sweeps: MC_EQUILIBRATION,
        sweeps,
        stride: 2,
        max_displacement: 0.1,
        seed: SEED,
    }
}

fn rdf_with_csv(frames: &[AtomicConfiguration]) -> Res<(RdfResult, String)> {
    let g = analysis::rdf(frames, analysis::DEFAULT_R_MAX, RDF_BINS)?;
    let mut csv = Vec::new();
    g.write_csv(&mut csv)?;
    Ok((g, String::from_utf8(csv)?))
}

// ---------------------------------------------------------------------------
// random geometry

/// Eight atoms at least 2 Å apart: a free cluster or a skewed periodic cell.
fn random_config(rng: &mut impl Rng, periodic: bool) -> AtomicConfiguration {
    let cell: Mat3 = [[5.6, 0.0, 0.0], [0.4, 5.5, 0.0], [0.2, -0.3, 5.7]];
    let probe = AtomicConfiguration::periodic(vec![], vec![], cell).unwrap();
    let mut pos: Vec<Vec3> = Vec::new();
    while pos.len() < 8 {
        let p = if periodic {
            let f = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            linalg::vec_mat(f, &cell)
        } else {
            [0, 1, 2].map(|_| rng.random_range(0.0..4.5))
        };
        let far = pos.iter().all(|q| {
            let d = linalg::sub(p, *q);
            linalg::norm(if periodic { probe.minimum_image(d) } else { d }) >= 2.0
        });
        if far {
            pos.push(p);
        }
    }
    if periodic {
        AtomicConfiguration::periodic(pos, vec![14; 8], cell).unwrap()
    } else {
        AtomicConfiguration::free(pos, vec![14; 8]).unwrap()
    }
}

/// Haar rotation, composed with inversion half the time.
fn random_o3(rng: &mut impl Rng) -> Mat3 {
    let mut r = linalg::random_rotation(rng);
    if rng.random::<bool>() {
        r = r.map(|row| row.map(|x| -x));
    }
    r
}

// ---------------------------------------------------------------------------
// criteria

fn c1_equivariance() -> Res<Verdict> {
    let mut worst_e = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut pass = true;
    for (k, (_, readout)) in readouts().into_iter().enumerate() {
        let pot = Potential::new(&model_config(readout), SEED + k as u64)?;
        let mut r = rng::stream(SEED, &[1, k as u64]);
        for c in 0..20 {
            let cfg = random_config(&mut r, c % 2 == 1);
            let ef = pot.energy_forces(&cfg, &MeasurementMode::Exact, true)?;
            let f = ef.forces.unwrap();
            for _ in 0..20 {
                let q = random_o3(&mut r);
                let t = [0, 1, 2].map(|_| r.random_range(-5.0..5.0));
                let moved = pot.energy_forces(&cfg.transformed(&q, t), &MeasurementMode::Exact, true)?;
                let de = (moved.total_energy - ef.total_energy).abs();
                pass &= de <= 1e-8 * ef.total_energy.abs().max(1.0);
                worst_e = worst_e.max(de / ef.total_energy.abs().max(1.0));
                for (a, b) in moved.forces.unwrap().iter().zip(&f) {
                    let rb = linalg::mat_vec(&q, *b);
                    let df = (0..3).map(|i| (a[i] - rb[i]).abs()).fold(0.0, f64::max);
                    pass &= df <= 1e-6;
                    worst_f = worst_f.max(df);
                }
            }
        }
    }
    verdict(
        pass,
        format!("6 readouts x 20 configs x 20 O(3) maps; max rel dE {worst_e:.1e}, max dF {worst_f:.1e} eV/Å"),
    )
}

fn c2_forces() -> Res<Verdict> {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for (k, (_, readout)) in readouts().into_iter().enumerate() {
        let pot = Potential::new(&model_config(readout), SEED + 100 + k as u64)?;
        let mut r = rng::stream(SEED, &[2, k as u64]);
        for c in 0..10 {
            let cfg = random_config(&mut r, c % 2 == 1);
            let f = pot.energy_forces(&cfg, &MeasurementMode::Exact, true)?.forces.unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..cfg.len() {
                for a in 0..3 {
                    let mut p = cfg.clone();
                    p.positions[i][a] += h;
                    let mut m = cfg.clone();
                    m.positions[i][a] -= h;
                    let fd = -(pot.energy(&p, &MeasurementMode::Exact)? - pot.energy(&m, &MeasurementMode::Exact)?)
                        / (2.0 * h);
                    num += (fd - f[i][a]).powi(2);
                    den += f[i][a].powi(2);
                }
            }
            worst = worst.max((num / den).sqrt());
        }
    }
    verdict(
        worst <= 1e-4,
        format!("6 readouts x 10 configs, h = 1e-4 Å; max relative error {worst:.1e}"),
    )
}

fn max_amp_diff(a: &QuantumState, b: &QuantumState) -> f64 {
    a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| (x.re - y.re).abs().max((x.im - y.im).abs()))
        .fold(0.0, f64::max)
}

fn c3_quantum_kernel() -> Res<Verdict> {
    let mut r = rng::stream(SEED, &[3]);
    let mut worst_identity = 0.0f64;
    let mut check = |e: f64| worst_identity = worst_identity.max(e);
    let random_state = |r: &mut rng::Rng, n: usize| {
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-PI..PI)).collect();
        let mut s = angle_embedding(&a, n).unwrap();
        for q in 0..n {
            s.apply(Gate::RX(q, r.random_range(-PI..PI))).unwrap();
        }
        s
    };

    // RX(π)|0⟩ = −i|1⟩
    let mut s = QuantumState::<f64>::zero(1)?;
    s.apply(Gate::RX(0, PI))?;
    check(s.amps[0].re.abs().max(s.amps[0].im.abs()).max(s.amps[1].re.abs()).max((s.amps[1].im + 1.0).abs()));
    // H|0⟩ = (|0⟩ + |1⟩)/√2
    let mut s = QuantumState::<f64>::zero(1)?;
    s.apply(Gate::H(0))?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    check((s.amps[0].re - h).abs().max((s.amps[1].re - h).abs()));
    // ⟨Z⟩ of RY(a)|0⟩ and RX(a)|0⟩ is cos a
    for _ in 0..10 {
        let a = r.random_range(-PI..PI);
        for g in [Gate::RY(0, a), Gate::RX(0, a)] {
            let mut s = QuantumState::<f64>::zero(1)?;
            s.apply(g)?;
            check((s.expectation_z(0)? - a.cos()).abs());
        }
    }
    // self-inverse gates and daggers
    for _ in 0..10 {
        let s0 = random_state(&mut r, 3);
        let a = r.random_range(-PI..PI);
        for (g, g2) in [
            (Gate::H(1), Gate::H(1)),
            (Gate::CX(0, 2), Gate::CX(0, 2)),
            (Gate::CZ(2, 1), Gate::CZ(2, 1)),
            (Gate::Swap(0, 1), Gate::Swap(0, 1)),
            (Gate::RX(1, a), Gate::RX(1, a).dagger()),
            (Gate::RY(2, a), Gate::RY(2, a).dagger()),
            (Gate::CPhase(0, 1, a), Gate::CPhase(0, 1, a).dagger()),
        ] {
            let mut s = s0.clone();
            s.apply(g)?;
            s.apply(g2)?;
            check(max_amp_diff(&s, &s0));
        }
        // CZ is symmetric in its wires
        let (mut x, mut y) = (s0.clone(), s0.clone());
        x.apply(Gate::CZ(0, 2))?;
        y.apply(Gate::CZ(2, 0))?;
        check(max_amp_diff(&x, &y));
    }
    // CX flips the target iff the control is |1⟩; SWAP exchanges wires
    let mut s = QuantumState::<f64>::zero(2)?;
    s.apply(Gate::RX(0, PI))?;
    s.apply(Gate::CX(0, 1))?;
    check((s.expectation_z(1)? + 1.0).abs());
    let mut s = QuantumState::<f64>::zero(2)?;
    s.apply(Gate::RX(0, PI))?;
    s.apply(Gate::Swap(0, 1))?;
    check((s.expectation_z(0)? - 1.0).abs().max((s.expectation_z(1)? + 1.0).abs()));
    // QFT against the DFT matrix, and QFT followed by its inverse
    for k in 0..8 {
        let mut s = QuantumState::<f64>::basis(3, k)?;
        qft(&mut s, &[0, 1, 2])?;
        for (j, a) in s.amps.iter().enumerate() {
            let ph = 2.0 * PI * (k * j) as f64 / 8.0;
            check((a.re - ph.cos() / 8f64.sqrt()).abs().max((a.im - ph.sin() / 8f64.sqrt()).abs()));
        }
    }
    let s0 = random_state(&mut r, 4);
    let mut s = s0.clone();
    let g = qft_gates(&[3, 1, 0])?;
    for &x in &g {
        s.apply(x)?;
    }
    for &x in g.iter().rev() {
        s.apply(x.dagger())?;
    }
    check(max_amp_diff(&s, &s0));
    // zero angles leave the circuit at the identity; every variant is unitary
    for v in Variant::ALL {
        let spec = AnsatzSpec::new(v);
        let mut s = QuantumState::<f64>::zero(spec.width())?;
        vqc::apply_ansatz(&mut s, &spec, &VQCParams { theta: vec![0.0; spec.n_params()] })?;
        if !v.uses_qft() {
            check(max_amp_diff(&s, &QuantumState::<f64>::zero(spec.width())?));
        }
        let mut s = random_state(&mut r, spec.width());
        let theta: Vec<f64> = (0..spec.n_params()).map(|_| r.random_range(-PI..PI)).collect();
        vqc::apply_ansatz(&mut s, &spec, &VQCParams { theta })?;
        check((s.norm_sqr() - 1.0).abs());
    }

    // adjoint gradients against the parameter-shift rule
    let mut worst_grad = 0.0f64;
    for draw in 0..100 {
        let v = Variant::ALL[draw % Variant::ALL.len()];
        let spec = AnsatzSpec::new(v);
        let theta: Vec<f64> = (0..spec.n_params()).map(|_| r.random_range(-PI..PI)).collect();
        let x: Vec<f64> = (0..spec.width()).map(|_| r.random_range(-PI..PI)).collect();
        let g = vqc::vqc_gradients(&spec, &theta, &x, &MeasurementMode::Exact)?;
        let f = |t: &[f64], x: &[f64]| vqc::expectation(&spec, t, x).unwrap();
        for k in 0..theta.len() {
            let (mut p, mut m) = (theta.clone(), theta.clone());
            p[k] += PI / 2.0;
            m[k] -= PI / 2.0;
            worst_grad = worst_grad.max(((f(&p, &x) - f(&m, &x)) / 2.0 - g.d_theta[k]).abs());
        }
        for k in 0..x.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[k] += PI / 2.0;
            m[k] -= PI / 2.0;
            worst_grad = worst_grad.max(((f(&theta, &p) - f(&theta, &m)) / 2.0 - g.d_inputs[k]).abs());
        }
    }
    verdict(
        worst_identity <= 1e-12 && worst_grad <= 1e-10,
        format!("identities max err {worst_identity:.1e}; adjoint vs parameter shift over 100 draws {worst_grad:.1e}"),
    )
}

fn shot_study_csv(pot: &Potential, configs: &[AtomicConfiguration]) -> Res<(f64, String)> {
    let shots: Vec<u64> = (3..=8).map(|k| 1u64 << (2 * k)).collect();
    let res = analysis::shot_noise_study(pot, configs, &shots, 20, SEED)?;
    let mut csv = Vec::new();
    res.write_csv(&mut csv)?;
    Ok((res.slope, String::from_utf8(csv)?))
}

fn held_out(fx: &mut Fixtures) -> Res<Vec<AtomicConfiguration>> {
    let (_, va, te) = training::split_dataset(fx.dataset()?, SEED)?;
    Ok(va.into_iter().chain(te).take(20).collect())
}

fn c4_shot_scaling(fx: &mut Fixtures) -> Res<Verdict> {
    let configs = held_out(fx)?;
    let pot = fx.trained(true)?.potential.clone();
    let (slope, csv) = shot_study_csv(&pot, &configs)?;
    save("shots.csv", csv.as_bytes());
    verdict(
        (-0.55..=-0.45).contains(&slope),
        format!("{} configs x 20 repeats, S = 2^6..2^16; log-log slope {slope:.4}", configs.len()),
    )
}

fn c5_training(fx: &mut Fixtures) -> Res<Verdict> {
    let mut parts = Vec::new();
    let mut pass = true;
    for quantum in [false, true] {
        let t = fx.trained(quantum)?;
        let last = t.history.last().unwrap();
        let reached = last.val_rmse.energy_mev_per_atom <= 10.0 && last.val_rmse.force_ev_per_ang <= 0.3;
        pass &= reached && t.history.len() <= 500;
        parts.push(format!(
            "{} epoch {}: E {:.2} meV/atom, F {:.3} eV/Å",
            if quantum { "BasicEntanglerCZ" } else { "classical" },
            last.epoch,
            last.val_rmse.energy_mev_per_atom,
            last.val_rmse.force_ev_per_ang
        ));
    }

    // one labelled configuration, energy-only loss
    let one = vec![fx.dataset()?[0].clone()];
    let mut cfg = model_config(Readout::Classical { hidden: 16 });
    training::dataset_stats(&one, cfg.r_cut)?.apply(&mut cfg);
    let tc = TrainConfig {
        batch_size: 1,
        max_epochs: 500,
        seed: SEED,
        loss: LossWeights { gamma_f: 0.0 },
        ..Default::default()
    };
    let mut t = Trainer::new(Potential::new(&cfg, SEED)?, tc);
    let mut best = f64::INFINITY;
    while t.epoch < 500 && best >= 1e-4 {
        best = best.min(t.run_epoch(&one, &one)?.train_loss);
    }
    pass &= best < 1e-4;
    parts.push(format!("overfit one sample: train loss {best:.1e} after {} epochs", t.epoch));
    verdict(pass, parts.join("; "))
}

fn c6_md(fx: &mut Fixtures) -> Res<Verdict> {
    let pot = fx.trained(true)?.potential.clone();
    let (_, _, te) = training::split_dataset(fx.dataset()?, SEED)?;
    let start = te[0].clone();
    let masses = vec![units::SILICON_MASS; start.len()];
    let model = PotentialModel { potential: &pot, mode: MeasurementMode::Exact };

    let nve = MdProtocol {
        ensemble: Ensemble::Nve,
        dt: 0.5,
        n_steps: 2000,
        stride: 1,
        initial_temperature: Some(MC_TEMPERATURE),
        seed: SEED,
    };
    let traj = simulate::run_md(&start, &masses, &model, &nve)?;
    let drift = traj.snapshots.iter().map(|s| s.monitor.abs()).fold(0.0, f64::max) / start.len() as f64 * 1e3;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    save("md_nve.csv", &csv);

    let nvt = MdProtocol {
        ensemble: Ensemble::Nvt { temperature: MC_TEMPERATURE, chain_length: 3, tau: None },
        n_steps: 20_000,
        stride: 10,
        ..nve
    };
    let traj = simulate::run_md(&start, &masses, &model, &nvt)?;
    let prod: Vec<f64> = traj.snapshots.iter().filter(|s| s.time >= 1000.0).map(|s| s.temperature).collect();
    let t_mean = prod.iter().sum::<f64>() / prod.len() as f64;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    save("md_nvt.csv", &csv);

    let rel = (t_mean - MC_TEMPERATURE).abs() / MC_TEMPERATURE;
    verdict(
        drift <= 1.0 && rel <= 0.05,
        format!("NVE 1 ps max |dH| {drift:.3} meV/atom; NVT 10 ps mean T {t_mean:.1} K ({:.2}% off)", 100.0 * rel),
    )
}

fn c7_mc() -> Res<Verdict> {
    let k = 2.0;
    let t = 600.0;
    let kt = units::KB * t;
    let model = Harmonic { k, centers: vec![[0.0; 3]] };
    let start = AtomicConfiguration::free(vec![[0.0; 3]], vec![14])?;
    let mut st = McState::new(start, &model, t, 2.5 * (kt / k).sqrt(), SEED)?;
    let n = 1_000_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        simulate::metropolis_step(&mut st, &model)?;
        let x = st.config.positions[0][0];
        s1 += x;
        s2 += x * x;
    }
    let var = s2 / n as f64 - (s1 / n as f64).powi(2);
    let var_err = (var / (kt / k) - 1.0).abs();

    let mut r = rng::stream(SEED, &[7]);
    let accepted = (0..n)
        .filter(|_| simulate::metropolis_accept(kt, t, r.random::<f64>()))
        .count();
    let freq = accepted as f64 / n as f64;
    let acc_err = (freq / (-1f64).exp() - 1.0).abs();
    verdict(
        var_err <= 0.02 && acc_err <= 0.01,
        format!(
            "variance {var:.5} vs kT/k {:.5} ({:.2}% off); acceptance at dE = kT {freq:.5} vs 1/e ({:.2}% off)",
            kt / k,
            100.0 * var_err,
            100.0 * acc_err
        ),
    )
}

fn sw_rdf(init: AtomicConfiguration, sweeps: usize) -> Res<(RdfResult, String)> {
    let sw = StillingerWeber::new(SwParameters::default());
    let traj = simulate::run_mc(&init, &sw, &mc_protocol(sweeps))?;
    rdf_with_csv(&traj.configs())
}

fn c8_rdf(fx: &mut Fixtures) -> Res<Verdict> {
    let (g_ref, csv_ref) = fx.sw_rdf()?;
    let (g, csv) = rdf_with_csv(fx.exact_frames()?)?;
    save("rdf_sw.csv", csv_ref.as_bytes());
    save("rdf_model.csv", csv.as_bytes());
    let d = g.l2_distance(&g_ref, 1.5, 4.5)?;
    verdict(
        d <= 0.15,
        format!("64 atoms at {MC_TEMPERATURE} K, {} frames each; L2 over [1.5, 4.5] Å = {d:.4}", g.n_frames),
    )
}

fn c9_shot_rdf(fx: &mut Fixtures) -> Res<Verdict> {
    let (g_exact, _) = rdf_with_csv(fx.exact_frames()?)?;
    let pot = fx.trained(true)?.potential.clone();
    let init = fx.liquid64()?;
    let mut d = Vec::new();
    for s in SHOT_COUNTS {
        let model = PotentialModel { potential: &pot, mode: MeasurementMode::Shots { shots: s, seed: SEED } };
        let traj = simulate::run_mc(&init, &model, &mc_protocol(MC_SWEEPS))?;
        let (g, csv) = rdf_with_csv(&traj.configs())?;
        save(&format!("rdf_shots_{s}.csv"), csv.as_bytes());
        d.push(g.l2_distance(&g_exact, 1.5, 4.5)?);
    }
    let inversions = (0..d.len())
        .flat_map(|i| (i + 1..d.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| d[j] >= d[i])
        .count();
    let shown: Vec<String> = SHOT_COUNTS.iter().zip(&d).map(|(s, x)| format!("S={s}: {x:.4}")).collect();
    verdict(inversions <= 1, format!("L2 to exact RDF {}; {inversions} inversion(s)", shown.join(", ")))
}

/// The main run uses one worker thread; reruns use three.
fn c10_determinism(fx: &mut Fixtures, main: &ThreadPool) -> Res<Verdict> {
    let other = pool(3);
    let mut same = Vec::new();

    // shot-noise study
    let configs = held_out(fx)?;
    let pot = fx.trained(true)?.potential.clone();
    let (_, a) = main.install(|| shot_study_csv(&pot, &configs))?;
    let (_, b) = other.install(|| shot_study_csv(&pot, &configs))?;
    same.push(("shots", a == b));

    // dataset and the first epochs of both trainings
    let data = fx.dataset()?.clone();
    let regenerated = other.install(|| reference_sw::generate_dataset(&dataset_spec(), &SwParameters::default()))?;
    same.push(("dataset", xyz::to_string(&data)? == xyz::to_string(&regenerated)?));
    for quantum in [false, true] {
        let full = fx.trained(quantum)?.loss_csv.clone();
        let readout = if quantum {
            Readout::Vqc { ansatz: AnsatzSpec::new(Variant::BasicEntanglerCZ) }
        } else {
            Readout::Classical { hidden: 16 }
        };
        let short = other.install(|| train(&data, readout, 3))?;
        let prefix: String = full.lines().take(4).map(|l| format!("{l}\n")).collect();
        same.push((if quantum { "loss_vqc" } else { "loss_classical" }, short.loss_csv == prefix));
    }

    // RDFs: the full reference run, and the model run up to its first frames
    let (_, a) = fx.sw_rdf()?;
    let init = fx.liquid64()?;
    let (_, b) = other.install(|| sw_rdf(init.clone(), MC_SWEEPS))?;
    same.push(("rdf_sw", a == b));
    let model = PotentialModel { potential: &pot, mode: MeasurementMode::Exact };
    let rerun = other.install(|| simulate::run_mc(&init, &model, &mc_protocol(20)))?;
    let head: Vec<AtomicConfiguration> = fx.exact_frames()?.iter().take(rerun.snapshots.len()).cloned().collect();
    same.push(("rdf_model", rdf_with_csv(&head)?.1 == rdf_with_csv(&rerun.configs())?.1));

    let pass = same.iter().all(|s| s.1);
    let shown: Vec<String> = same
        .iter()
        .map(|(n, ok)| format!("{n} {}", if *ok { "identical" } else { "DIFFERS" }))
        .collect();
    verdict(pass, format!("1 vs 3 threads: {}", shown.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let selected: Vec<usize> = match std::env::var("HQCMLP_ACCEPTANCE") {
        Ok(s) if !s.trim().is_empty() => s.split(',').map(|x| x.trim().parse().expect("criterion number")).collect(),
        _ => (1..=10).collect(),
    };
    let main_pool = pool(1);
    let mut fx = Fixtures {
        dataset: None,
        classical: None,
        vqc: None,
        liquid64: None,
        exact_frames: None,
        sw_rdf: None,
    };
    type Criterion<'a> = (usize, &'a str, f64, Box<dyn FnMut(&mut Fixtures) -> Res<Verdict> + Send + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "equivariance", 120.0, Box::new(|_| c1_equivariance())),
        (2, "force consistency", 300.0, Box::new(|_| c2_forces())),
        (3, "quantum kernel oracles", 60.0, Box::new(|_| c3_quantum_kernel())),
        (5, "training reproduction", 4.0 * 3600.0, Box::new(c5_training)),
        (4, "shot-noise scaling", 600.0, Box::new(c4_shot_scaling)),
        (6, "MD conservation", 1800.0, Box::new(c6_md)),
        (7, "MC correctness", 120.0, Box::new(|_| c7_mc())),
        (8, "RDF agreement", 3600.0, Box::new(c8_rdf)),
        (9, "shot-mode RDF convergence", 7200.0, Box::new(c9_shot_rdf)),
        (10, "determinism", f64::INFINITY, Box::new(|fx| c10_determinism(fx, &pool(1)))),
    ];
    let mut failed = Vec::new();
    let mut lines = Vec::new();
    for (n, name, budget, mut run) in criteria {
        if !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let out = main_pool.install(|| run(&mut fx));
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match out {
            Ok(v) => (v.pass && secs <= budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let line = format!(
            "criterion {n:>2} {name}: {} - {detail} [{secs:.1} s{}]",
            if pass { "PASS" } else { "FAIL" },
            if budget.is_finite() { format!(" of {budget:.0} s") } else { String::new() }
        );
        println!("{line}");
        lines.push(line);
        if !pass {
            failed.push(n);
        }
    }
    save("summary.txt", (lines.join("\n") + "\n").as_bytes());
    if failed.is_empty() {
        println!("acceptance: all {} selected criteria passed", selected.len());
    } else {
        println!("acceptance: FAILED {failed:?}");
        std::process::exit(1);
    }
}
