//! Loss, AMSGrad, plateau schedule, weight averaging and the training loop.
//!
//! `L = (1/B) Σ_b (Ê_b − E_b)² + γ_F/(3B) Σ_b (1/N_b) Σ_i |F̂_bi − F_bi|²`

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, Rmse};
use crate::geometry::AtomicConfiguration;
use crate::potential::{Checkpoint, EnergyForces, OptimizerState, Potential, TrainingMetadata};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma_f: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { gamma_f: 100.0 }
    }
}

fn labels(c: &AtomicConfiguration) -> Result<(f64, &[[f64; 3]])> {
    match (c.energy, c.forces.as_deref()) {
        (Some(e), Some(f)) if f.len() == c.len() => Ok((e, f)),
        _ => Err(Error::MissingLabels(
            "configuration lacks a reference energy or per-atom forces".into(),
        )),
    }
}

/// Batch loss in eV².
pub fn loss(batch: &[AtomicConfiguration], predictions: &[EnergyForces], w: LossWeights) -> Result<f64> {
    if batch.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} configurations",
            predictions.len(),
            batch.len()
        )));
    }
    if batch.is_empty() {
        return Err(Error::Empty("empty batch".into()));
    }
    let b = batch.len() as f64;
    let mut l = 0.0;
    for (c, p) in batch.iter().zip(predictions) {
        let (e, f) = labels(c)?;
        l += (p.total_energy - e).powi(2) / b;
        if w.gamma_f != 0.0 {
            let fp = p
                .forces
                .as_ref()
                .ok_or_else(|| Error::MissingLabels("predictions lack forces".into()))?;
            let sq: f64 = fp
                .iter()
                .zip(f)
                .map(|(a, r)| (0..3).map(|d| (a[d] - r[d]).powi(2)).sum::<f64>())
                .sum();
            l += w.gamma_f * sq / (3.0 * b * c.len() as f64);
        }
    }
    Ok(l)
}

/// Loss and its parameter gradient; configurations are evaluated in
/// parallel and reduced in batch order.
pub fn loss_and_gradient(
    potential: &Potential,
    batch: &[AtomicConfiguration],
    w: LossWeights,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("empty batch".into()));
    }
    let per: Vec<_> = batch
        .par_iter()
        .map(|c| {
            let (_, f) = labels(c)?;
            potential.gradients(c, f)
        })
        .collect::<Result<_>>()?;
    let b = batch.len() as f64;
    let mut grad = vec![0.0; potential.n_params()];
    let mut l = 0.0;
    for (c, g) in batch.iter().zip(&per) {
        let (e, f) = labels(c)?;
        let de = g.energy - e;
        let wf = w.gamma_f / (3.0 * b * c.len() as f64);
        let sq: f64 = g
            .forces
            .iter()
            .zip(f)
            .map(|(a, r)| (0..3).map(|d| (a[d] - r[d]).powi(2)).sum::<f64>())
            .sum();
        l += de * de / b + wf * sq;
        let ce = 2.0 * de / b;
        for ((gk, a), s) in grad.iter_mut().zip(&g.d_energy).zip(&g.d_force_sq) {
            *gk += ce * a + wf * s;
        }
    }
    Ok((l, grad))
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

pub fn new_optimizer_state(n: usize, lr: f64) -> OptimizerState {
    OptimizerState {
        step: 0,
        lr,
        m: vec![0.0; n],
        v: vec![0.0; n],
        v_max: vec![0.0; n],
        plateau_best: f64::INFINITY,
        plateau_bad_epochs: 0,
    }
}

/// One AMSGrad update with bias-corrected moments; the denominator uses the
/// running maximum of the corrected second moment.
pub fn amsgrad_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!("component {k} is {}", grads[k])));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for k in 0..params.len() {
        let g = grads[k];
        state.m[k] = BETA1 * state.m[k] + (1.0 - BETA1) * g;
        state.v[k] = BETA2 * state.v[k] + (1.0 - BETA2) * g * g;
        let vhat = state.v[k] / c2;
        if vhat > state.v_max[k] {
            state.v_max[k] = vhat;
        }
        params[k] -= state.lr * (state.m[k] / c1) / (state.v_max[k].sqrt() + ADAM_EPS);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub patience: usize,
    pub factor: f64,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        Self {
            patience: 250,
            factor: 0.9,
        }
    }
}

impl PlateauSchedule {
    /// Records one validation loss; after `patience` epochs without
    /// improvement the rate decays and the counter restarts.
    pub fn step(&self, val_loss: f64, state: &mut OptimizerState) {
        if val_loss < state.plateau_best {
            state.plateau_best = val_loss;
            state.plateau_bad_epochs = 0;
            return;
        }
        state.plateau_bad_epochs += 1;
        if state.plateau_bad_epochs >= self.patience {
            state.lr *= self.factor;
            state.plateau_bad_epochs = 0;
        }
    }
}

/// Exponential moving average of the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Ema {
    pub shadow: Vec<f64>,
    pub decay: f64,
}

impl Ema {
    pub fn new(params: &[f64], decay: f64) -> Self {
        Self {
            shadow: params.to_vec(),
            decay,
        }
    }

    pub fn update(&mut self, params: &[f64]) {
        for (s, p) in self.shadow.iter_mut().zip(params) {
            *s = self.decay * *s + (1.0 - self.decay) * p;
        }
    }
}

/// Seeded shuffle into train/validation/test with 90/5/5 proportions.
pub fn split_dataset<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    split_dataset_with(items, seed, 0.05, 0.05)
}

/// Validation and test sizes are rounded and at least one; the remainder trains.
pub fn split_dataset_with<T: Clone>(
    items: &[T],
    seed: u64,
    val_fraction: f64,
    test_fraction: f64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = items.len();
    if n < 3 {
        return Err(Error::DatasetTooSmall(format!("{n} configurations, need at least 3")));
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).max(1);
    let n_test = ((n as f64 * test_fraction).round() as usize).max(1);
    if n_val + n_test >= n {
        return Err(Error::DatasetTooSmall(format!(
            "{n} configurations leave nothing to train on"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[0x5b1]));
    let pick = |r: &[usize]| r.iter().map(|&k| items[k].clone()).collect::<Vec<_>>();
    Ok((
        pick(&idx[n_val + n_test..]),
        pick(&idx[..n_val]),
        pick(&idx[n_val..n_val + n_test]),
    ))
}

/// Dataset statistics used to normalize a fresh potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetStats {
    pub avg_num_neighbors: f64,
    /// Mean reference energy per atom (eV).
    pub mean_energy_per_atom: f64,
    /// RMS of reference force components (eV/Å).
    pub force_rms: f64,
}

pub fn dataset_stats(configs: &[AtomicConfiguration], r_cut: f64) -> Result<DatasetStats> {
    if configs.is_empty() {
        return Err(Error::Empty("no configurations".into()));
    }
    let (mut edges, mut atoms, mut e, mut f2, mut nf) = (0usize, 0usize, 0.0, 0.0, 0usize);
    for c in configs {
        let (energy, forces) = labels(c)?;
        edges += crate::geometry::build_neighbor_list(c, r_cut)?.len();
        atoms += c.len();
        e += energy;
        for v in forces {
            f2 += v.iter().map(|x| x * x).sum::<f64>();
            nf += 3;
        }
    }
    Ok(DatasetStats {
        avg_num_neighbors: (edges as f64 / atoms as f64).max(1.0),
        mean_energy_per_atom: e / atoms as f64,
        force_rms: if f2 > 0.0 { (f2 / nf as f64).sqrt() } else { 1.0 },
    })
}

impl DatasetStats {
    /// Copies the statistics into `config`: neighbor normalization, per-species
    /// shift equal to the mean energy per atom, and readout scale equal to the
    /// force RMS.
    pub fn apply(&self, config: &mut crate::potential::PotentialConfig) {
        config.avg_num_neighbors = self.avg_num_neighbors;
        config.energy_shift = vec![self.mean_energy_per_atom; config.species.len()];
        config.energy_scale = self.force_rms;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub loss: LossWeights,
    pub schedule: PlateauSchedule,
    pub ema_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop once validation RMSEs fall to `(meV/atom, eV/Å)`.
    pub stop_at: Option<(f64, f64)>,
    /// Train losses above this (or non-finite) abort the run.
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            batch_size: 20,
            loss: LossWeights::default(),
            schedule: PlateauSchedule::default(),
            ema_decay: 0.99,
            max_epochs: 500,
            seed: 0,
            stop_at: None,
            divergence_threshold: 1e6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_rmse: Rmse,
}

pub const LOSS_CSV_HEADER: &str = "epoch,lr,train_loss,val_loss,val_rmse_e_mev_per_atom,val_rmse_f_ev_per_ang";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch,
            self.lr,
            self.train_loss,
            self.val_loss,
            self.val_rmse.energy_mev_per_atom,
            self.val_rmse.force_ev_per_ang
        )
    }
}

pub fn write_loss_csv<W: Write>(w: &mut W, history: &[EpochRecord]) -> Result<()> {
    writeln!(w, "{LOSS_CSV_HEADER}")?;
    for r in history {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Training state that can be checkpointed and resumed.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub potential: Potential,
    pub config: TrainConfig,
    pub optimizer: OptimizerState,
    pub ema: Ema,
    /// Epochs completed so far.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    /// EMA parameters with the lowest validation loss, and their epoch.
    pub best: Option<(usize, f64, Vec<f64>)>,
}

impl Trainer {
    pub fn new(potential: Potential, config: TrainConfig) -> Self {
        let n = potential.n_params();
        let ema = Ema::new(potential.params(), config.ema_decay);
        Self {
            optimizer: new_optimizer_state(n, config.lr),
            potential,
            config,
            ema,
            epoch: 0,
            history: Vec::new(),
            best: None,
        }
    }

    /// Restores raw parameters, optimizer moments and the EMA shadow; epoch
    /// numbering continues from the checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint, config: TrainConfig) -> Result<Self> {
        let best = ck.to_potential()?;
        let n = best.n_params();
        let mut t = Trainer::new(best.clone(), config);
        if let Some(o) = &ck.optimizer_state {
            if o.m.len() != n {
                return Err(Error::Checkpoint("optimizer state does not match the model".into()));
            }
            t.optimizer = o.clone();
        }
        if let Some(raw) = &ck.raw_params {
            t.potential.set_params(raw)?;
        }
        if let Some(shadow) = &ck.ema_state {
            if shadow.len() != n {
                return Err(Error::Checkpoint("EMA state does not match the model".into()));
            }
            t.ema.shadow = shadow.clone();
        }
        t.epoch = ck.training_metadata.epochs_completed;
        if let (Some(e), Some(l)) = (ck.training_metadata.best_epoch, ck.training_metadata.best_val_loss) {
            t.best = Some((e, l, best.params().to_vec()));
        }
        Ok(t)
    }

    /// The EMA weights as a potential (what validation sees).
    pub fn ema_potential(&self) -> Potential {
        let mut p = self.potential.clone();
        p.set_params(&self.ema.shadow).expect("same model");
        p
    }

    /// Best-validation EMA weights, or the current EMA weights before any epoch.
    pub fn best_potential(&self) -> Potential {
        let mut p = self.potential.clone();
        let w = self.best.as_ref().map_or(&self.ema.shadow, |b| &b.2);
        p.set_params(w).expect("same model");
        p
    }

    /// Best EMA weights as `params`, plus everything needed to resume.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::from_potential(&self.best_potential(), self.config.seed);
        ck.ema_state = Some(self.ema.shadow.clone());
        ck.raw_params = Some(self.potential.params().to_vec());
        ck.optimizer_state = Some(self.optimizer.clone());
        ck.training_metadata = TrainingMetadata {
            epochs_completed: self.epoch,
            best_epoch: self.best.as_ref().map(|b| b.0),
            best_val_loss: self.best.as_ref().map(|b| b.1),
            notes: Default::default(),
        };
        ck
    }

    /// Loss and RMSEs of the EMA weights on `val`.
    pub fn validate(&self, val: &[AtomicConfiguration]) -> Result<(f64, Rmse)> {
        let p = self.ema_potential();
        let pred = analysis::predict(&p, val)?;
        Ok((
            loss(val, &pred, self.config.loss)?,
            analysis::rmse_metrics(&pred, val)?,
        ))
    }

    /// One pass over shuffled mini-batches followed by validation.
    pub fn run_epoch(&mut self, train: &[AtomicConfiguration], val: &[AtomicConfiguration]) -> Result<EpochRecord> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::Empty("training and validation sets must be non-empty".into()));
        }
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(self.config.seed, &[0x7a, epoch as u64]));
        let bs = self.config.batch_size.max(1);
        let mut total = 0.0;
        for chunk in order.chunks(bs) {
            let batch: Vec<AtomicConfiguration> = chunk.iter().map(|&k| train[k].clone()).collect();
            let (l, g) = loss_and_gradient(&self.potential, &batch, self.config.loss)?;
            if !l.is_finite() || l > self.config.divergence_threshold {
                return Err(Error::Diverged { epoch, loss: l });
            }
            total += l * chunk.len() as f64;
            amsgrad_step(self.potential.params_mut(), &g, &mut self.optimizer)?;
            self.ema.update(self.potential.params());
        }
        let train_loss = total / train.len() as f64;
        let lr = self.optimizer.lr;
        let (val_loss, val_rmse) = self.validate(val)?;
        self.config.schedule.step(val_loss, &mut self.optimizer);
        if self.best.as_ref().is_none_or(|b| val_loss < b.1) {
            self.best = Some((epoch, val_loss, self.ema.shadow.clone()));
        }
        self.epoch = epoch;
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
            val_rmse,
        };
        self.history.push(rec);
        Ok(rec)
    }

    /// Runs until `max_epochs` total epochs or the `stop_at` targets are met.
    /// `on_epoch` sees every record (for streaming CSV rows or checkpoints).
    /// On divergence the diagnostic checkpoint is handed to `on_epoch`'s
    /// sibling `on_diverge` before the error is returned.
    pub fn run(
        &mut self,
        train: &[AtomicConfiguration],
        val: &[AtomicConfiguration],
        mut on_epoch: impl FnMut(&Trainer, &EpochRecord) -> Result<()>,
        mut on_diverge: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<()> {
        while self.epoch < self.config.max_epochs {
            let rec = match self.run_epoch(train, val) {
                Ok(r) => r,
                Err(e @ (Error::Diverged { .. } | Error::NonFiniteGradient(_))) => {
                    on_diverge(&self.checkpoint())?;
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            on_epoch(self, &rec)?;
            if let Some((e, f)) = self.config.stop_at {
                if rec.val_rmse.energy_mev_per_atom <= e && rec.val_rmse.force_ev_per_ang <= f {
                    break;
                }
            }
        }
        Ok(())
    }
}
