//! Radial distribution functions, error metrics and the shot-noise study.

use std::io::Write;

use rayon::prelude::*;

use crate::geometry::AtomicConfiguration;
use crate::linalg;
use crate::potential::{EnergyForces, Potential};
use crate::vqc::MeasurementMode;
use crate::{rng, Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
pub const DEFAULT_R_MAX: f64 = 4.5;

#[derive(Clone, Debug, PartialEq)]
pub struct RdfResult {
    /// Å
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub bin_width: f64,
    pub n_frames: usize,
    /// Atoms per Å³, averaged over frames.
    pub density: f64,
}

impl RdfResult {
    /// `sqrt(Σ (g₁ − g₂)² Δr)` over bins whose centers lie in `[r_lo, r_hi]`.
    pub fn l2_distance(&self, other: &RdfResult, r_lo: f64, r_hi: f64) -> Result<f64> {
        if self.r != other.r {
            return Err(Error::Shape("RDFs are binned differently".into()));
        }
        let s: f64 = self
            .r
            .iter()
            .zip(self.g.iter().zip(&other.g))
            .filter(|(r, _)| **r >= r_lo && **r <= r_hi)
            .map(|(_, (a, b))| (a - b) * (a - b))
            .sum();
        Ok((s * self.bin_width).sqrt())
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "bin_center,g_r")?;
        for (r, g) in self.r.iter().zip(&self.g) {
            writeln!(w, "{r},{g}")?;
        }
        Ok(())
    }
}

/// Pair histogram over all ordered pairs `i ≠ j` at minimum image, each
/// frame normalized by `N(N−1)/V · 4πr²Δr`.
pub fn rdf(frames: &[AtomicConfiguration], r_max: f64, n_bins: usize) -> Result<RdfResult> {
    if frames.is_empty() {
        return Err(Error::Empty("no frames".into()));
    }
    if n_bins == 0 || !(r_max > 0.0) {
        return Err(Error::InvalidConfig("rdf needs positive r_max and bins".into()));
    }
    for f in frames {
        if !f.pbc.iter().all(|&p| p) {
            return Err(Error::InvalidConfig("rdf needs fully periodic frames".into()));
        }
        let half = 0.5 * f.min_periodic_width().ok_or(Error::SingularCell)?;
        if r_max > half + 1e-12 {
            return Err(Error::RdfRangeTooLarge {
                r_max,
                half_width: half,
            });
        }
    }
    let dr = r_max / n_bins as f64;
    let per_frame: Vec<(Vec<f64>, f64)> = frames
        .par_iter()
        .map(|f| {
            let n = f.len();
            let v = f.volume().expect("periodic");
            let mut h = vec![0.0; n_bins];
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = linalg::norm(f.minimum_image(linalg::sub(f.positions[j], f.positions[i])));
                    let k = (d / dr) as usize;
                    if d < r_max && k < n_bins {
                        h[k] += 1.0;
                    }
                }
            }
            let pairs = (n * n.saturating_sub(1)) as f64 / v;
            for (k, x) in h.iter_mut().enumerate() {
                let r = (k as f64 + 0.5) * dr;
                let ideal = pairs * 4.0 * std::f64::consts::PI * r * r * dr;
                *x /= ideal;
            }
            (h, n as f64 / v)
        })
        .collect();
    let nf = frames.len() as f64;
    let mut g = vec![0.0; n_bins];
    let mut density = 0.0;
    for (h, rho) in &per_frame {
        for (a, b) in g.iter_mut().zip(h) {
            *a += b / nf;
        }
        density += rho / nf;
    }
    Ok(RdfResult {
        r: (0..n_bins).map(|k| (k as f64 + 0.5) * dr).collect(),
        g,
        bin_width: dr,
        n_frames: frames.len(),
        density,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rmse {
    pub energy_mev_per_atom: f64,
    pub force_ev_per_ang: f64,
}

/// Per-atom energy RMSE (meV/atom) and force RMSE over all 3N components (eV/Å).
pub fn rmse_metrics(predictions: &[EnergyForces], references: &[AtomicConfiguration]) -> Result<Rmse> {
    if predictions.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    if predictions.len() != references.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} references",
            predictions.len(),
            references.len()
        )));
    }
    let (mut se, mut sf, mut nf) = (0.0, 0.0, 0usize);
    for (p, r) in predictions.iter().zip(references) {
        let e = r
            .energy
            .ok_or_else(|| Error::MissingLabels("reference energy".into()))?;
        let n = r.len().max(1) as f64;
        se += ((p.total_energy - e) / n).powi(2);
        if let (Some(fp), Some(fr)) = (&p.forces, &r.forces) {
            for (a, b) in fp.iter().zip(fr) {
                for d in 0..3 {
                    sf += (a[d] - b[d]).powi(2);
                }
            }
            nf += 3 * fr.len();
        }
    }
    Ok(Rmse {
        energy_mev_per_atom: 1000.0 * (se / predictions.len() as f64).sqrt(),
        force_ev_per_ang: if nf == 0 { 0.0 } else { (sf / nf as f64).sqrt() },
    })
}

/// Exact-mode energies and forces for every configuration, in order.
pub fn predict(potential: &Potential, configs: &[AtomicConfiguration]) -> Result<Vec<EnergyForces>> {
    configs
        .par_iter()
        .map(|c| potential.energy_forces(c, &MeasurementMode::Exact, true))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotStudyResult {
    pub shots: Vec<u64>,
    pub rmse_mev_per_atom: Vec<f64>,
    /// Least-squares slope of `ln RMSE` against `ln S`.
    pub slope: f64,
    pub intercept: f64,
    /// `S` at which the fitted line reaches 2 meV/atom.
    pub shots_for_2mev: f64,
}

impl ShotStudyResult {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "S,rmse_mev_per_atom")?;
        for (s, r) in self.shots.iter().zip(&self.rmse_mev_per_atom) {
            writeln!(w, "{s},{r}")?;
        }
        Ok(())
    }
}

/// `(slope, intercept)` of the least-squares line through `(x, y)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// RMSE of shot-sampled energies against exact ones over `configs × repeats`
/// for each shot count.
pub fn shot_noise_study(
    potential: &Potential,
    configs: &[AtomicConfiguration],
    shots: &[u64],
    repeats: usize,
    seed: u64,
) -> Result<ShotStudyResult> {
    if potential.config().readout.ansatz().is_none() {
        return Err(Error::NotQuantumReadout(
            "shot noise needs a circuit readout".into(),
        ));
    }
    if configs.is_empty() || repeats == 0 {
        return Err(Error::Empty("no configurations or repeats".into()));
    }
    if shots.len() < 2 || shots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("shot counts must be strictly increasing (at least two)".into()));
    }
    let exact: Vec<f64> = configs
        .par_iter()
        .map(|c| potential.energy(c, &MeasurementMode::Exact))
        .collect::<Result<_>>()?;
    let mut rmse = Vec::with_capacity(shots.len());
    for (k, &s) in shots.iter().enumerate() {
        let mode = MeasurementMode::Shots {
            shots: s,
            seed: rand::Rng::random(&mut rng::stream(seed, &[0x5407, k as u64])),
        };
        let jobs: Vec<(usize, usize)> = (0..configs.len())
            .flat_map(|c| (0..repeats).map(move |r| (c, r)))
            .collect();
        let sq: Vec<f64> = jobs
            .par_iter()
            .map(|&(c, r)| {
                let e = potential
                    .energy_forces_keyed(&configs[c], &mode, false, r as u64)?
                    .total_energy;
                Ok(((e - exact[c]) / configs[c].len() as f64).powi(2))
            })
            .collect::<Result<_>>()?;
        rmse.push(1000.0 * (sq.iter().sum::<f64>() / sq.len() as f64).sqrt());
    }
    let lx: Vec<f64> = shots.iter().map(|&s| (s as f64).ln()).collect();
    let ly: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    Ok(ShotStudyResult {
        shots: shots.to_vec(),
        rmse_mev_per_atom: rmse,
        slope,
        intercept,
        shots_for_2mev: ((2f64.ln() - intercept) / slope).exp(),
    })
}
