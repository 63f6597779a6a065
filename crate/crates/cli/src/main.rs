use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hqcmlp::analysis;
use hqcmlp::geometry::{xyz, AtomicConfiguration};
use hqcmlp::potential::{Checkpoint, Potential};
use hqcmlp::reference_sw::{self, StillingerWeber, SwParameters};
use hqcmlp::simulate::{self, EnergyModel, PotentialModel};
use hqcmlp::training::{self, Trainer, LOSS_CSV_HEADER};
use hqcmlp::vqc::MeasurementMode;

mod config;

use config::{parse_readout, EnsembleKind, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hqcmlp", version, about = "Equivariant potentials with classical or quantum-circuit readouts")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "HQCMLP_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `classical` or `vqc:<Variant>` (e.g. vqc:BasicEntanglerCZ).
    #[arg(long, global = true)]
    readout: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample Stillinger–Weber silicon with MC and write a labelled dataset.
    GenerateData {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_configs: Option<usize>,
        #[arg(long)]
        n_atoms: Option<usize>,
        /// Cubic cell edge (Å).
        #[arg(long)]
        cell: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Fit a potential to the training split; writes a checkpoint and loss CSV.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        /// Continue from a checkpoint; epoch numbering carries on.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Total epochs, counting any already completed.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// RMSE of a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Molecular dynamics with a trained model or the SW reference.
    Md {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum)]
        ensemble: Option<EnsembleKind>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Metropolis Monte Carlo; works with shot-sampled energies.
    Mc {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        sweeps: Option<usize>,
    },
    /// Radial distribution function of a trajectory.
    Rdf {
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also compute this trajectory's RDF and print the L2 distance.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Energy RMSE of shot-sampled against exact readouts versus shot count.
    ShotsStudy {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, conflicts_with = "sw")]
    checkpoint: Option<PathBuf>,
    /// Use the Stillinger–Weber reference instead of a checkpoint.
    #[arg(long)]
    sw: bool,
    /// Starting structure (first frame); defaults to a generated cell.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = &cli.readout {
        cfg.model.readout = parse_readout(r)?;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::GenerateData { out, n_configs, n_atoms, cell, temperature } => {
            let d = &mut cfg.data;
            d.n_configs = n_configs.unwrap_or(d.n_configs);
            d.n_atoms = n_atoms.unwrap_or(d.n_atoms);
            d.cell_length = cell.unwrap_or(d.cell_length);
            d.temperature = temperature.unwrap_or(d.temperature);
            let out = out.unwrap_or(cfg.files.dataset.clone());
            let frames = reference_sw::generate_dataset(&cfg.data.spec(cfg.seed), &SwParameters::default())?;
            xyz::write_file(&out, &frames).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} configurations to {}", frames.len(), out.display());
        }
        Command::Train { data, out, loss_csv, resume, epochs } => {
            train(&cfg, data, out, loss_csv, resume, epochs)?;
        }
        Command::Evaluate { data, checkpoint } => {
            let ck = load_checkpoint(&checkpoint.unwrap_or(cfg.files.checkpoint.clone()))?;
            let frames = load_dataset(&data.unwrap_or(cfg.files.dataset.clone()))?;
            let (_, _, test) = training::split_dataset(&frames, ck.rng_seed)?;
            let pot = ck.to_potential()?;
            let r = analysis::rmse_metrics(&analysis::predict(&pot, &test)?, &test)?;
            println!("test configurations: {}", test.len());
            println!("rmse_E: {} meV/atom", r.energy_mev_per_atom);
            println!("rmse_F: {} eV/Å", r.force_ev_per_ang);
        }
        Command::Md { sim, ensemble, steps, dt } => {
            if let Some(e) = ensemble {
                cfg.md.ensemble = e;
            }
            cfg.md.n_steps = steps.unwrap_or(cfg.md.n_steps);
            cfg.md.dt = dt.unwrap_or(cfg.md.dt);
            cfg.md.temperature = sim.temperature.unwrap_or(cfg.md.temperature);
            let (model, init) = sim_model(&cfg, &sim, sim.shots)?;
            let masses = vec![simulate::units::SILICON_MASS; init.len()];
            let traj = simulate::run_md(&init, &masses, &model, &cfg.md.protocol(cfg.seed))?;
            write_trajectory(&cfg, &sim, &traj)?;
        }
        Command::Mc { sim, sweeps } => {
            cfg.mc.sweeps = sweeps.unwrap_or(cfg.mc.sweeps);
            cfg.mc.temperature = sim.temperature.unwrap_or(cfg.mc.temperature);
            let shots = sim.shots.or(cfg.mc.shots);
            let (model, init) = sim_model(&cfg, &sim, shots)?;
            let traj = simulate::run_mc(&init, &model, &cfg.mc.protocol(cfg.seed))?;
            write_trajectory(&cfg, &sim, &traj)?;
        }
        Command::Rdf { trajectory, out, reference } => {
            let n_bins = cfg.rdf.n_bins()?;
            let frames = load_dataset(&trajectory.unwrap_or(cfg.files.trajectory.clone()))?;
            let g = analysis::rdf(&frames, cfg.rdf.r_max, n_bins)?;
            let out = out.unwrap_or(cfg.files.rdf_csv.clone());
            let mut w = create(&out)?;
            g.write_csv(&mut w)?;
            w.flush()?;
            if let Some(r) = reference {
                let g_ref = analysis::rdf(&load_dataset(&r)?, cfg.rdf.r_max, n_bins)?;
                let (lo, hi) = cfg.rdf.compare_range;
                println!("l2_distance: {}", g.l2_distance(&g_ref, lo, hi)?);
            }
        }
        Command::ShotsStudy { data, checkpoint, out } => {
            let ck = load_checkpoint(&checkpoint.unwrap_or(cfg.files.checkpoint.clone()))?;
            let frames = load_dataset(&data.unwrap_or(cfg.files.dataset.clone()))?;
            let (_, _, test) = training::split_dataset(&frames, ck.rng_seed)?;
            let n = cfg.shots.n_configs.min(test.len());
            let pot = ck.to_potential()?;
            let res = analysis::shot_noise_study(&pot, &test[..n], &cfg.shots.counts, cfg.shots.repeats, cfg.seed)?;
            let out = out.unwrap_or(cfg.files.shots_csv.clone());
            let mut w = create(&out)?;
            res.write_csv(&mut w)?;
            w.flush()?;
            println!("slope: {}", res.slope);
            println!("shots for 2 meV/atom: {:.0}", res.shots_for_2mev);
        }
    }
    Ok(())
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_dataset(path: &PathBuf) -> Result<Vec<AtomicConfiguration>> {
    xyz::read_file(path).with_context(|| format!("reading {}", path.display()))
}

fn load_checkpoint(path: &PathBuf) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn train(
    cfg: &RunConfig,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    loss_csv: Option<PathBuf>,
    resume: Option<PathBuf>,
    epochs: Option<usize>,
) -> Result<()> {
    let frames = load_dataset(&data.unwrap_or(cfg.files.dataset.clone()))?;
    let out = out.unwrap_or(cfg.files.checkpoint.clone());
    let loss_path = loss_csv.unwrap_or(cfg.files.loss_csv.clone());
    let mut tc = cfg.training.clone();
    tc.seed = cfg.seed;
    tc.max_epochs = epochs.unwrap_or(tc.max_epochs);
    let (train, val, _) = training::split_dataset(&frames, cfg.seed)?;

    let mut trainer = match &resume {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            tc.seed = ck.rng_seed;
            Trainer::from_checkpoint(&ck, tc)?
        }
        None => {
            let mut model = cfg.model.clone();
            if cfg.normalize() {
                training::dataset_stats(&train, model.r_cut)?.apply(&mut model);
            }
            Trainer::new(Potential::new(&model, cfg.seed)?, tc)
        }
    };
    if resume.is_some() && trainer.epoch >= trainer.config.max_epochs {
        bail!(
            "checkpoint already has {} epochs; pass --epochs above that to continue",
            trainer.epoch
        );
    }
    eprintln!(
        "{} parameters, {} train / {} val configurations",
        trainer.potential.n_params(),
        train.len(),
        val.len()
    );

    let mut csv = if resume.is_some() && loss_path.exists() {
        BufWriter::new(OpenOptions::new().append(true).open(&loss_path)?)
    } else {
        let mut w = create(&loss_path)?;
        writeln!(w, "{LOSS_CSV_HEADER}")?;
        w
    };
    let diverged = out.with_extension("diverged.json");
    trainer.run(
        &train,
        &val,
        |t, rec| {
            writeln!(csv, "{}", rec.csv_row())?;
            csv.flush()?;
            t.checkpoint().save(&out)?;
            eprintln!(
                "epoch {:>4}  train {:.4e}  val {:.4e}  E {:.3} meV/atom  F {:.4} eV/Å",
                rec.epoch, rec.train_loss, rec.val_loss, rec.val_rmse.energy_mev_per_atom, rec.val_rmse.force_ev_per_ang
            );
            Ok(())
        },
        |ck| ck.save(&diverged),
    )?;
    trainer.checkpoint().save(&out)?;
    eprintln!("checkpoint written to {}", out.display());
    Ok(())
}

/// Model plus starting structure for md/mc.
fn sim_model(cfg: &RunConfig, sim: &SimArgs, shots: Option<u64>) -> Result<(SimModel, AtomicConfiguration)> {
    let init = match &sim.init {
        Some(p) => load_dataset(p)?
            .into_iter()
            .next()
            .with_context(|| format!("{} has no frames", p.display()))?,
        None => reference_sw::initial_structure(&cfg.data.spec(cfg.seed))?,
    };
    if sim.sw {
        if shots.is_some() {
            bail!("the Stillinger–Weber reference has no shot mode");
        }
        return Ok((SimModel::Sw(StillingerWeber::new(SwParameters::default())), init));
    }
    let ck = load_checkpoint(sim.checkpoint.as_ref().unwrap_or(&cfg.files.checkpoint))?;
    let mode = match shots {
        Some(s) => MeasurementMode::Shots { shots: s, seed: cfg.seed },
        None => MeasurementMode::Exact,
    };
    Ok((SimModel::Trained(ck.to_potential()?, mode), init))
}

enum SimModel {
    Sw(StillingerWeber),
    Trained(Potential, MeasurementMode),
}

impl EnergyModel for SimModel {
    fn energy(&self, config: &AtomicConfiguration, key: u64) -> hqcmlp::Result<f64> {
        match self {
            SimModel::Sw(sw) => sw.energy(config),
            SimModel::Trained(p, mode) => PotentialModel { potential: p, mode: *mode }.energy(config, key),
        }
    }

    fn energy_forces(&self, config: &AtomicConfiguration) -> hqcmlp::Result<(f64, Vec<[f64; 3]>)> {
        match self {
            SimModel::Sw(sw) => EnergyModel::energy_forces(sw, config),
            SimModel::Trained(p, mode) => PotentialModel { potential: p, mode: *mode }.energy_forces(config),
        }
    }
}

fn write_trajectory(cfg: &RunConfig, sim: &SimArgs, traj: &simulate::Trajectory) -> Result<()> {
    let xyz_path = sim.out.clone().unwrap_or(cfg.files.trajectory.clone());
    let csv_path = sim.csv.clone().unwrap_or(cfg.files.trajectory_csv.clone());
    traj.write(&xyz_path, &csv_path)?;
    eprintln!(
        "wrote {} frames to {} and {}",
        traj.snapshots.len(),
        xyz_path.display(),
        csv_path.display()
    );
    Ok(())
}
