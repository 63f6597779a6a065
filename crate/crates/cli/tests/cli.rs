use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 3
[data]
n_configs = 12
n_atoms = 8
cell_length = 5.431
equilibration_sweeps = 20
decorrelation_sweeps = 2
[model]
hidden_irreps = "4x0e + 2x1o"
n_layers = 1
radial_mlp_sizes = [4]
[training]
max_epochs = 2
batch_size = 4
[md]
n_steps = 10
stride = 5
[mc]
sweeps = 4
equilibration_sweeps = 2
stride = 2
[rdf]
r_max = 2.7
[shots]
counts = [10, 100, 1000]
repeats = 2
n_configs = 1
"#;

fn hqcmlp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqcmlp"))
        .current_dir(dir)
        .env("HQCMLP_CONFIG", "run.toml")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hqcmlp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = hqcmlp(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    ok(dir.path(), &["generate-data"]);
    dir
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn generate_data_frame_count_and_bad_path() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), CONFIG).unwrap();
    ok(d, &["generate-data", "--n-configs", "10", "--out", "ten.xyz"]);
    let frames = hqcmlp::geometry::xyz::read_file(d.join("ten.xyz")).unwrap();
    assert_eq!(frames.len(), 10);
    assert!(frames.iter().all(|f| f.energy.is_some() && f.forces.is_some()));
    let err = fails(d, &["generate-data", "--out", "no/such/dir/x.xyz"]);
    assert!(err.contains("no/such/dir"), "{err}");
}

#[test]
fn train_resume_and_evaluate() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["train"]);
    ok(d, &["train", "--resume", "checkpoint.json", "--epochs", "4"]);
    let csv = read(d, "loss.csv");
    let epochs: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs, ["1", "2", "3", "4"]);
    assert_eq!(csv.lines().filter(|l| l.starts_with("epoch")).count(), 1);

    let out = ok(d, &["evaluate"]);
    assert!(out.contains("rmse_E:") && out.contains("meV/atom"), "{out}");
    assert!(out.contains("rmse_F:") && out.contains("eV/Å"), "{out}");
}

#[test]
fn classical_and_vqc_loss_csvs_share_a_schema() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["--readout", "classical", "train", "--out", "c.json", "--loss-csv", "c.csv"]);
    ok(d, &["--readout", "vqc:BasicEntanglerCZ", "train", "--out", "q.json", "--loss-csv", "q.csv"]);
    let (c, q) = (read(d, "c.csv"), read(d, "q.csv"));
    assert_eq!(c.lines().next(), q.lines().next());
    assert_eq!(c.lines().count(), q.lines().count());
    assert_ne!(c, q);
}

#[test]
fn training_output_is_independent_of_thread_count() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["--threads", "1", "train", "--out", "a.json", "--loss-csv", "a.csv"]);
    ok(d, &["--threads", "3", "train", "--out", "b.json", "--loss-csv", "b.csv"]);
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert_eq!(read(d, "a.json"), read(d, "b.json"));
}

#[test]
fn shot_mode_md_refused_but_mc_runs() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["--readout", "vqc:BasicEntanglerCZ", "train", "--epochs", "1"]);
    let err = fails(d, &["md", "--shots", "1000"]);
    assert!(err.contains("forces unavailable under finite shots"), "{err}");

    ok(d, &["mc", "--shots", "1000"]);
    let csv = read(d, "trajectory.csv");
    assert!(csv.starts_with("step,time_fs,e_pot,e_kin,t_inst,acceptance"));
    assert_eq!(csv.lines().count(), 1 + 3);

    let out = ok(d, &["shots-study"]);
    assert!(out.contains("slope:"));
    assert!(read(d, "shots.csv").starts_with("S,rmse_mev_per_atom\n10,"));
}

#[test]
fn md_and_rdf_on_the_reference() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["md", "--sw", "--ensemble", "nve"]);
    assert_eq!(read(d, "trajectory.csv").lines().count(), 1 + 3);
    ok(d, &["md", "--sw", "--ensemble", "nve", "--out", "again.xyz", "--csv", "again.csv"]);
    assert_eq!(read(d, "trajectory.csv"), read(d, "again.csv"));

    let out = ok(d, &["rdf", "--reference", "again.xyz"]);
    assert!(out.contains("l2_distance: 0"), "{out}");
    assert!(read(d, "rdf.csv").starts_with("bin_center,g_r\n"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), CONFIG).unwrap();
    let err = fails(d, &["train"]);
    assert!(err.contains("dataset.xyz"), "{err}");
    fails(d, &["--readout", "vqc:Nope", "train"]);
    fails(d, &["evaluate", "--checkpoint", "missing.json"]);

    std::fs::write(d.join("bad.toml"), "[training]\nlearning_rate = 1.0\n").unwrap();
    let err = fails(d, &["--config", "bad.toml", "generate-data"]);
    assert!(err.contains("learning_rate"), "{err}");
}
