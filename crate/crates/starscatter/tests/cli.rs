use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("starscatter-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starscatter"))
        .current_dir(dir)
        .args(args)
        .env_remove("STARSCATTER_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn dirichlet_pair_is_valid() {
    let dir = scratch("bc");
    fs::write(
        dir.join("run.toml"),
        "[potential]\npreset = \"coupled_channels\"\n",
    )
    .unwrap();
    let o = run(&dir, &["bc-validate", "--config", "run.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).starts_with("valid, θ = [π, π]"),
        "{}",
        stdout(&o)
    );
    let nf = fs::read_to_string(dir.join("o/normal_form.toml")).unwrap();
    assert!(nf.contains("n_d = 2"));
}

#[test]
fn mixed_angles_are_reported() {
    let dir = scratch("mixed");
    fs::write(
        dir.join("run.toml"),
        "[boundary]\nkind = \"mixed\"\ntheta = 0.7\n",
    )
    .unwrap();
    let o = run(&dir, &["bc-validate", "--config", "run.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).contains("6.99999999999999956e-1"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn scatter_output_is_byte_identical() {
    let dir = scratch("repeat");
    let a = run(
        &dir,
        &["scatter", "--out", "a", "--kmax", "3", "--dk", "0.1"],
    );
    let b = run(
        &dir,
        &[
            "scatter",
            "--out",
            "b",
            "--kmax",
            "3",
            "--dk",
            "0.1",
            "--threads",
            "2",
        ],
    );
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let ta = fs::read(dir.join("a/scatter.csv")).unwrap();
    assert_eq!(ta, fs::read(dir.join("b/scatter.csv")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("# n = 1\n# dk = 1.00000000000000006e-1\n"));
    // header plus 2 * 30 symmetric nodes
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 61);
}

#[test]
fn flags_override_the_config() {
    let dir = scratch("override");
    fs::write(
        dir.join("run.toml"),
        "out = \"from_file\"\n[grid]\nk_max = 5.0\ndk = 0.5\n",
    )
    .unwrap();
    let o = run(&dir, &["scatter", "--config", "run.toml", "--kmax", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.join("from_file/scatter.csv")).unwrap();
    assert!(text.contains("# k_max = 1.00000000000000000e0"), "{text}");
}

#[test]
fn square_well_bound_states() {
    let dir = scratch("bound");
    fs::write(
        dir.join("run.toml"),
        "[potential]\npreset = \"square_well\"\nparams = { depth = -10.0 }\n",
    )
    .unwrap();
    let o = run(
        &dir,
        &["bound-states", "--config", "run.toml", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(0));
    // sqrt(10) lies between pi/2 and 3 pi/2: one Dirichlet bound state
    assert!(stdout(&o).starts_with("1 bound states"), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.join("o/bound_states.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn unknown_key_exits_with_2() {
    let dir = scratch("unknown");
    fs::write(dir.join("run.toml"), "[grid]\nstep = 0.1\n").unwrap();
    let o = run(&dir, &["scatter", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));
}

#[test]
fn bad_values_exit_with_2() {
    let dir = scratch("bad");
    assert_eq!(run(&dir, &["scatter", "--h", "-1"]).status.code(), Some(2));
    assert_eq!(
        run(&dir, &["scatter", "--config", "missing.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&dir, &["frobnicate"]).status.code(), Some(2));
    fs::write(dir.join("run.toml"), "[potential]\npreset = \"nope\"\n").unwrap();
    assert_eq!(
        run(&dir, &["scatter", "--config", "run.toml"])
            .status
            .code(),
        Some(2)
    );
    fs::write(dir.join("odd.toml"), "[boundary]\nkind = \"delta\"\n").unwrap();
    assert_eq!(
        run(&dir, &["scatter", "--config", "odd.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn invalid_boundary_file_exits_with_1() {
    let dir = scratch("domain");
    fs::write(
        dir.join("bc.toml"),
        "n = 1\na_re = [0.0]\na_im = [0.0]\nb_re = [0.0]\nb_im = [0.0]\n",
    )
    .unwrap();
    fs::write(
        dir.join("run.toml"),
        "[boundary]\nkind = \"file\"\nfile = \"bc.toml\"\n",
    )
    .unwrap();
    let o = run(&dir, &["bc-validate", "--config", "run.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_count_from_the_environment() {
    let dir = scratch("env");
    let o = Command::new(env!("CARGO_BIN_EXE_starscatter"))
        .current_dir(&dir)
        .args(["zero-energy", "--out", "o"])
        .env("STARSCATTER_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_starscatter"))
        .current_dir(&dir)
        .args(["zero-energy", "--out", "o"])
        .env("STARSCATTER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let report = fs::read_to_string(dir.join("o/zero_energy.toml")).unwrap();
    assert!(report.contains("classification = \"generic\""));
}

#[test]
fn fold_reports_both_sides_of_the_junction() {
    let dir = scratch("fold");
    fs::write(
        dir.join("run.toml"),
        "[boundary]\nlambda_re = [1.3]\n[fold]\nlength = 10.0\nt = 0.5\n",
    )
    .unwrap();
    let o = run(&dir, &["fold", "--config", "run.toml", "--out", "o"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(dir.join("o/fold.csv")).unwrap();
    assert!(text.contains("# jump_residual"));
    let zeros = text
        .lines()
        .filter(|l| l.starts_with("0.0") || l.starts_with("-0.0"))
        .count();
    assert_eq!(zeros, 2);
}
