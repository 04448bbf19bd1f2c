use std::path::Path;
use std::process::{Command, Output};

use hpm_cli::RunConfig;
use tempfile::TempDir;

const CUBOID: &str = r#"
dimension = 2
intensity = 1.0
k = [1, 2]
pairs = [[0, 0], [1, 2]]
first_moments = true

[distribution]
kind = "cuboid"

[simulation]
replicates = 400
seed = 3

[validation]
realizations = 20
"#;

const ATOMS: &str = r#"
dimension = 2
intensity = 1.5
k = [2]
pairs = [[0, 0], [2, 2]]

[distribution]
kind = "atoms"
atoms = [
  { direction = [1.0, 0.0], weight = 0.5 },
  { direction = [0.6, 0.8], weight = 0.3 },
  { direction = [-0.6, 0.8], weight = 0.2 },
]

[simulation]
replicates = 600
seed = 21
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hpm"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn table(text: &str) -> toml::Table {
    text.parse().unwrap()
}

#[test]
fn oracle_writes_one_table_per_k() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), CUBOID, &["oracle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = table(&read(tmp.path(), "moments_k2.toml"));
    let cov = t["covariance"].as_array().unwrap();
    // cuboid cells are rectangles: the vertex number never varies
    assert_eq!(cov[0].as_array().unwrap()[0].as_float().unwrap(), 0.0);
    let first = t["first_moments"].as_array().unwrap();
    assert_eq!(first[0].as_float().unwrap(), 4.0);
    assert!(tmp.path().join("out/moments_k1.toml").exists());
}

#[test]
fn isotropic_oracle_in_space() {
    let tmp = TempDir::new().unwrap();
    let cfg = "dimension = 3\nintensity = 2.0\nk = [3]\n[distribution]\nkind = \"isotropic-closed-form\"\n";
    assert_eq!(code(&run(tmp.path(), cfg, &["oracle"])), 0);
    let t = table(&read(tmp.path(), "moments_k3.toml"));
    let first = t["first_moments"].as_array().unwrap();
    assert_eq!(first.len(), 4);
    assert!((first[0].as_float().unwrap() - 8.0).abs() < 1e-12);
    let b = t["bounds"].as_table().unwrap();
    let (v, u) = (
        b["variance"].as_float().unwrap(),
        b["upper"].as_float().unwrap(),
    );
    assert!((v - u).abs() <= 1e-12 * u);
}

#[test]
fn bounds_document() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(tmp.path(), ATOMS, &["bounds"])), 0);
    let t = table(&read(tmp.path(), "bounds.toml"));
    assert!(t["volume_product"].as_float().unwrap() >= 8.0 - 1e-9);
    let b = &t["bounds"].as_array().unwrap()[0];
    assert!(b["within_bounds"].as_bool().unwrap());
    assert!(b.get("phi").is_some());
}

#[test]
fn weights_not_summing_to_one_are_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = ATOMS.replace("weight = 0.2", "weight = 0.1");
    let o = run(tmp.path(), &cfg, &["oracle"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sum"));
}

#[test]
fn zero_replicates_are_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        tmp.path(),
        &CUBOID.replace("replicates = 400", "replicates = 0"),
        &["simulate"],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicates"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            tmp.path(),
            &format!("{CUBOID}\ncolour = 1\n"),
            &["oracle"]
        )),
        2
    );
    let nested = CUBOID.replace("seed = 3", "seed = 3\nthreads = 2");
    assert_eq!(code(&run(tmp.path(), &nested, &["oracle"])), 2);
}

#[test]
fn missing_config_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_hpm"))
        .arg("oracle")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_csv_format() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), ATOMS, &["simulate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "report.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,r,s,oracle_value,mc_mean,mc_std_error,z_score,estimator_id,replicates,wall_time"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    // 17 significant digits with a '.' separator
    let mantissa = row[4].split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
    assert!(row[4].contains('.'));
    assert_eq!(row[8], "600");
    assert_eq!(row[9], "");
}

#[test]
fn same_seed_gives_identical_reports() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(
        code(&run(a.path(), ATOMS, &["simulate", "--seed", "77"])),
        0
    );
    assert_eq!(
        code(&run(b.path(), ATOMS, &["simulate", "--seed", "77"])),
        0
    );
    assert_eq!(read(a.path(), "report.csv"), read(b.path(), "report.csv"));
    let c = TempDir::new().unwrap();
    run(c.path(), ATOMS, &["simulate", "--seed", "78"]);
    assert_ne!(read(a.path(), "report.csv"), read(c.path(), "report.csv"));
}

#[test]
fn worker_count_does_not_change_results() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(
        code(&run(a.path(), ATOMS, &["simulate", "--workers", "1"])),
        0
    );
    assert_eq!(
        code(&run(b.path(), ATOMS, &["simulate", "--workers", "3"])),
        0
    );
    assert_eq!(read(a.path(), "report.csv"), read(b.path(), "report.csv"));
}

#[test]
fn exhausted_window_doublings_are_non_convergence() {
    let tmp = TempDir::new().unwrap();
    let cfg = CUBOID.replace(
        "seed = 3",
        "seed = 3\nwindow_factor = 0.0001\nretry_cap = 0",
    );
    let o = run(tmp.path(), &cfg, &["simulate"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_passes_and_resolves_the_cuboid_prefactor() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), CUBOID, &["validate"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert!(
        stdout
            .lines()
            .any(|l| l.starts_with("PASS oracle.cuboid_prefactor.d2")
                && l.contains("matched=derived"))
    );
    let t = table(&read(tmp.path(), "validation.toml"));
    assert!(t["passed"].as_bool().unwrap());
}

#[test]
fn wrong_kappa_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let cfg = CUBOID.replace(
        "realizations = 20",
        "realizations = 20\nkappa_overrides = { \"2\" = 3.0 }",
    );
    let o = run(tmp.path(), &cfg, &["validate"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL bounds."));
}

#[test]
fn negative_tolerance_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{ATOMS}\n[tolerances]\nchecks = {{ \"oracle.symmetry\" = -1.0 }}\n");
    assert_eq!(code(&run(tmp.path(), &cfg, &["validate"])), 2);
}

#[test]
fn canonical_form_round_trips() {
    for text in [CUBOID, ATOMS] {
        let cfg = RunConfig::from_toml(text).unwrap();
        let again = RunConfig::from_toml(&cfg.to_canonical_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_canonical_toml(), again.to_canonical_toml());
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
