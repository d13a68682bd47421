use std::process::{Command, Output};

fn lul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lul")).args(args).env_remove("LUL_SEED").output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn bad_flag_exits_with_two() {
    assert_eq!(lul(&["frontier", "--bogus"]).status.code(), Some(2));
    assert_eq!(lul(&["frontier", "--theta", "nope"]).status.code(), Some(2));
}

#[test]
fn corrupt_population_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pop.txt");
    std::fs::write(&path, "dim 1\nmu 1\nell 4\nc_radius 1\nclient\nweight x\n").unwrap();
    let out = lul(&["verify", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
    let missing = lul(&["simulate", "--input", dir.path().join("absent").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn inadmissible_grid_is_a_precondition_error() {
    let out = lul(&["frontier", "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
}

#[test]
fn single_point_frontier() {
    let csv = stdout(&lul(&["frontier", "--k-max", "1"]));
    assert_eq!(csv.lines().next().unwrap(), "axis_value,rho,delta,kappa,kappa_source,alpha,gamma,K,scheme,optimizer");
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(column(&csv, "delta")[0].parse::<f64>().unwrap(), 0.0);
    let rho: f64 = column(&csv, "rho")[0].parse().unwrap();
    assert!((rho - 9.0 / 11.0).abs() < 1e-15);
}

#[test]
fn three_optimizers_give_ordered_curves() {
    let csv = stdout(&lul(&["frontier", "--optimizers", "plain,nesterov,heavy_ball", "--k-max", "1000", "--points", "20"]));
    let rho: Vec<f64> = column(&csv, "rho").iter().map(|v| v.parse().unwrap()).collect();
    let kappa: Vec<f64> = column(&csv, "kappa").iter().map(|v| v.parse().unwrap()).collect();
    for (chunk, k) in rho.chunks(3).zip(kappa.chunks(3)) {
        if k[0] > 1.0 + 1e-9 {
            assert!(chunk[2] < chunk[1] && chunk[1] < chunk[0]);
        }
    }
}

#[test]
fn svg_is_valid_xml_with_one_polyline_per_series() {
    let svg = stdout(&lul(&["--format", "svg", "frontier", "--optimizers", "plain,heavy-ball", "--points", "15"]));
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|n| n.attribute("points").is_some_and(|p| !p.is_empty())));

    let svg = stdout(&lul(&["--format", "svg", "maml-sim", "--seeds", "3", "--k-max", "100", "--points", "10"]));
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 4);
}

#[test]
fn json_reports_are_versioned() {
    let json = stdout(&lul(&["--format", "json", "verify", "--only", "theorem1", "--trials", "20"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"][0]["name"], "theorem1");
    assert_eq!(v["checks"][0]["instances"], 20);
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lul"));
        cmd.env_remove("LUL_SEED");
        if let Some(v) = env {
            cmd.env("LUL_SEED", v);
        }
        stdout(&cmd.args(args).output().unwrap())
    };
    let sim = ["simulate", "--rounds", "5"];
    assert_eq!(run(Some("42"), &sim), run(None, &["--seed", "42", "simulate", "--rounds", "5"]));
    assert_ne!(run(Some("42"), &sim), run(None, &sim));
}

#[test]
fn simulate_without_distortion_reaches_the_minimizer() {
    let json = stdout(&lul(&["--format", "json", "simulate", "--gamma", "0", "--theta", "one"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let last = v["dist_to_empirical_opt"].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!(last <= 1e-8, "final distance {last}");
}

#[test]
fn population_can_be_saved_and_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pop.txt");
    let p = path.to_str().unwrap();
    let first = stdout(&lul(&["--seed", "3", "simulate", "--rounds", "10", "--save-population", p]));
    let again = stdout(&lul(&["simulate", "--rounds", "10", "--input", p]));
    assert_eq!(first, again);
    let checks = stdout(&lul(&["verify", "--input", p]));
    assert!(checks.lines().skip(1).all(|l| l.ends_with(",true")), "{checks}");
}

#[test]
fn tightness_b2_reaches_twice_the_radius() {
    let csv = stdout(&lul(&["tightness", "--family", "b2", "--k", "200", "--p", "0.999"]));
    let d: f64 = column(&csv, "distance")[0].parse().unwrap();
    assert!(d >= 1.99);
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mad.csv");
    let out = lul(&["-o", path.to_str().unwrap(), "mad-check", "--trials", "50", "--matrix-trials", "10"]);
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 61);
}
