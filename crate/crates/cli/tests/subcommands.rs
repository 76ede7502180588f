//! One smoke run per subcommand against small configs, checking the exit
//! status, the presence of the report artifacts, and a few report fields.

use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-embed"))
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Value {
    let status = bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "command {args:?} failed");
    let name = match args {
        ["bessel", sub] => format!("bessel_{sub}"),
        ["conditions", sub] => format!("conditions_{sub}"),
        [only] => only.to_string(),
        _ => unreachable!(),
    };
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{name}.json"))).unwrap())
        .unwrap()
}

#[test]
fn every_subcommand_produces_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{
  "problem": {
    "d": 1,
    "p": [4.0, 4.0],
    "weights": ["power:beta=1", "power:beta=1"],
    "kernel": {"type": "bessel", "alpha": 0.5, "lambda": 1.0},
    "theta": 2.0,
    "family": {"generator": "origin_tower", "k_min": 0, "k_max": 10, "mesh_level": 12},
    "window": {"k_min": 0, "k_max": 10, "radius": 1}
  },
  "seed": 5,
  "trials": 2,
  "verify": {"dilations": [0, 2], "resolution": 5, "theta_variant": false},
  "extremize": {"cycles": 6, "restarts": 2, "mesh_level": 6},
  "ap": {"p": 2.0, "weight": "power:beta=0.5"},
  "series": {"rho_over_minus_inv_r": 2.0},
  "bessel": {"alpha": 0.5, "d": 1, "lambda": 1.0, "samples": 60, "eps": 0.1,
             "profile": {"type": "empirical"}, "points": [[0.1], [0.3]]},
  "conditions": {"v": "power:beta=1", "p": 2.0, "q": 2.0, "alpha": 0.5, "n": 2.0}
}"#,
    )
    .unwrap();

    let rep = run(&["a0"], &cfg_path, &out);
    assert_eq!(rep["variant"], "series");
    assert!(rep["a0"].as_f64().unwrap() > 0.0);

    let rep = run(&["verify"], &cfg_path, &out);
    assert_eq!(rep["within_coarse_cap"], true);

    let rep = run(&["extremize"], &cfg_path, &out);
    assert!(rep["best_ratio"].as_f64().unwrap() > 0.0);
    assert!(out.join("extremizer_slot0.csv").exists());

    let rep = run(&["ap"], &cfg_path, &out);
    assert!(rep["value"].as_f64().unwrap() >= 1.0);
    assert!(rep["a_infinity_proxy"]["p"].as_f64().unwrap() == 64.0);

    let rep = run(&["a2check"], &cfg_path, &out);
    assert!(rep["normalized"].as_f64().unwrap() <= rep["eta_cap"].as_f64().unwrap());

    let rep = run(&["series"], &cfg_path, &out);
    assert_eq!(rep["verdict"], "CONVERGENT");
    assert!(out.join("series_partial_sums.csv").exists());

    let rep = run(&["bessel", "scaling"], &cfg_path, &out);
    assert_eq!(rep["pass"], true);

    let rep = run(&["bessel", "bounds"], &cfg_path, &out);
    assert_eq!(rep["pass"], true);
    let table = std::fs::read_to_string(out.join("bessel_kernel_table.csv")).unwrap();
    let values: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for pair in values.windows(2) {
        assert!(pair[1] < pair[0], "kernel table must fall strictly");
    }

    let rep = run(&["bessel", "lambda0"], &cfg_path, &out);
    assert_eq!(rep["certified"], true);
    assert_eq!(rep["direct_below_eps"], true);

    let rep = run(&["bessel", "majorant"], &cfg_path, &out);
    assert!(rep["ratio"].as_f64().unwrap() > 0.0);

    let rep = run(&["conditions", "thm41"], &cfg_path, &out);
    assert_eq!(rep["vanishing"], "VANISHES");

    // consistent exponent quadruple for the series conditions
    let text = std::fs::read_to_string(&cfg_path).unwrap();
    let text = text.replace(
        r#""conditions": {"v": "power:beta=1", "p": 2.0, "q": 2.0, "alpha": 0.5, "n": 2.0}"#,
        r#""conditions": {"v": "power:beta=1", "p": 3.0, "q": 1.5, "alpha": 0.5, "theta1": 1.5, "theta2": 2.0}"#,
    );
    std::fs::write(&cfg_path, text).unwrap();
    let rep = run(&["conditions", "thm42"], &cfg_path, &out);
    assert!(rep["norm"].as_f64().unwrap() > 0.0);
    assert!(rep["small_cube"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn sampled_weight_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // cells of [-1,1) at level 2: indices -4..=3, all mass one except a peak
    let weight_path = dir.path().join("weight.csv");
    let mut rows = String::from("# tau=0; level=2; lo=-4; hi=3\n");
    for m in -4..=3 {
        let v = if m == 1 { 4.0 } else { 1.0 };
        rows.push_str(&format!("{m},{v}\n"));
    }
    std::fs::write(&weight_path, rows).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{
  "problem": {{
    "d": 1,
    "p": [2.0, 2.0],
    "weights": ["sampled:{w}", "lebesgue"],
    "kernel": {{"type": "riesz", "alpha": 0.5}},
    "family": {{"generator": "disjoint_row", "level": 1, "count": 2, "mesh_level": 2}},
    "window": {{"k_min": 0, "k_max": 2, "radius": 1}}
  }},
  "seed": 1,
  "trials": 1,
  "ap": {{"p": 2.0, "weight": "sampled:{w}"}}
}}"#,
            w = weight_path.display()
        ),
    )
    .unwrap();
    let status = bin()
        .args(["ap", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rep: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ap.json")).unwrap()).unwrap();
    // the peaked cell makes the estimate exceed 1
    assert!(rep["value"].as_f64().unwrap() > 1.0);
}
