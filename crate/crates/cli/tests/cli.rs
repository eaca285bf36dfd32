use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sgsem(args: &[&str]) -> Output {
    sgsem_env(args, &[])
}

fn sgsem_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sgsem"));
    cmd.args(args).env_remove("SGSEM_RNG_SEED").env("RUST_LOG", "off");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn json_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    v.sort();
    v
}

fn field_values(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("x,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn eigs_lists_the_square_spectrum() {
    let o = sgsem(&["eigs"]);
    assert_eq!(code(&o), 0);
    let lambdas: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(3).unwrap().parse().unwrap())
        .collect();
    let expected = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0, 13.0, 13.0, 17.0, 17.0];
    assert_eq!(lambdas.len(), 10);
    for (a, b) in lambdas.iter().zip(expected) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    let o = sgsem(&["eigs", "--count", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn eigs_writes_a_table_with_out() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = sgsem(&["--out", out.to_str().unwrap(), "eigs", "--count", "4"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("tables/eigenvalues.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(code(&sgsem(&["eigs", "--domain", "0,1,0,0"])), 1);
    assert_eq!(code(&sgsem(&["eigs", "--domain", "0,1"])), 1);
    assert_eq!(code(&sgsem(&["eigs", "--count", "0"])), 1);
    assert_eq!(code(&sgsem(&["frobnicate"])), 1);
    assert_eq!(code(&sgsem(&["-N", "1", "seeds"])), 1);
    assert_eq!(code(&sgsem(&["--config", "/nonexistent/sgsem.json", "seeds"])), 1);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"N": 16}"#);
    assert_eq!(code(&sgsem(&["--config", cfg.to_str().unwrap(), "seeds"])), 1);
    let cfg = write_config(tmp.path(), r#"{"nonlinearity": {"name": "quartic"}}"#);
    assert_eq!(code(&sgsem(&["--config", cfg.to_str().unwrap(), "seeds"])), 1);

    let o = sgsem_env(&["seeds"], &[("SGSEM_RNG_SEED", "abc")]);
    assert_eq!(code(&o), 1);
}

#[test]
fn help_exits_with_zero() {
    let o = sgsem(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("converge"));
}

#[test]
fn cubic_seed_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"seeds": {"eigen": {"lambda": [50]}}}"#);
    let out = tmp.path().join("run");
    let o = sgsem(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "seeds",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json_files(&out.join("seeds")).len(), 26);
    assert_eq!(manifest(&out)["canonical_seeds"], 13);
}

#[test]
fn sine_gordon_group_search() {
    let tmp = tempfile::tempdir().unwrap();

    let cfg = write_config(
        tmp.path(),
        r#"{"nonlinearity": {"name": "sine-gordon", "kappa": 1}, "seeds": {"random": {"trials": 200}}}"#,
    );
    let out = tmp.path().join("k1");
    let o = sgsem(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "seeds",
    ]);
    assert_eq!(code(&o), 0);
    assert!(json_files(&out.join("seeds")).is_empty());
    assert_eq!(manifest(&out)["canonical_seeds"], 0);

    let cfg = write_config(
        tmp.path(),
        r#"{"nonlinearity": {"name": "sine-gordon", "kappa": 9}, "seeds": {"eigen": {"lambda": [5]}}}"#,
    );
    let out = tmp.path().join("k9");
    let o = sgsem(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "seeds",
    ]);
    assert_eq!(code(&o), 0);
    let canonical = manifest(&out)["canonical_seeds"].as_u64().unwrap() as usize;
    assert!(canonical > 0);
    assert_eq!(json_files(&out.join("seeds")).len(), 2 * canonical);
}

#[test]
fn solve_and_export_give_sign_symmetric_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();
    let o = sgsem(&["--out", out_s, "-N", "16", "solve"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let sols = m["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    assert!(sols.iter().all(|s| s["converged"] == true));
    assert_eq!(sols[0]["sign"], "positive");
    assert_eq!(sols[1]["sign"], "negative");
    assert!(out.join("tables/summary.csv").exists());

    let o = sgsem(&["--out", out_s, "export", "--resolution", "9"]);
    assert_eq!(code(&o), 0);
    let fields = json_files(&out.join("solutions"));
    assert_eq!(fields.len(), 2);
    let mut exported: Vec<PathBuf> = fs::read_dir(out.join("fields"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    exported.sort();
    assert_eq!(exported.len(), 2);
    let a = field_values(&exported[0]);
    let b = field_values(&exported[1]);
    assert_eq!(a.len(), 81);
    let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak > 1.0);
    for (x, y) in a.iter().zip(&b) {
        assert!((x + y).abs() < 1e-9);
    }
    // Export merges into the solve manifest rather than replacing it.
    let m = manifest(&out);
    assert_eq!(m["solutions"].as_array().unwrap().len(), 2);
    assert_eq!(m["fields"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_only_selected_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"seeds": {"eigen": {"lambda": [5]}}}"#);
    let out = tmp.path().join("run");
    let o = sgsem(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "-N",
        "20",
        "solve",
        "--only",
        "u_{12+21}",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let sols = m["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0]["seed_label"], "u_{12+21}");
}

#[test]
fn solve_from_a_seed_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let seeds = tmp.path().join("seeds_run");
    assert_eq!(code(&sgsem(&["--out", seeds.to_str().unwrap(), "seeds"])), 0);
    let out = tmp.path().join("solve_run");
    let o = sgsem(&[
        "--out",
        out.to_str().unwrap(),
        "-N",
        "12",
        "solve",
        "--seeds",
        seeds.join("seeds").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&out)["solutions"].as_array().unwrap().len(), 2);
}

#[test]
fn partial_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"seeds": {"eigen": {"lambda": [5]}}, "newton": {"max_iters": 1}}"#,
    );
    let out = tmp.path().join("run");
    let o = sgsem(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "-N",
        "16",
        "solve",
    ]);
    assert_eq!(code(&o), 2);
    let m = manifest(&out);
    let summary = &m["summary"];
    assert!(summary["failed"].as_u64().unwrap() > 0);
    assert_eq!(
        summary["total"].as_u64().unwrap(),
        summary["failed"].as_u64().unwrap() + summary["converged"].as_u64().unwrap()
    );
}

#[test]
fn converge_writes_tables_and_checks_arguments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();
    let o = sgsem(&["--out", out_s, "converge", "--n-list", "8,12,16", "--reference-n", "30"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tables: Vec<String> = fs::read_dir(out.join("tables"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let csv_name = tables.iter().find(|n| n.ends_with(".csv")).expect("csv table");
    let csv = fs::read_to_string(out.join("tables").join(csv_name)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,l2,h1"));
    let l2: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(l2.len(), 3);
    assert!(l2[0] > l2[1] && l2[1] > l2[2]);

    let cfg = write_config(tmp.path(), r#"{"converge": {"n_list": []}}"#);
    assert_eq!(
        code(&sgsem(&["--config", cfg.to_str().unwrap(), "--out", out_s, "converge"])),
        1
    );
    assert_eq!(
        code(&sgsem(&[
            "--out",
            out_s,
            "converge",
            "--n-list",
            "8,40",
            "--reference-n",
            "30"
        ])),
        1
    );
    assert_eq!(code(&sgsem(&["--out", out_s, "converge", "--label", "u_{99}"])), 1);
}

#[test]
fn scan_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"nonlinearity": {"name": "sine-gordon", "kappa": 1},
            "seeds": {"random": {"basis_size": 6, "trials": 300}},
            "scan": {"kappa": [1, 6]}}"#,
    );
    let out = tmp.path().join("run");
    let o = sgsem(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "-N",
        "16",
        "scan",
    ]);
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("tables/catalog.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[0][4], "0");
    let signed: usize = rows[1][4].parse().unwrap();
    let canonical: usize = rows[1][3].parse().unwrap();
    assert!(canonical > 0);
    assert_eq!(signed, 2 * canonical);
    let pos: usize = rows[1][5].parse().unwrap();
    let neg: usize = rows[1][6].parse().unwrap();
    let changing: usize = rows[1][7].parse().unwrap();
    assert_eq!(pos, neg);
    assert_eq!(pos + neg + changing, signed);
}

#[test]
fn runs_are_reproducible_and_the_seed_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"nonlinearity": {"name": "sine-gordon", "kappa": 6}, "seeds": {"random": {"basis_size": 6, "trials": 100}}}"#,
    );
    let cfg_s = cfg.to_str().unwrap();
    let run = |name: &str, extra: &[&str], env: &[(&str, &str)]| {
        let out = tmp.path().join(name);
        let mut args = vec!["--config", cfg_s, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        args.push("seeds");
        let o = sgsem_env(&args, env);
        assert_eq!(code(&o), 0);
        out
    };
    let read_all = |dir: &Path| -> Vec<(String, String)> {
        let seeds = dir.join("seeds");
        json_files(&seeds)
            .into_iter()
            .map(|n| {
                let body = fs::read_to_string(seeds.join(&n)).unwrap();
                (n, body)
            })
            .collect()
    };

    let a = run("a", &["--seed", "5"], &[]);
    let b = run("b", &["--seed", "5", "--workers", "1"], &[]);
    assert_eq!(read_all(&a), read_all(&b));
    assert_eq!(
        fs::read_to_string(a.join("manifest.json"))
            .unwrap()
            .replace("/a\"", "/b\""),
        fs::read_to_string(b.join("manifest.json")).unwrap()
    );

    let env = run("env", &[], &[("SGSEM_RNG_SEED", "5")]);
    assert_eq!(manifest(&env)["rng_seed"], 5);
    assert_eq!(read_all(&a), read_all(&env));

    let flag_wins = run("flag", &["--seed", "8"], &[("SGSEM_RNG_SEED", "5")]);
    assert_eq!(manifest(&flag_wins)["rng_seed"], 8);
}
