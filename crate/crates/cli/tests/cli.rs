use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scalesi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalesi"))
        .args(args)
        .output()
        .expect("run scalesi")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// Tree 1 beats tree 2 by 0.35 log-likelihood units per site on average with
// unit spread: z = 3.5 at sigma^2 = 1, so tree 2 only wins at large scales.
fn two_tree_fixture(dir: &Path) -> PathBuf {
    let n = 100;
    let mut text = format!("{n} 2\n");
    for i in 0..n {
        let d = 0.35 + if i % 2 == 0 { 1.0 } else { -1.0 };
        text.push_str(&format!("{} -3.0\n", -3.0 + d));
    }
    let path = dir.join("two.txt");
    fs::write(&path, text).unwrap();
    path
}

fn column(table: &str, item: &str, name: &str) -> String {
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    let row = lines.find(|l| l.split('\t').next() == Some(item)).unwrap();
    row.split('\t').nth(idx).unwrap().to_string()
}

#[test]
fn toy_pipeline_dominated_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let input = two_tree_fixture(tmp.path());
    let out = tmp.path().join("out");
    let o = scalesi(&["pvalues", "--input", s(&input), "--nb", "2000", "--seed", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trees = fs::read_to_string(out.join("trees.tsv")).unwrap();
    let bp1: f64 = column(&trees, "T1", "bp").parse().unwrap();
    let bp2: f64 = column(&trees, "T2", "bp").parse().unwrap();
    assert!(bp1 > 0.99, "{trees}");
    assert!(bp2 < 0.01, "{trees}");
    for t in ["T1", "T2"] {
        let si: f64 = column(&trees, t, "si").parse().unwrap();
        assert!(si.is_finite() && (0.0..=1.0).contains(&si));
    }
    assert_eq!(column(&trees, "T2", "mode"), "outside");
    for f in ["counts.tsv", "psi.tsv", "models.tsv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("edges.tsv").exists());
}

#[test]
fn counts_are_reusable_by_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let input = two_tree_fixture(tmp.path());
    let boot = tmp.path().join("boot");
    let full = tmp.path().join("full");
    let refit = tmp.path().join("refit");
    let common = ["--input", s(&input), "--nb", "1000", "--seed", "9", "--scales", "narrow10"];
    let o = scalesi(&[&["bootstrap"], &common[..], &["--out", s(&boot)]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = scalesi(&[&["pvalues"], &common[..], &["--out", s(&full)]].concat());
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(boot.join("counts.tsv")).unwrap(),
        fs::read(full.join("counts.tsv")).unwrap()
    );
    let o = scalesi(&["fit", "--counts", s(&boot.join("counts.tsv")), "--out", s(&refit)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(refit.join("pvalues.tsv")).unwrap(),
        fs::read_to_string(full.join("trees.tsv")).unwrap()
    );
}

#[test]
fn edges_with_topologies() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 60;
    let mut text = format!("{n} 3\n");
    for i in 0..n {
        let a = -2.0 - 0.01 * (i % 7) as f64;
        let b = -2.0 - 0.013 * (i % 5) as f64;
        let c = -2.0 - 0.011 * (i % 3) as f64;
        text.push_str(&format!("{a} {b} {c}\n"));
    }
    let input = tmp.path().join("xi.txt");
    fs::write(&input, text).unwrap();
    let topo = tmp.path().join("trees.txt");
    fs::write(&topo, "((12)34)\n((13)24)\n((14)23)\n").unwrap();
    let out = tmp.path().join("out");
    let o = scalesi(&[
        "pvalues", "--input", s(&input), "--topologies", s(&topo), "--nb", "500", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("edge_table.tsv")).unwrap();
    assert_eq!(table, "edge\tmask\ttrees\nE1\t++--\tT1\nE2\t+-+-\tT2\nE3\t-++-\tT3\n");
    let edges = fs::read_to_string(out.join("edges.tsv")).unwrap();
    assert_eq!(edges.lines().count(), 4);
}

#[test]
fn missing_input_is_io_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = scalesi(&["pvalues", "--input", s(&tmp.path().join("nope.txt")), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(!out.exists());
}

#[test]
fn error_classes_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.txt");
    fs::write(&bad, "2 2\n-1.0 oops\n-1.0 -2.0\n").unwrap();
    let out = tmp.path().join("out");
    let o = scalesi(&["pvalues", "--input", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!out.exists());

    let input = two_tree_fixture(tmp.path());
    let o = scalesi(&["pvalues", "--input", s(&input), "--nb", "50", "--out", s(&out)]);
    assert_eq!(code(&o), 5);
    let o = scalesi(&["pvalues", "--input", s(&input), "--alpha", "0.7", "--out", s(&out)]);
    assert_eq!(code(&o), 5);
    let o = scalesi(&["pvalues", "--input", s(&input), "--scales", "1,0", "--out", s(&out)]);
    assert_eq!(code(&o), 5);
    assert!(!out.exists());

    let o = scalesi(&["shortcut", "--bp", "0", "--au", "0.5"]);
    assert_eq!(code(&o), 7);
    let o = scalesi(&["frobnicate"]);
    assert_eq!(code(&o), 2);

    let counts = tmp.path().join("counts.tsv");
    fs::write(&counts, "x\t1\t100\t0\t2\t100\t0\n").unwrap();
    let o = scalesi(&["fit", "--counts", s(&counts), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let table = fs::read_to_string(out.join("pvalues.tsv")).unwrap();
    assert_eq!(column(&table, "x", "bp"), "NA");
}

#[test]
fn shortcut_reports_both_si_values() {
    let o = scalesi(&["shortcut", "--bp", "0.930", "--au", "0.956"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let get = |k: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k}\t")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get("beta0") + 1.59).abs() < 0.01);
    assert!((get("beta1") - 0.12).abs() < 0.01);
    assert!((get("si_prime") - 0.903).abs() < 0.005);
    assert!((1.0 - get("si_inside") - get("si_prime")).abs() < 1e-12);

    let o = scalesi(&["shortcut", "--bp", "0.015", "--au", "0.100"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("mode\toutside"));
    let si: f64 = text.lines().find_map(|l| l.strip_prefix("si_outside\t")).unwrap().parse().unwrap();
    assert!((si - 0.150).abs() < 0.005);
}

#[test]
fn counts_prints_triples() {
    let o = scalesi(&["counts", "--taxa", "6", "--target", "edge", "--mode", "inside"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().nth(1), Some("6\tedge\tinside\t25\t3\t22"));
    let o = scalesi(&["counts", "--taxa", "4", "--target", "edge", "--mode", "outside"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().nth(1), Some("4\tedge\toutside\t3\t2\t1"));
    let o = scalesi(&["counts", "--taxa", "6"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 5);
}

#[test]
fn simulate_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.toml");
    fs::write(
        &cfg,
        "region = \"half_space\"\ndim = 2\nmu = [0.0, 0.0]\nobservation = [0.0, 1.0]\nreplicates = 1000\ntrials = 40\nseed = 4\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = scalesi(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("report.tsv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("au\t40\t"));
    assert_eq!(fs::read_to_string(out.join("trials.tsv")).unwrap().lines().count(), 41);
    assert!(out.join("geometry.tsv").exists());

    fs::write(&cfg, "region = \"cube\"\nreplicates = 1000\ntrials = 4\n").unwrap();
    let out2 = tmp.path().join("out2");
    let o = scalesi(&["simulate", "--config", s(&cfg), "--out", s(&out2)]);
    assert_eq!(code(&o), 5);
    assert!(!out2.exists());
}

#[test]
fn modelmap_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 30;
    let mut text = format!("{n} 4\n");
    for i in 0..n {
        let x = i as f64;
        text.push_str(&format!(
            "{} {} {} {}\n",
            -2.0 - 0.1 * (x * 0.7).sin(),
            -2.0 - 0.1 * (x * 1.3).cos(),
            -2.1 + 0.05 * (x * 0.3).sin(),
            -2.05 - 0.02 * x.sin()
        ));
    }
    let input = tmp.path().join("xi.txt");
    fs::write(&input, text).unwrap();
    let out = tmp.path().join("map");
    let o = scalesi(&["modelmap", "--input", s(&input), "--rank", "3", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trees = fs::read_to_string(out.join("trees.csv")).unwrap();
    assert!(trees.starts_with("tree,x,y\n"));
    assert!(trees.contains("full_model"));
    assert_eq!(fs::read_to_string(out.join("sites.csv")).unwrap().lines().count(), n + 1);
    assert!(fs::read_to_string(out.join("map.svg")).unwrap().contains("viewBox=\"0 0 800 800\""));

    let out2 = tmp.path().join("map2");
    let o = scalesi(&["modelmap", "--input", s(&input), "--center", "column:4", "--rank", "2", "--out", s(&out2)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out2.join("trees.csv")).unwrap().lines().count(), 1 + 3 + 1);
}
