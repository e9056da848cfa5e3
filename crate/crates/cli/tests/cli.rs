use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

const SYNTH: &str = "[data.synthetic]\nn_samples = 600\nsignal_weights = [2.0, 1.0, 0.5, 0.25]\nnoise_features = 2\n";
const FAST_RANK: &str = "[rank]\nn_permute = 4\nn_permute_multipass = 2\nshap_samples = 10\nsage_samples = 32\n\
                         lime_perturb = 100\nmax_instances = 10\nn_background = 10\n";

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn featrank(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featrank"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_method_exits_with_2_and_lists_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("seed = 1\n{SYNTH}[rank]\nmethods = [\"bsp\", \"magic\"]\n"));
    let o = featrank(&["rank"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("magic") && msg.contains("bsp, bmp, fsp, fmp"), "{msg}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), SYNTH);
    let o = featrank(&["rank"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));

    let cfg = write_config(dir.path(), &format!("seed = 1\n{SYNTH}[rank]\nmetric = \"accuracy\"\n"));
    let o = featrank(&["rank"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    // --seed stands in for a missing seed
    let cfg = write_config(dir.path(), SYNTH);
    let o = featrank(&["synth", "--seed", "3"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn runtime_failure_exits_with_1_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "a,b,target\n1,2,0\n2,3,0\n3,1,0\n4,4,0\n").unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[data]\ncsv = \"d.csv\"\n");
    let out = dir.path().join("out");
    let o = featrank(&["complexity"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn rank_is_reproducible_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("seed = 11\n{SYNTH}{FAST_RANK}ratio_methods = [\"bsp\", \"shap\", \"lime\"]\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b, &a] {
        let o = featrank(&["rank"], &cfg, out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["rank.json", "scorecards.csv", "aggregated.csv", "rank.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // resolved configs differ only in where they were written
    let without_out = |d: &Path| -> Vec<String> {
        let text = std::fs::read_to_string(d.join("resolved_config.toml")).unwrap();
        text.lines().filter(|l| !l.starts_with("out = ")).map(str::to_owned).collect()
    };
    assert_eq!(without_out(&a), without_out(&b));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("rank.json")).unwrap()).unwrap();
    let agg = &report["aggregated"];
    assert_eq!(agg["methods"].as_array().unwrap().len(), 9);
    assert!(agg["rank_sets"].as_array().unwrap().iter().all(|r| r.as_array().unwrap().len() == 9));
    assert!(report["uncertainty_ratio"].is_number());

    // the resolved config reproduces the run on its own
    let resolved = a.join("resolved_config.toml");
    let c = dir.path().join("c");
    assert!(featrank(&["rank"], &resolved, &c).status.success());
    assert_eq!(std::fs::read(a.join("rank.json")).unwrap(), std::fs::read(c.join("rank.json")).unwrap());
}

#[test]
fn identical_methods_have_zero_uncertainty() {
    let dir = tempfile::tempdir().unwrap();
    // two deterministic methods that always agree on a logistic model
    let cfg = write_config(dir.path(), &format!("seed = 2\n{SYNTH}[rank]\nmethods = [\"coefficients\", \"ale_variance\"]\ntop_k = 2\n"));
    let out = dir.path().join("out");
    assert!(featrank(&["rank"], &cfg, &out).status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("rank.json")).unwrap()).unwrap();
    assert_eq!(report["rank_uncertainty"].as_f64(), Some(0.0));
}

#[test]
fn select_without_reduction_drops_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("seed = 3\n{SYNTH}[select]\nn_boot = 50\nwith_complexity = false\n"));
    let out = dir.path().join("out");
    let o = featrank(&["select", "--format", "json"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("select.json")).unwrap()).unwrap();
    assert_eq!(report["n_dropped"], 0);
    let ci = report["report"]["comparison"]["naupdc_diff_ci"].as_array().unwrap();
    assert_eq!((ci[0].as_f64(), ci[1].as_f64()), (Some(0.0), Some(0.0)));
    assert!(!out.join("select.csv").exists() && !out.join("select.svg").exists());
}

#[test]
fn faithfulness_on_small_benchmark_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("seed = 4\n{SYNTH}{FAST_RANK}[faithfulness]\nn_subsets = 50\nn_boot = 20\n"));
    let out = dir.path().join("out");
    let t = Instant::now();
    let o = featrank(&["faithfulness"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t.elapsed().as_secs() < 60);
    for f in ["faithfulness.json", "records.csv", "fit_stats.csv", "pareto.csv", "faithfulness.svg", "pareto.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 51);
}

#[test]
fn synth_then_csv_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("seed = 5\n{SYNTH}"));
    let gen = dir.path().join("gen");
    assert!(featrank(&["synth"], &cfg, &gen).status.success());
    let truth: serde_json::Value = serde_json::from_slice(&std::fs::read(gen.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["weights"].as_array().unwrap().len(), 6);

    let csv_cfg = dir.path().join("csv.toml");
    std::fs::write(
        &csv_cfg,
        format!("seed = 5\n[data]\ncsv = \"gen/synthetic.csv\"\n[model]\nkind = \"forest\"\nn_trees = 10\nmax_depth = 4\n{FAST_RANK}\n[curves]\nn_boot = 50\n"),
    )
    .unwrap();
    let out = dir.path().join("curves");
    let o = featrank(&["curves"], &csv_cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("curves.json")).unwrap()).unwrap();
    // eight agnostic methods plus gini and tree_interpreter
    assert_eq!(report["top_bottom"].as_array().unwrap().len(), 10);
    assert!(out.join("incremental.svg").exists() && out.join("topk.svg").exists());
}
