use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hypergrad_cli::gradcheck::TOLERANCE;
use hypergrad_cli::run::RunSummary;
use hypergrad_cli::{gradcheck, parse_config};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypergrad"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(config: &Path, out: &Path) -> Output {
    bin().args(["run", "--config"]).arg(config).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn toy_text() -> String {
    std::fs::read_to_string(configs().join("toy_k1.json")).unwrap()
}

/// Trace with the wallclock_s column removed.
fn trace_without_wallclock(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n")
}

fn summary(dir: &Path) -> RunSummary {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn toy_run_writes_files_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("toy_k1.json");
    for name in ["a", "b"] {
        let out = run_cli(&cfg, &tmp.path().join(name));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let text = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(text.starts_with("iter,f_value,grad_est_norm,true_grad_norm,bias,cosine,descent_ratio,wallclock_s\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 501);
    assert_eq!(trace_without_wallclock(&a.join("trace.csv")), trace_without_wallclock(&b.join("trace.csv")));
    assert_eq!(summary(&a).without_timing(), summary(&b).without_timing());
}

#[test]
fn absent_diagnostics_are_empty_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let text = toy_text().replace("\"record_full_gradient_every\": 1", "\"record_full_gradient_every\": 3").replace("\"iters\": 500", "\"iters\": 4");
    let out = run_cli(&write_config(tmp.path(), &text), &tmp.path().join("o"));
    assert!(out.status.success());
    let trace = std::fs::read_to_string(tmp.path().join("o/trace.csv")).unwrap();
    let rows: Vec<Vec<&str>> = trace.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!(rows[0][3..7].iter().all(|c| !c.is_empty()));
    assert!(rows[1][3..7].iter().all(|c| c.is_empty()));
    assert!(rows[3][3..7].iter().all(|c| !c.is_empty()));
}

#[test]
fn zero_k_exits_nonzero_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &toy_text().replace("\"K\": 1", "\"K\": 0"));
    let out = run_cli(&cfg, &tmp.path().join("o"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("engine.K"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn unknown_key_exits_nonzero_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &toy_text().replace("\"K\": 1", "\"K\": 1, \"depth\": 3"));
    let out = run_cli(&cfg, &tmp.path().join("o"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("engine") && err.contains("depth"), "{err}");
}

#[test]
fn fmd_over_cap_exits_nonzero_naming_the_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("hypercleaning.json"))
        .unwrap()
        .replace("{\"mode\": \"k_rmd\", \"K\": 5}", "{\"mode\": \"fmd\", \"fmd_cap\": 1000}");
    let out = run_cli(&write_config(tmp.path(), &text), &tmp.path().join("o"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fmd_cap") && err.contains("hyper-iteration 1"), "{err}");
}

#[test]
fn summary_echo_reproduces_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(&configs().join("meta_ridge.json"), &tmp.path().join("a"));
    assert!(out.status.success());
    let first = summary(&tmp.path().join("a"));
    let echoed = serde_json::to_string_pretty(&first.config).unwrap();
    assert_eq!(parse_config(&echoed).unwrap(), first.config);
    let out = run_cli(&write_config(tmp.path(), &echoed), &tmp.path().join("b"));
    assert!(out.status.success());
    assert_eq!(summary(&tmp.path().join("b")).without_timing(), first.without_timing());
}

#[test]
fn sweep_writes_one_row_per_k() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("toy_tilde.json")).unwrap().replace("\"iters\": 2000", "\"iters\": 50");
    let out = bin()
        .args(["sweep-k", "--config"])
        .arg(write_config(tmp.path(), &text))
        .args(["--ks", "1,5,full", "--out"])
        .arg(tmp.path().join("s"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    let ks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["1", "5", "101"]);
    for k in ["1", "5", "101"] {
        assert!(tmp.path().join(format!("s/K_{k}/trace.csv")).exists());
    }
    let peaks: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert_eq!(peaks, [2, 6, 101]);
}

#[test]
fn gradcheck_toy_passes_and_reports_truncation() {
    let out = bin().args(["gradcheck", "--problem", "toy", "--lambda", "1,1", "--horizon", "100"]).output().unwrap();
    assert!(out.status.success());
    let report = gradcheck("toy", Some(&[1.0, 1.0]), Some(100)).unwrap();
    for engine in ["full_rmd", "fmd", "checkpointed_rmd"] {
        assert!(report.row(engine).unwrap().rel_error.unwrap() <= TOLERANCE, "{engine}");
    }
    let k1 = report.row("k_rmd(K=1)").unwrap();
    assert!(!k1.gated && k1.bias.unwrap() > 1.0);
    assert!(report.passed());
}

#[test]
fn gradcheck_counterexample_scalar_rows() {
    for lambda in [-2.0, 0.3, 1.7] {
        let report = gradcheck("counterexample", Some(&[lambda]), Some(20)).unwrap();
        for engine in ["full_rmd", "fmd", "checkpointed_rmd", "k_rmd(K=21)"] {
            let e = report.row(engine).unwrap().rel_error.unwrap();
            assert!(e <= 1e-10, "{engine} at {lambda}: {e}");
        }
    }
}

#[test]
fn gradcheck_unknown_problem_lists_alternatives() {
    let out = bin().args(["gradcheck", "--problem", "cifar"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("toy_tilde") && err.contains("task_interaction"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn schema_lists_every_section() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.schema.json")).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&text).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in ["problem", "engine", "unroll", "outer", "diagnostics", "output"] {
        assert!(props.contains_key(key), "{key}");
    }
    assert_eq!(schema["additionalProperties"], false);
}

#[test]
fn hypercleaning_reads_idx_files() {
    use hypergrad::problems::idx::{write_idx_images, write_idx_labels, IdxImages};
    let tmp = tempfile::tempdir().unwrap();
    let count = 40;
    let labels: Vec<u8> = (0..count).map(|i| (i % 3) as u8).collect();
    let pixels: Vec<u8> = (0..count * 16).map(|j| if (j % 16) / 5 == (j / 16) % 3 { 200 } else { (j * 7 % 50) as u8 }).collect();
    write_idx_images(tmp.path().join("img"), &IdxImages { count, rows: 4, cols: 4, pixels }).unwrap();
    write_idx_labels(tmp.path().join("lab"), &labels).unwrap();
    let text = serde_json::json!({
        "problem": {"name": "hypercleaning", "seed": 1, "parameters": {
            "n_train": 24, "n_val": 16, "corruption_rate": 0.5,
            "idx": {"images": tmp.path().join("img"), "labels": tmp.path().join("lab"), "classes": 3}
        }},
        "engine": {"mode": "k_rmd", "K": 5},
        "unroll": {"T": 20},
        "outer": {"optimizer": "adam", "eta0": 0.1, "schedule": "constant", "iters": 5}
    })
    .to_string();
    let out = hypergrad_cli::execute(&parse_config(&text).unwrap()).unwrap();
    assert_eq!(out.problem.hyper_dim(), 24);
    assert_eq!(out.problem.corruption_mask.as_ref().unwrap().len(), 24);
    assert_eq!(out.summary.final_f1.as_ref().unwrap().len(), 1);

    let short = text.replace("\"n_val\":16", "\"n_val\":17");
    let err = hypergrad_cli::execute(&parse_config(&short).unwrap()).err().unwrap().to_string();
    assert!(err.contains("n_train + n_val"), "{err}");
}
