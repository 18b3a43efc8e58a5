use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use relay_dmt::config::{parse_config, parse_config_for, Mode, OutputFormat};
use relay_dmt::run::{execute, extract_metadata, render};
use relay_dmt::{ListenRule, Protocol};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-dmt"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn jobs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../jobs")
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(args: &[&str]) -> String {
    String::from_utf8(run(args).stdout).unwrap()
}

fn write_job(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("job.toml");
    fs::write(&path, text).unwrap();
    path
}

fn fails_with(args: &[&str], needle: &str) {
    let out = bin().args(args).output().unwrap();
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(needle), "stderr lacks `{needle}`: {err}");
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Line-by-line match; numeric cells agree to 1e-9 relative, everything else exactly.
fn assert_csv_matches(got: &str, want: &str) {
    let (g, w): (Vec<&str>, Vec<&str>) = (got.lines().collect(), want.lines().collect());
    assert_eq!(g.len(), w.len(), "line count differs:\n{got}");
    for (gl, wl) in g.iter().zip(&w) {
        let (gc, wc): (Vec<&str>, Vec<&str>) = (gl.split(',').collect(), wl.split(',').collect());
        assert_eq!(gc.len(), wc.len(), "`{gl}` vs `{wl}`");
        for (a, b) in gc.iter().zip(&wc) {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!(close(x, y), "`{gl}` vs `{wl}`"),
                _ => assert_eq!(a, b, "`{gl}` vs `{wl}`"),
            }
        }
    }
}

fn assert_json_matches(got: &Value, want: &Value) {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            assert!(close(a.as_f64().unwrap(), b.as_f64().unwrap()), "{a} vs {b}")
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len());
            a.iter().zip(b).for_each(|(x, y)| assert_json_matches(x, y));
        }
        (Value::Object(a), Value::Object(b)) => {
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
            a.iter().for_each(|(k, v)| assert_json_matches(v, &b[k]));
        }
        _ => assert_eq!(got, want),
    }
}

#[test]
fn golden_csv_outputs() {
    for (mode, name) in [
        ("analytic", "analytic_111"),
        ("optimize", "optimize_111"),
        ("region", "region_111"),
        ("simulate", "sim_df_121"),
    ] {
        let job = golden(&format!("{name}.toml"));
        let got = stdout(&[mode, "--config", job.to_str().unwrap(), "--no-timestamp"]);
        let want = fs::read_to_string(golden(&format!("{name}.csv"))).unwrap();
        assert_csv_matches(&got, &want);
    }
}

#[test]
fn golden_json_output() {
    let job = golden("sim_df_121.toml");
    let got = stdout(&["simulate", "--config", job.to_str().unwrap(), "--no-timestamp", "--format", "json"]);
    let want = fs::read_to_string(golden("sim_df_121.json")).unwrap();
    assert_json_matches(&serde_json::from_str(&got).unwrap(), &serde_json::from_str(&want).unwrap());
}

#[test]
fn simulate_schema() {
    let want = fs::read_to_string(golden("sim_df_121.csv")).unwrap();
    let body: Vec<&str> = want.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "snr_db,message,trials,failures,p_hat,stderr");
    assert_eq!(body.len(), 1 + 3 * 2 + 1 + 1 + 2);
    assert_eq!(body[7], "");
    assert_eq!(body[8], "message,d_hat,stderr,points_used");
}

#[test]
fn analytic_single_antenna_curve() {
    let job = fs::read_to_string(jobs_dir().join("analytic_111.toml")).unwrap();
    let report = execute(&parse_config(&job).unwrap()).unwrap();
    let curves = report.table("curves").unwrap();
    assert_eq!(curves.column("r").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(curves.column("cf_dmt").unwrap(), vec![1.0, 0.75, 0.5, 0.25, 0.0]);
}

#[test]
fn optimize_single_antenna_curve() {
    let job = fs::read_to_string(jobs_dir().join("optimize_111.toml")).unwrap();
    let report = execute(&parse_config(&job).unwrap()).unwrap();
    let d = report.table("dcf_dmt").unwrap().column("dcf_dmt").unwrap();
    assert_eq!(d[0], 1.0);
    assert!((d[1] - 2.0 / 3.0).abs() <= 0.05);
    assert_eq!(d[2], 0.0);
}

#[test]
fn shipped_jobs_parse() {
    let mut seen = 0;
    for entry in fs::read_dir(jobs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            let c = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let job = golden("sim_df_121.toml");
    let out = dir.path().join("run.csv");
    let outs: Vec<String> = (0..2)
        .map(|_| {
            run(&[
                "simulate",
                "--config",
                job.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--no-timestamp",
            ]);
            fs::read_to_string(&out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);

    let stamped = stdout(&["simulate", "--config", job.to_str().unwrap()]);
    let plain = stdout(&["simulate", "--config", job.to_str().unwrap(), "--no-timestamp"]);
    let differing: Vec<&str> = stamped.lines().filter(|l| !plain.lines().any(|p| p == *l)).collect();
    assert_eq!(differing.len(), 1, "{differing:?}");
    assert!(differing[0].starts_with("# generated_unix_seconds"));
}

#[test]
fn metadata_reproduces_the_run() {
    let job = golden("sim_df_121.toml");
    let text = fs::read_to_string(&job).unwrap();
    for format in ["csv", "json"] {
        let out = stdout(&["simulate", "--config", job.to_str().unwrap(), "--seed", "9", "--format", format]);
        let meta = extract_metadata(&out).unwrap();
        let mut expect = parse_config_for(&text, Mode::Simulate).unwrap();
        expect.plan.as_mut().unwrap().seed = 9;
        expect.output_format = format.parse().unwrap();
        assert_eq!(meta, expect);
        // the recovered job renders the same output
        let again = render(&execute(&meta).unwrap(), &meta, meta.output_format, None);
        let first = render(&execute(&expect).unwrap(), &expect, expect.output_format, None);
        assert_eq!(again, first);
    }
}

#[test]
fn seed_override_changes_counts() {
    let job = golden("sim_df_121.toml");
    let a = stdout(&["simulate", "--config", job.to_str().unwrap(), "--no-timestamp"]);
    let b = stdout(&["simulate", "--config", job.to_str().unwrap(), "--no-timestamp", "--seed", "43"]);
    assert!(b.contains("# seed = 43"));
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
    assert_ne!(body(&a), body(&b));
}

#[test]
fn output_path_from_file_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_file.json");
    let text = fs::read_to_string(golden("region_111.toml")).unwrap()
        + &format!("\n[output]\npath = {:?}\nformat = \"json\"\n", target.to_str().unwrap());
    let job = write_job(dir.path(), &text);
    let out = run(&["region", "--config", job.to_str().unwrap()]);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(doc["tables"]["constraints"].as_array().unwrap().len(), 3);
    assert!(doc["generated_unix_seconds"].is_u64());
    assert_eq!(
        extract_metadata(&fs::read_to_string(&target).unwrap()).unwrap().output_format,
        OutputFormat::Json
    );
}

#[test]
fn rejects_unknown_keys_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        fs::read_to_string(golden("sim_df_121.toml")).unwrap().replace("seed = 42", "seed = 42\ntrails = 5");
    let job = write_job(dir.path(), &text);
    fails_with(&["simulate", "--config", job.to_str().unwrap()], "trails");
}

#[test]
fn rejects_two_way_rate_for_dcf() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("sim_df_121.toml"))
        .unwrap()
        .replace("\"DF\"", "\"DCF\"")
        .replace("r2 = 0.25", "r2 = 0.3");
    let job = write_job(dir.path(), &text);
    fails_with(&["simulate", "--config", job.to_str().unwrap()], "multiplexing.r2");
}

#[test]
fn rejects_bad_invocations() {
    let job = golden("analytic_111.toml");
    fails_with(&["optimize", "--config", job.to_str().unwrap()], "mode");
    fails_with(&["analytic", "--config", "/nonexistent/job.toml"], "/nonexistent/job.toml");
    fails_with(&["analytic", "--config", job.to_str().unwrap(), "--format", "xml"], "xml");

    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("analytic_111.toml")).unwrap().replace("m1 = 1", "m1 = -1");
    let job = write_job(dir.path(), &text);
    fails_with(&["analytic", "--config", job.to_str().unwrap()], "m1");

    let text = fs::read_to_string(golden("analytic_111.toml")).unwrap().replace("stop = 1.0", "stop = 1.5");
    let job = write_job(dir.path(), &text);
    fails_with(&["analytic", "--config", job.to_str().unwrap()], "outside");
}

#[test]
fn fixed_listening_job() {
    let text = fs::read_to_string(jobs_dir().join("dcf_fixed_111.toml")).unwrap();
    let c = parse_config(&text).unwrap();
    assert_eq!(c.protocol, Protocol::Dcf(ListenRule::Fixed(0.5)));
    assert_eq!(c.pair().unwrap().r2, 0.0);
}
