use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use robust_elicit::elicit::LookupTable;
use robust_elicit::policy::AlternativesFile;
use robust_elicit::AlternativeSet;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-elicit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn toy_alternatives(dir: &Path) -> PathBuf {
    let set = AlternativeSet::from_features(vec![
        vec![0.9, 0.1],
        vec![0.2, 0.8],
        vec![0.5, 0.5],
        vec![0.7, 0.4],
    ])
    .unwrap();
    let path = dir.join("toy.json");
    AlternativesFile::from_alternatives(&set).save(&path).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["analyze", "--bogus"])), 2);
    assert_eq!(code(&run(&["lookup", "build", "--K", "3"])), 2);
    assert_eq!(code(&run(&["selftest", "--suite", "nope"])), 2);
    let o = run(&["policies", "generate", "--arrivals", "a.csv"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["policies", "lookup", "serve", "experiment", "analyze", "selftest"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
    }
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn generate_twenty_five_policies() {
    let o = run(&["policies", "generate", "--seed", "7", "--count", "25"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let rows = v["features"].as_array().unwrap();
    assert_eq!(rows.len(), 25);
    for row in rows {
        let row = row.as_array().unwrap();
        assert_eq!(row.len(), 16);
        assert!(row.iter().all(|x| (0.0..=1.0).contains(&x.as_f64().unwrap())));
    }
    assert_eq!(v["feature_names"].as_array().unwrap().len(), 16);
    assert!(!stderr(&o).contains("seed:"));
}

#[test]
fn generate_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = run(&["policies", "generate", "--seed", "3", "--count", "4", "--out", p(&a)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("4 alternatives x 16 features"));
    let o = run(&[
        "--json", "policies", "generate", "--seed", "3", "--count", "4", "--out", p(&b), "--sequential",
    ]);
    assert_eq!(json(&o)["alternatives"], 4);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let loaded = AlternativesFile::load(&a).unwrap();
    assert_eq!(loaded.to_alternative_set().unwrap().len(), 4);
}

#[test]
fn missing_seed_is_announced() {
    let o = run(&["policies", "generate", "--count", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stderr(&o).lines().find(|l| l.starts_with("seed: ")).unwrap().to_string();
    let seed = line.trim_start_matches("seed: ");
    let again = run(&["policies", "generate", "--count", "2", "--seed", seed]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn scenario_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let arrivals = dir.path().join("arrivals.csv");
    let ages = dir.path().join("ages.csv");
    let mut text = String::from("date,count\n");
    for d in 1..=20 {
        text.push_str(&format!("2020-04-{d:02},{}\n", 2 + d % 5));
    }
    std::fs::write(&arrivals, text).unwrap();
    std::fs::write(
        &ages,
        "bin,proportion,survival-rate\n18-29,0.1,0.9\n30-39,0.1,0.85\n40-49,0.2,0.7\n50-59,0.2,0.6\n60-69,0.2,0.45\n70+,0.2,0.3\n",
    )
    .unwrap();
    let o = run(&["policies", "generate", "--seed", "1", "--count", "3", "--arrivals", p(&arrivals), "--ages", p(&ages)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["features"].as_array().unwrap().len(), 3);

    std::fs::write(&ages, "bin,proportion,survival-rate\n0-19,2.0,0.95\n").unwrap();
    let o = run(&["policies", "generate", "--seed", "1", "--count", "3", "--arrivals", p(&arrivals), "--ages", p(&ages)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn lookup_build_counts_entries() {
    let dir = tempfile::tempdir().unwrap();
    let alts = toy_alternatives(dir.path());
    let out = dir.path().join("table.json");
    let o = run(&["lookup", "build", "--alternatives", p(&alts), "--K", "3", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(LookupTable::load(&out).unwrap().len(), 1 + 3 + 9);
    let progress: Vec<_> = stderr(&o).lines().filter(|l| l.starts_with("lookup: ")).map(String::from).collect();
    assert_eq!(progress, ["lookup: 1/13 entries", "lookup: 4/13 entries", "lookup: 13/13 entries"]);

    let o = run(&[
        "--json", "lookup", "build", "--alternatives", p(&alts), "--K", "3", "--depth", "2", "--out", p(&out),
    ]);
    assert_eq!(json(&o)["entries"], 4);
    assert_eq!(LookupTable::load(&out).unwrap().len(), 4);
}

#[test]
fn lookup_build_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let alts = toy_alternatives(dir.path());
    let out = dir.path().join("t.json");
    let missing = dir.path().join("missing.json");
    let o = run(&["lookup", "build", "--alternatives", p(&missing), "--K", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).starts_with("error: "));
    let o = run(&["lookup", "build", "--alternatives", p(&alts), "--K", "2", "--sigma=-1", "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    let o = run(&["lookup", "build", "--alternatives", p(&alts), "--K", "2", "--depth", "3", "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    std::fs::write(&missing, "{not json").unwrap();
    let o = run(&["lookup", "build", "--alternatives", p(&missing), "--K", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn analyze_bundled_export() {
    let o = run(&["analyze"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("200 read, 193 kept, 6 removed, 1 rejected"), "{text}");
    for needle in ["  94  ", "  61  ", "  22  ", "  16  ", "margin 21.3%", "6.6065", "df 1"] {
        assert!(text.contains(needle), "{needle} missing:\n{text}");
    }

    let v = json(&run(&["--json", "analyze"]));
    let counts = &v["summary"]["counts"];
    assert_eq!(counts["prefers_robust"], 94);
    assert_eq!(counts["prefers_random"], 61);
    assert_eq!(counts["indifferent_different"], 22);
    assert_eq!(counts["indifferent_same"], 16);
    let chi = v["strict"]["chi_square"]["statistic"].as_f64().unwrap();
    assert!((chi - 6.61).abs() < 0.01);
}

#[test]
fn analyze_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("export.jsonl");
    let out = dir.path().join("report.json");
    let bundled = robust_elicit::analysis::fixture::BUNDLED_EXPORT;
    std::fs::write(&input, format!("{bundled}this is not json\n")).unwrap();
    let o = run(&["analyze", "--input", p(&input), "--strict", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let errors = report["clean"]["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 2);
    assert_eq!(errors[0]["line"], 201);

    std::fs::write(&input, "garbage\n").unwrap();
    assert_eq!(code(&run(&["analyze", "--input", p(&input)])), 3);
    std::fs::write(&input, "").unwrap();
    assert_eq!(code(&run(&["analyze", "--input", p(&input)])), 3);
    assert_eq!(code(&run(&["analyze", "--input", p(&dir.path().join("none.jsonl"))])), 3);
}

#[test]
fn experiment_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let csv = dir.path().join("agents.csv");
    let args = [
        "experiment", "run", "--I", "4", "--J", "2", "--K", "2", "--agents", "6", "--seed", "11",
    ];
    let mut first: Vec<&str> = args.to_vec();
    first.extend(["--out", p(&report), "--csv", p(&csv)]);
    let o = run(&first);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("agents: 6 (I=4, J=2, K=2, seed 11)"));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(saved["summary"]["agents"].as_array().unwrap().len(), 6);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);

    let mut json_args = vec!["--json"];
    json_args.extend(args);
    let a = json(&run(&json_args));
    json_args.push("--sequential");
    let b = json(&run(&json_args));
    assert_eq!(a, b);
    assert_eq!(a, saved);
}

#[test]
fn experiment_on_generated_policies() {
    let dir = tempfile::tempdir().unwrap();
    let alts = dir.path().join("alts.json");
    let o = run(&["policies", "generate", "--seed", "5", "--count", "5", "--out", p(&alts)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "--json", "experiment", "run", "--alternatives", p(&alts), "--K", "2", "--agents", "3", "--seed", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["I"], 5);
    assert_eq!(v["J"], 16);
}

#[test]
fn selftest_suites() {
    let o = run(&["selftest", "--suite", "gamma_schedule", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS gamma_schedule"));
    let v = json(&run(&["--json", "selftest", "--suite", "simplex_recommendation", "--seed", "4"]));
    assert_eq!(v["suites"][0]["passed"], true);
    assert_eq!(v["seed"], 4);
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("service.json");
    assert_eq!(code(&run(&["serve", "--config", p(&config)])), 3);
    std::fs::write(&config, r#"{"alternatives": "missing.json"}"#).unwrap();
    assert_eq!(code(&run(&["serve", "--config", p(&config)])), 3);
    std::fs::write(&config, r#"{"alternatives": "toy.json", "K": 0}"#).unwrap();
    toy_alternatives(dir.path());
    assert_eq!(code(&run(&["serve", "--config", p(&config)])), 3);

    let table = dir.path().join("table.json");
    let o = run(&["lookup", "build", "--alternatives", p(&dir.path().join("toy.json")), "--K", "2", "--out", p(&table)]);
    assert_eq!(code(&o), 0);
    std::fs::write(&config, r#"{"alternatives": "toy.json", "lookup_table": "table.json", "K": 3}"#).unwrap();
    let o = run(&["serve", "--config", p(&config)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("lookup table has K=2"), "{}", stderr(&o));
}

fn get(addr: &str, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(addr).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").ok()?;
    let mut text = String::new();
    stream.read_to_string(&mut text).ok()?;
    Some(text)
}

#[test]
fn serve_answers_health_checks() {
    let dir = tempfile::tempdir().unwrap();
    toy_alternatives(dir.path());
    let config = dir.path().join("service.json");
    std::fs::write(&config, r#"{"alternatives": "toy.json", "K": 2, "seed": 9}"#).unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = bin()
        .args(["serve", "--config", p(&config), "--bind", &addr])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut reply = None;
    while Instant::now() < deadline {
        if let Some(text) = get(&addr, "/healthz") {
            reply = Some(text);
            break;
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    let _ = child.kill();
    let _ = child.wait();
    let text = reply.expect("service never answered");
    assert!(text.starts_with("HTTP/1.1 200"), "{text}");
    assert!(text.contains(r#""status":"ok""#), "{text}");
    assert!(text.contains(r#""K":2"#), "{text}");
}
