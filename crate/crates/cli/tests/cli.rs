use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const PROGRAM: &str = "\
fn main(x: int, y: int) {
  let r = 0;
  if (x > 0 && y > 0) {
    r = x * y;
  } else {
    r = x + y;
  }
  let k = 0;
  while (k < 3) {
    k = k + 1;
  }
  print(r + k);
}
";

/// Line 6 should read `r = x + y`.
const FAULTY: &str = "\
fn main(x: int, y: int) {
  let r = 0;
  if (x > 0 && y > 0) {
    r = x * y;
  } else {
    r = x - y;
  }
  let k = 0;
  while (k < 3) {
    k = k + 1;
  }
  print(r + k);
}
";

/// Expected outputs of the correct program.
fn suite() -> String {
    let mut tests = Vec::new();
    for x in -4..4i64 {
        for y in -3..3i64 {
            let r = if x > 0 && y > 0 { x * y } else { x + y };
            tests.push(format!(r#"{{"id":"t{x}_{y}","args":[{x},{y}],"expected_stdout":"{}\n"}}"#, r + 3));
        }
    }
    format!(r#"{{"tests":[{}]}}"#, tests.join(","))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-fl"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.mil"), FAULTY).unwrap();
    fs::write(dir.path().join("suite.json"), suite()).unwrap();
    dir
}

#[test]
fn transform_writes_program_and_predicate_table() {
    let dir = workspace();
    stdout(&run(&["transform", "p.mil", "-o", "out"], dir.path()));
    let t = fs::read_to_string(dir.path().join("out/transformed.mil")).unwrap();
    assert!(t.contains("P1_0"), "{t}");
    let preds: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/predicates.json")).unwrap()).unwrap();
    assert!(preds.to_string().contains("P1_1"));
}

#[test]
fn localize_prints_ranking_csv() {
    let dir = workspace();
    let out = stdout(&run(&["localize", "p.mil", "--suite", "suite.json", "--n-trees", "50"], dir.path()));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("technique,line,kind,score,site_ids"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[0] == "unival" && r.len() == 5));
    let scores: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn stored_profiles_give_the_same_ranking() {
    let dir = workspace();
    let d = dir.path();
    stdout(&run(&["instrument", "p.mil", "-o", "inst"], d));
    stdout(&run(&["profile", "p.mil", "--suite", "suite.json", "-o", "prof.jsonl"], d));
    for technique in ["unival", "ochiai,dstar,baah,esp"] {
        let direct = stdout(&run(
            &["localize", "p.mil", "--suite", "suite.json", "--technique", technique, "--n-trees", "50"],
            d,
        ));
        let stored = stdout(&run(
            &[
                "localize",
                "--from-profiles",
                "prof.jsonl",
                "--sites",
                "inst/sites.json",
                "--technique",
                technique,
                "--n-trees",
                "50",
            ],
            d,
        ));
        assert_eq!(direct, stored, "{technique}");
    }
}

#[test]
fn baseline_includes_predicate_switching_when_the_program_is_given() {
    let dir = workspace();
    let out = stdout(&run(&["baseline", "p.mil", "--suite", "suite.json"], dir.path()));
    for t in ["ochiai", "dstar", "baah", "esp", "predswitch"] {
        assert!(out.lines().any(|l| l.starts_with(&format!("{t},"))), "{t} missing");
    }
    assert!(!out.contains("unival,"));
}

#[test]
fn missing_suite_file_exits_2_and_names_it() {
    let dir = workspace();
    let o = run(&["localize", "p.mil", "--suite", "nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn parse_errors_exit_2_with_a_line_number() {
    let dir = workspace();
    fs::write(dir.path().join("bad.mil"), "fn main() {\n  x = ;\n}\n").unwrap();
    let o = run(&["transform", "bad.mil"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = workspace();
    for args in [
        &["localize", "p.mil"][..],
        &["localize", "--from-profiles", "x.jsonl"],
        &["frobnicate"],
        &["localize", "p.mil", "--suite", "suite.json", "--technique", "magic"],
    ] {
        let o = run(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn seeded_faults_feed_an_evaluation() {
    let dir = workspace();
    let d = dir.path();
    let prog = d.join("corpus/demo");
    fs::create_dir_all(&prog).unwrap();
    fs::write(prog.join("program.mil"), PROGRAM).unwrap();
    fs::write(prog.join("suite.json"), suite()).unwrap();

    let listing = stdout(&run(
        &[
            "seed-faults",
            "corpus/demo/program.mil",
            "--suite",
            "corpus/demo/suite.json",
            "--operators",
            "relational-swap,arithmetic-swap",
            "--min-failing",
            "2",
            "--stride",
            "3",
            "-o",
            "corpus/demo/faults",
        ],
        d,
    ));
    let n = listing.lines().count();
    assert!(n >= 2, "{listing}");
    assert_eq!(fs::read_dir(prog.join("faults")).unwrap().count(), 2 * n);

    stdout(&run(
        &[
            "evaluate",
            "corpus",
            "--technique",
            "unival,ochiai",
            "--repetitions",
            "2",
            "--n-trees",
            "50",
            "-o",
            "report",
        ],
        d,
    ));
    let md = fs::read_to_string(d.join("report/report.md")).unwrap();
    assert!(md.contains("mean EXAM"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("report/report.json")).unwrap()).unwrap();
    assert_eq!(json["versions"].as_array().unwrap().len(), n);
    let csv = fs::read_to_string(d.join("report/scatter.csv")).unwrap();
    assert!(csv.starts_with("version,site,imbalance_raw,imbalance_std,exam_unival,exam_ochiai"));
}

#[test]
fn dump_model_writes_one_forest_per_modelled_site() {
    let dir = workspace();
    let d = dir.path();
    stdout(&run(
        &["localize", "p.mil", "--suite", "suite.json", "--n-trees", "5", "--dump-model", "models"],
        d,
    ));
    let files: Vec<_> = fs::read_dir(d.join("models")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!files.is_empty());
    for f in files {
        let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(&f).unwrap()).unwrap();
        assert!(j.is_object(), "{}", f.display());
    }
}
