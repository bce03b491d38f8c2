use std::collections::BTreeSet;
use std::io::Cursor;
use std::process::{Command, Stdio};

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str], input: &str) -> Outcome {
    let mut argv = vec!["links"];
    argv.extend_from_slice(args);
    let mut stdin = Cursor::new(input.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = links::cli::run(argv, &mut stdin, &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn generate(args: &[&str]) -> String {
    let o = run(&[&["generate"], args].concat(), "");
    assert_eq!(o.code, 0, "{}", o.err);
    o.out
}

const ORTHOGONAL: &str = r#"{"id":"a","vec":[1,0,0]}
{"id":"b","vec":[0,1,0]}
{"id":"c","vec":[0,0,1]}
"#;

#[test]
fn orthogonal_vectors_give_ids_0_1_2() {
    let o = run(
        &["cluster", "--ts", "0.9", "--tc", "0.9", "--tp", "0.95"],
        ORTHOGONAL,
    );
    assert_eq!(o.code, 0);
    assert_eq!(
        o.out,
        "{\"id\":\"a\",\"cluster\":0,\"action\":\"new_subcluster_new_cluster\"}\n\
         {\"id\":\"b\",\"cluster\":1,\"action\":\"new_subcluster_new_cluster\"}\n\
         {\"id\":\"c\",\"cluster\":2,\"action\":\"new_subcluster_new_cluster\"}\n"
    );
}

#[test]
fn csv_in_csv_out_with_running_index() {
    let o = run(&["cluster", "--format", "csv"], ",,1,0,0\nx,,0.99,0.1,0\n");
    assert_eq!(o.code, 0, "{}", o.err);
    assert_eq!(
        o.out,
        "0,0,new_subcluster_new_cluster\nx,0,joined_subcluster\n"
    );
}

#[test]
fn empty_input_is_fine() {
    let o = run(&["cluster"], "");
    assert_eq!((o.code, o.out.as_str()), (0, ""));
    let o = run(&["cluster"], "# only a comment\n\n");
    assert_eq!((o.code, o.out.as_str()), (0, ""));
}

#[test]
fn malformed_lines_are_skipped_or_fatal() {
    let input = "{\"vec\":[1,0,0]}\nnot json\n{\"vec\":[1,0]}\n{\"vec\":[0,1,0]}\n";
    let o = run(&["cluster"], input);
    assert_eq!(o.code, 0);
    assert_eq!(o.out.lines().count(), 2);
    assert!(o.err.contains("line 2"), "{}", o.err);
    assert!(o.err.contains("line 3"), "{}", o.err);
    assert!(o.err.contains("skipped 2"), "{}", o.err);
    // The running index counts accepted records only.
    assert!(o.out.lines().nth(1).unwrap().starts_with("{\"id\":\"1\""));

    let o = run(&["cluster", "--strict"], input);
    assert_eq!(o.code, 2);
    assert_eq!(o.out.lines().count(), 1);
    assert!(o.err.contains("line 2"));

    let o = run(&["cluster", "--strict"], "{\"vec\":[2,0,0]}\n");
    assert_eq!(o.code, 2, "strict mode rejects non-unit vectors");
    let o = run(&["cluster", "--dim", "4"], "{\"vec\":[1,0,0]}\n");
    assert_eq!(o.code, 0);
    assert!(o.err.contains("expected dimension 4"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[], "").code, 1);
    assert_eq!(run(&["frobnicate"], "").code, 1);
    assert_eq!(run(&["cluster", "--tc", "abc"], "").code, 1);
    let o = run(&["cluster", "--tc", "0.8", "--tp", "0.5"], ORTHOGONAL);
    assert_eq!(o.code, 1);
    assert!(o.err.contains("t_p"), "{}", o.err);
    assert_eq!(run(&["--help"], "").code, 0);
    assert_eq!(run(&["--version"], "").code, 0);
    assert_eq!(run(&["generate", "--sigma", "-1"], "").code, 1);
}

#[test]
fn generate_counts_and_reproducibility() {
    let one = generate(&["--clusters", "1", "--points", "5", "--dim", "8"]);
    let mut lines = one.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# links generate dim=8 sigma=0.05 clusters=1 points=5 seed=0"));
    let records: Vec<&str> = lines.collect();
    assert_eq!(records.len(), 5);
    assert!(records.iter().all(|l| l.ends_with("\"label\":\"0\"}")));

    let big = generate(&["--seed", "9"]);
    assert_eq!(big, generate(&["--seed", "9"]));
    assert_ne!(big, generate(&["--seed", "10"]));
    let records: Vec<&str> = big.lines().skip(1).collect();
    assert_eq!(records.len(), 1000);
    let labels: BTreeSet<String> = records
        .iter()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["label"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(labels.len(), 20);

    let csv = generate(&[
        "--clusters",
        "2",
        "--points",
        "3",
        "--dim",
        "4",
        "--format",
        "csv",
    ]);
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 6);
}

#[test]
fn separation_flag_reports_failure_for_uniform_centres() {
    let o = run(
        &[
            "generate",
            "--min-separation",
            "3",
            "--max-attempts",
            "3",
            "--points",
            "1",
        ],
        "",
    );
    assert_eq!(o.code, 1);
    let o = run(
        &[
            "generate",
            "--min-separation",
            "3",
            "--layout",
            "simplex",
            "--points",
            "1",
        ],
        "",
    );
    assert_eq!(o.code, 0, "{}", o.err);
}

fn field(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .parse()
        .unwrap()
}

#[test]
fn evaluate_reports_accuracy() {
    let data = generate(&["--layout", "simplex", "--seed", "3"]);
    let matched = run(&["evaluate"], &data);
    assert_eq!(matched.code, 0, "{}", matched.err);
    let acc = field(&matched.out, "accuracy");
    assert!(acc >= 0.95, "{}", matched.out);
    assert_eq!(field(&matched.out, "records"), 1000.0);
    assert_eq!(field(&matched.out, "true_clusters"), 20.0);

    let absurd = run(
        &[
            "evaluate", "--ts", "0.999", "--tc", "0.999", "--tp", "0.999",
        ],
        &data,
    );
    assert_eq!(absurd.code, 0, "{}", absurd.err);
    assert!(field(&absurd.out, "accuracy") < acc);

    let one = run(&["evaluate"], "{\"vec\":[1,0,0],\"label\":\"z\"}\n");
    assert_eq!(field(&one.out, "accuracy"), 1.0);

    let unlabeled = run(&["evaluate"], ORTHOGONAL);
    assert_eq!(unlabeled.code, 2);
    assert!(unlabeled.err.contains("no label"));
    assert_eq!(run(&["evaluate"], "").code, 2);
}

#[test]
fn tune_writes_a_full_table() {
    let data = generate(&[
        "--layout",
        "simplex",
        "--clusters",
        "6",
        "--points",
        "20",
        "--seed",
        "4",
    ]);
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let args = [
        "tune",
        "--tc-grid",
        "0.8,0.86,0.9",
        "--ts-grid",
        "0.5,0.6,0.9",
        "--tp-grid",
        "0.9,0.95,0.99",
        "--table",
        table.to_str().unwrap(),
    ];
    let o = run(&args, &data);
    assert_eq!(o.code, 0, "{}", o.err);
    let written = std::fs::read_to_string(&table).unwrap();
    let mut lines = written.lines();
    assert_eq!(lines.next().unwrap(), "T_c,T_s,T_p,accuracy,clusters_found");
    assert_eq!(lines.count(), 27);
    let marked: Vec<&str> = o.out.lines().filter(|l| l.ends_with(",*")).collect();
    assert_eq!(marked.len(), 1);
    assert!(o.out.contains("best: T_c="));

    let again = run(&args, &data);
    assert_eq!(again.out, o.out);
    assert_eq!(std::fs::read_to_string(&table).unwrap(), written);

    let single = run(&["tune", "--tc-grid", "0.86", "--ts-grid", "0.6"], &data);
    assert_eq!(single.code, 0);
    assert_eq!(single.out.lines().count(), 3);
}

#[test]
fn snapshot_resume_concatenates_to_the_full_run() {
    let data = generate(&[
        "--dim",
        "32",
        "--sigma",
        "0.1",
        "--clusters",
        "5",
        "--points",
        "40",
        "--seed",
        "2",
    ]);
    let records: Vec<&str> = data.lines().skip(1).collect();
    let (head, tail) = records.split_at(130);
    let join = |r: &[&str]| r.iter().map(|l| format!("{l}\n")).collect::<String>();
    let flags = ["--tc", "0.8", "--ts", "0.8", "--tp", "0.9", "--seed", "7"];

    let full = run(&[&["cluster"], &flags[..]].concat(), &data);
    assert_eq!(full.code, 0);

    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("state.json");
    let snap_s = snap.to_str().unwrap();
    let first = run(
        &[&["cluster", "--snapshot-out", snap_s], &flags[..]].concat(),
        &join(head),
    );
    assert_eq!(first.code, 0);
    let second = run(&["cluster", "--snapshot-in", snap_s], &join(tail));
    assert_eq!(second.code, 0, "{}", second.err);
    assert_eq!(format!("{}{}", first.out, second.out), full.out);

    // Explicit flags must agree with the snapshot.
    let clash = run(
        &["cluster", "--snapshot-in", snap_s, "--tc", "0.5"],
        &join(tail),
    );
    assert_eq!(clash.code, 1);
    let agree = run(
        &["cluster", "--snapshot-in", snap_s, "--tc", "0.8"],
        &join(tail),
    );
    assert_eq!(agree.out, second.out);

    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&snap).unwrap()).unwrap();
    assert_eq!(state["format"], "links-snapshot");
    assert_eq!(state["seed"], 7);
    assert_eq!(state["ingested_count"], 130);

    std::fs::write(&snap, "{ broken").unwrap();
    assert_eq!(run(&["cluster", "--snapshot-in", snap_s], "").code, 2);
    assert_eq!(
        run(&["cluster", "--snapshot-in", "/nonexistent/x.json"], "").code,
        2
    );
}

#[test]
fn binary_streams_and_is_deterministic() {
    let data = generate(&["--dim", "16", "--clusters", "3", "--points", "10"]);
    let exe = env!("CARGO_BIN_EXE_links");
    let go = || {
        let mut child = Command::new(exe)
            .arg("cluster")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        std::io::Write::write_all(child.stdin.as_mut().unwrap(), data.as_bytes()).unwrap();
        drop(child.stdin.take());
        let out = child.wait_with_output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let a = go();
    assert_eq!(a, go());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 30);
    let status = Command::new(exe)
        .arg("bogus")
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
