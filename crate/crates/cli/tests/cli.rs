use std::fs;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn list_names_all_seven_experiments() {
    let o = lab(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let ids: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(ids, ["E1", "E2", "E3", "E4", "E5", "E6", "E7"]);
}

#[test]
fn weight_constants() {
    let one = lab(&["weights", "constant", "a1", "--weight", "one", "--grid-N", "512"]);
    assert!(one.status.success());
    assert_eq!(stdout(&one).trim().parse::<f64>().unwrap(), 1.0);

    let apr = lab(&["weights", "constant", "apr", "--weight", "power(1)", "--q", "2", "--grid-N", "1024"]);
    let v: f64 = stdout(&apr).trim().parse().unwrap();
    assert!(v > 1.0 && v < 2.0, "{v}");

    let missing_q = lab(&["weights", "constant", "ap", "--weight", "one"]);
    assert_eq!(missing_q.status.code(), Some(2));
    let bad = lab(&["weights", "constant", "a1", "--weight", "power(-2)"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ops_reads_a_column_and_writes_points() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let n = 256;
    let mut text = String::from("value\n");
    for i in 0..n {
        text.push_str(&format!("{}\n", if (96..160).contains(&i) { 1.0 } else { 0.0 }));
    }
    fs::write(&input, text).unwrap();
    let o = lab(&["ops", "maximal", "--input", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, v) = l.split_once(',').unwrap();
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), n);
    assert_eq!(rows[0].0, -8.0);
    assert_eq!(rows[128].1, 1.0);
    assert!(rows.iter().all(|(_, v)| *v > 0.0 && *v <= 1.0));

    fs::write(&input, "1.0\nnope\n").unwrap();
    assert_eq!(lab(&["ops", "hilbert", "--input", input.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lab(&["ops", "laplace", "--input", input.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_writes_reports_and_maps_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lab.cfg");
    fs::write(
        &config,
        "e7 { p1=2 p2=2 w1=one w2=one family=bumps(3) N=512 seed=1 }\n\
         # |x|^2 is outside the restricted class for p1 = 2\n\
         e1 { p1=2 p2=2 w1=power(2) w2=power(1) family=indicators(3) N=512 seed=1 }\n",
    )
    .unwrap();
    let out = dir.path().join("e7");
    let ok = lab(&["run", "E7", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let rows = fs::read_to_string(out.join("rows.csv")).unwrap();
    assert!(rows.starts_with("case_id,lhs,rhs,ratio,"));
    assert_eq!(rows.lines().count(), 4);
    assert!(out.join("summary.json").exists());
    assert!(out.join("plots").join("ratio_by_case.svg").exists());

    let vacuous = lab(&["run", "e1", "--config", config.to_str().unwrap(), "--out", dir.path().join("e1").to_str().unwrap()]);
    assert_eq!(vacuous.status.code(), Some(3), "{}", String::from_utf8_lossy(&vacuous.stderr));

    let absent = lab(&["run", "e4", "--config", config.to_str().unwrap(), "--out", dir.path().join("e4").to_str().unwrap()]);
    assert_eq!(absent.status.code(), Some(2));
    let unreadable = lab(&["run", "e7", "--config", dir.path().join("nope.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(unreadable.status.code(), Some(1));
}

#[test]
fn seed_override_changes_the_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lab.cfg");
    fs::write(&config, "e2 { p1=2 p2=2 w1=one w2=one family=indicators(4) N=512 seed=1 }").unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = lab(&["run", "e2", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        fs::read(out.join("rows.csv")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "1"));
    assert_ne!(run("a", "1"), run("c", "2"));
}
