use std::process::{Command, Output};

fn nulsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nulsched")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn example_reproduces_golden_values() {
    let o = nulsched(&["example"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("T2,0.90,40.00,36.00,0.71,0.26"));
    assert!(text.contains("= 1.68"));
    assert!(text.contains("-> 0.38"));
    assert!(text.contains("-> 0.91"));
    assert!(text.contains("all golden values reproduced"));
}

#[test]
fn worked_example_gantt_has_six_tasks_disjoint_per_core() {
    let o = nulsched(&["run", "--policy", "nul-edf", "--format", "gantt"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("core,task_id,start,end"));
    let rows: Vec<[u64; 4]> = lines
        .map(|l| {
            let v: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .collect();
    let tasks: std::collections::BTreeSet<u64> = rows.iter().map(|r| r[1]).collect();
    assert_eq!(tasks.len(), 6);
    assert_eq!(rows.len(), 6);
    for c in 1..=4 {
        let on: Vec<_> = rows.iter().filter(|r| r[0] == c).collect();
        assert!(on.windows(2).all(|w| w[0][3] <= w[1][2]));
    }
}

#[test]
fn generated_set_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let p = path.to_str().unwrap();
    assert!(nulsched(&["gen", "--tasks", "40", "--seed", "5", "--out", p]).status.success());
    assert!(dir.path().join("w.csv.meta.json").exists());
    for policy in ["edf", "nul-edf"] {
        let o = nulsched(&["run", "--policy", policy, "--cores", "6", "--taskset", p]);
        assert!(o.status.success());
        let text = stdout(&o);
        assert_eq!(text.lines().count(), 1 + 6 + 1);
        let last = text.lines().last().unwrap();
        let counts: Vec<u64> = last
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .filter(|(k, _)| *k == "scheduled" || *k == "missed")
            .map(|(_, v)| v.parse().unwrap())
            .collect();
        assert_eq!(counts.iter().sum::<u64>(), 40);
    }
    let events = nulsched(&["run", "--taskset", p, "--format", "events"]);
    assert!(stdout(&events).starts_with("time,kind,task_id,core,nlax,reason\n"));
}

#[test]
fn compare_emits_one_row_per_sweep_value() {
    let o = nulsched(&["compare", "--sweep", "8,15,20"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    let o = nulsched(&["compare", "--axis", "cores", "--sweep", "4,8", "--tasks", "30"]);
    assert!(stdout(&o).starts_with("n_cores,"));
}

#[test]
fn errors_exit_nonzero() {
    assert_eq!(nulsched(&["run", "--policy", "llf"]).status.code(), Some(2));
    assert_eq!(nulsched(&["compare", "--sweep", "20,8"]).status.code(), Some(1));
    assert_eq!(nulsched(&["run", "--taskset", "/nonexistent.csv"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,arrival,exec,dline,quant,ctot,cur\n1,0,5,x,1,1,0\n").unwrap();
    let o = nulsched(&["run", "--taskset", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("record 1"));
}
