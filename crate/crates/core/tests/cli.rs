use std::path::Path;
use std::process::{Command, Output};

use d2dshare::cli::format_rounds;
use d2dshare::matching::{deferred_acceptance_traced, PreferenceList};
use d2dshare::simulation::Metric;

fn d2dshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d2dshare"))
        .args(args)
        .env_remove("D2DSHARE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sweep(out_dir: &Path, extra: &[&str]) -> String {
    let dir = out_dir.to_str().unwrap();
    let mut args = vec!["sweep", "--out-dir", dir];
    args.extend_from_slice(extra);
    let o = d2dshare(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    std::fs::read_to_string(out_dir.join("results.csv")).unwrap()
}

#[test]
fn sweep_csv_has_one_row_per_scheme_n_metric() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sweep(dir.path(), &["--drops", "20"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scheme,n,metric,mean,stderr,drops,seed"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 8 * Metric::ALL.len());
    for row in &rows {
        assert_eq!(row.len(), 7);
        assert!(["proposed", "stable_fixed_price", "random_stackelberg"].contains(&row[0]));
        assert!(Metric::ALL.iter().any(|m| m.name() == row[2]));
        row[3].parse::<f64>().unwrap();
        row[4].parse::<f64>().unwrap();
        assert_eq!(row[5], "20");
        assert_eq!(row[6], "1");
    }
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn manifest_replay_is_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = sweep(first.path(), &["--drops", "15", "--seed", "77", "--n-values", "5,25", "--c-fixed", "2.25"]);
    let manifest = first.path().join("manifest.toml");
    let b = sweep(second.path(), &["--manifest", manifest.to_str().unwrap()]);
    assert_eq!(a, b);
    assert!(a.lines().nth(1).unwrap().ends_with(",15,77"));
}

#[test]
fn single_scheme_and_single_drop() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sweep(dir.path(), &["--drops", "1", "--scheme", "proposed", "--n-values", "10"]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), Metric::ALL.len());
    assert!(rows.iter().all(|r| r.starts_with("proposed,10,") && r.contains(",NA,1,")));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_d2dshare"))
        .args(["sweep", "--drops", "2", "--n-values", "5"])
        .env("D2DSHARE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("results.csv").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(d2dshare(&["sweep", "--bogus"]).status.code(), Some(1));
    assert_eq!(d2dshare(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(d2dshare(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "game.beta1 = 1.0\nscenario.drops = 10\ngame.beta3 = 2.0\n").unwrap();
    let o = d2dshare(&["sweep", "--config", bad.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let missing = dir.path().join("missing.toml");
    let o = d2dshare(&["verify", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = d2dshare(&["verify", "--instances", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let o = d2dshare(&["verify", "--instances", "30", "--perturb-alpha", "0.02"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
    assert!(stdout(&o).contains("first failure: r_c="));
}

#[test]
fn pair_single_feasible_pair_matches_in_one_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strong.toml");
    // strong channels and no distance limit make the only pair feasible
    std::fs::write(&cfg, "channel.K = 1000.0\nchannel.relay_range = 1000.0\n").unwrap();
    let o = d2dshare(&[
        "pair",
        "--config",
        cfg.to_str().unwrap(),
        "--m",
        "1",
        "--n",
        "1",
        "--no-condition-outage",
        "--dump-preferences",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("\n0 0 true "), "{text}");
    assert!(text.contains("[ceu_preferences]\n0: 0\n"), "{text}");
    assert!(text.contains("[round 1]\nproposals = 0->0\nrejections =\nheld = 0->0\n"), "{text}");
    assert!(!text.contains("[round 2]"));
    assert!(text.contains("ceu 0 = d2d 0"));
    assert!(text.contains("matched_count = 1"));
}

#[test]
fn pair_all_infeasible_leaves_everyone_unmatched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hard.toml");
    std::fs::write(&cfg, "game.r_th = 100.0\nscenario.condition_outage = false\n").unwrap();
    let out = dir.path().join("trace.txt");
    let o = d2dshare(&[
        "pair",
        "--config",
        cfg.to_str().unwrap(),
        "--m",
        "3",
        "--n",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(!text.contains(" true "));
    assert!(!text.contains("[round"));
    assert_eq!(text.matches("unmatched").count(), 3);
    assert!(text.contains("matched_count = 0"));
    assert!(text.contains("outage_fraction = 1"));
}

#[test]
fn three_by_three_proposal_log() {
    let lists = |rows: &[&[usize]]| -> Vec<PreferenceList> {
        rows.iter().enumerate().map(|(o, r)| PreferenceList::new(o, r.to_vec())).collect()
    };
    let ceu = lists(&[&[0, 1, 2], &[0, 2, 1], &[1, 0, 2]]);
    let d2d = lists(&[&[1, 0, 2], &[0, 2, 1], &[2, 1, 0]]);
    let (_, rounds) = deferred_acceptance_traced(&ceu, &d2d).unwrap();
    let expected = "\
[round 1]
proposals = 0->0 1->0 2->1
rejections = 0->0
held = 1->0 2->1
[round 2]
proposals = 0->1
rejections = 2->1
held = 0->1 1->0
[round 3]
proposals = 2->0
rejections = 2->0
held = 0->1 1->0
[round 4]
proposals = 2->2
rejections =
held = 0->1 1->0 2->2
";
    assert_eq!(format_rounds(&rounds), expected);
}
