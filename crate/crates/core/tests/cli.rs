//! End-to-end runs of the `aad-hmm` binary on temporary directories.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aad_hmm::experiment::SimulationSettings;
use aad_hmm::io;
use aad_hmm::{forward_backward, generate_trajectory, sample_scores, EvalReport, TransitionModel};
use tempfile::tempdir;

fn aad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aad-hmm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = aad(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn simulate_infer_eval_round_trip() {
    let dir = tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--out", p(&sim), "--seed", "3"]);
    let scores = fs::read_to_string(sim.join("scores.csv")).unwrap();
    assert!(scores.starts_with("# window_length_s=1,n_states=2\n"));
    assert_eq!(scores.lines().count(), 601);
    let truth = fs::read_to_string(sim.join("truth.csv")).unwrap();
    assert_eq!(data_rows(&truth).len(), 600);

    for (mode, file) in [("causal", "posterior.csv"), ("noncausal", "posterior.csv"), ("viterbi", "viterbi.csv")] {
        let out = dir.path().join(mode);
        ok(&["infer", "--scores", p(&sim.join("scores.csv")), "--mode", mode, "--out", p(&out)]);
        let report = dir.path().join(format!("{mode}.json"));
        ok(&[
            "eval",
            "--decisions",
            p(&out.join(file)),
            "--truth",
            p(&sim.join("truth.csv")),
            "--out",
            p(&report),
        ]);
        let r: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r.switch_detections.len(), 1);
        assert!((r.switch_detections[0].true_time - 300.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.accuracy));
    }
}

#[test]
fn causal_and_noncausal_agree_on_last_window() {
    let dir = tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--out", p(&sim), "--seed", "8"]);
    let rows = |mode: &str| {
        let out = dir.path().join(mode);
        ok(&["infer", "--scores", p(&sim.join("scores.csv")), "--mode", mode, "--p-switch", "0.01", "--out", p(&out)]);
        fs::read_to_string(out.join("posterior.csv")).unwrap()
    };
    let (c, nc) = (rows("causal"), rows("noncausal"));
    let last = |s: &str| -> Vec<f64> {
        let line = *data_rows(s).last().unwrap();
        line.split(',').skip(1).take(2).map(|v| v.parse().unwrap()).collect()
    };
    let (a, b) = (last(&c), last(&nc));
    assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
}

#[test]
fn binary_output_equals_library_output() {
    let dir = tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--out", p(&sim), "--seed", "21"]);

    let mut settings = SimulationSettings::default();
    settings.seed = 21;
    let config = settings.resolve().unwrap();
    let truth = generate_trajectory(&config).unwrap();
    let scores = sample_scores(&truth, &config).unwrap();
    assert_eq!(fs::read_to_string(sim.join("scores.csv")).unwrap(), io::format_scores(&scores));
    assert_eq!(fs::read_to_string(sim.join("truth.csv")).unwrap(), io::format_truth(&truth));

    let out = dir.path().join("fb");
    ok(&["infer", "--scores", p(&sim.join("scores.csv")), "--mode", "noncausal", "--out", p(&out)]);
    let log_b = config.emission.log_emission_series(&scores).unwrap();
    let post = forward_backward(&TransitionModel::new(2, 0.001).unwrap(), &log_b).unwrap();
    assert_eq!(
        fs::read_to_string(out.join("posterior.csv")).unwrap(),
        io::format_posterior(&post, 1.0)
    );
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempdir().unwrap();
    let read = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["simulate", "--out", p(&out), "--seed", seed]);
        fs::read(out.join("scores.csv")).unwrap()
    };
    assert_eq!(read("a", "5"), read("b", "5"));
    assert_ne!(read("c", "5"), read("d", "6"));
}

#[test]
fn three_speaker_configs_give_three_columns() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, r#"{"n_states": 3, "trial_length": 120, "switch_interval": 40, "seed": 2}"#).unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--config", p(&cfg), "--out", p(&sim)]);
    let out = dir.path().join("post");
    ok(&["infer", "--scores", p(&sim.join("scores.csv")), "--mode", "causal", "--out", p(&out)]);
    let text = fs::read_to_string(out.join("posterior.csv")).unwrap();
    assert!(text.lines().any(|l| l == "window_index,p_0,p_1,p_2,argmax"));
    assert!(data_rows(&text).iter().all(|r| r.split(',').count() == 5));
}

#[test]
fn log_emission_input_bypasses_the_emission_model() {
    let dir = tempdir().unwrap();
    let scores = dir.path().join("lb.csv");
    fs::write(&scores, "# window_length_s=2,n_states=2,kind=log_emission\n0,-5\n0,-5\n-5,0\n").unwrap();
    let out = dir.path().join("v");
    ok(&["infer", "--scores", p(&scores), "--mode", "viterbi", "--p-switch", "0.1", "--out", p(&out)]);
    let text = fs::read_to_string(out.join("viterbi.csv")).unwrap();
    assert!(text.starts_with("# mode=viterbi,window_length_s=2,log_joint="));
    assert_eq!(data_rows(&text), vec!["0,0", "1,0", "2,1"]);

    // Plain correlations forced through the same path.
    let raw = dir.path().join("raw.csv");
    fs::write(&raw, "# window_length_s=1,n_states=2\n0,-5\n").unwrap();
    ok(&["infer", "--scores", p(&raw), "--scores-are-log-emissions", "--mode", "noncausal", "--out", p(&out)]);
}

#[test]
fn malformed_scores_report_line_numbers() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "# window_length_s=1,n_states=2\n0.1,0.2\n0.1,abc\n").unwrap();
    let out = aad(&["infer", "--scores", p(&bad), "--out", p(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv:3:"), "{err}");

    fs::write(&bad, "# window_length_s=1,n_states=2\n0.1,0.2\n0.1\n").unwrap();
    let err = String::from_utf8_lossy(&aad(&["infer", "--scores", p(&bad), "--out", p(&dir.path().join("o"))]).stderr).to_string();
    assert!(err.contains("bad.csv:3:"), "{err}");

    fs::write(&bad, "# window_length_s=1,n_states=2\n1.5,0.2\n").unwrap();
    let err = String::from_utf8_lossy(&aad(&["infer", "--scores", p(&bad), "--out", p(&dir.path().join("o"))]).stderr).to_string();
    assert!(err.contains("bad.csv:2:"), "{err}");
}

#[test]
fn eval_scores_perfect_and_constant_decisions() {
    let dir = tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    let mut t = String::from("window_index,true_state\n");
    let mut perfect = String::from("window_index,state\n");
    let mut constant = String::from("window_index,state\n");
    for i in 0..600 {
        let s = usize::from(i >= 300);
        t.push_str(&format!("{i},{s}\n"));
        perfect.push_str(&format!("{i},{s}\n"));
        constant.push_str(&format!("{i},0\n"));
    }
    fs::write(&truth, t).unwrap();
    let run = |name: &str, body: &str| -> EvalReport {
        let d = dir.path().join(format!("{name}.csv"));
        fs::write(&d, body).unwrap();
        let out = dir.path().join(format!("{name}.json"));
        ok(&["eval", "--decisions", p(&d), "--truth", p(&truth), "--out", p(&out), "--mode", "causal"]);
        serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap()
    };
    let r = run("perfect", &perfect);
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.mean_abs_detection_time, Some(0.0));
    let r = run("constant", &constant);
    assert!(r.switch_detections[0].missed);
    assert_eq!(r.switch_detections[0].delay, 300.0);
    assert_eq!(r.accuracy, 0.5);
}

#[test]
fn sweep_writes_tables_and_plots() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"axis": "p_switch", "values": [0.1, 0.001], "trials": 3,
            "decoders": ["causal", "non-causal", "viterbi"],
            "base": {"trial_length": 300, "switch_interval": 150}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["sweep", "--config", p(&cfg), "--out", p(&out), "--workers", "2"]);
    let long = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 2 * 3 * 3);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
    for svg in ["accuracy_p_switch.svg", "detection_time_p_switch.svg"] {
        let text = fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg") && text.contains("<polyline"));
    }

    // Worker count does not change the numbers.
    let out1 = dir.path().join("out1");
    ok(&["sweep", "--config", p(&cfg), "--out", p(&out1), "--workers", "1"]);
    assert_eq!(long, fs::read_to_string(out1.join("sweep.csv")).unwrap());
}

#[test]
fn bad_sweep_config_is_rejected() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(&cfg, r#"{"axis": "alpha", "values": [9.0]}"#).unwrap();
    let out = aad(&["sweep", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the studied range"));
}
