mod common;

use common::{fixture, ok, s, vqart, SMALL_MODEL};
use vqart::fixture::FixtureSpec;
use vqart_core::abx::AbxReport;

#[test]
fn missing_manifest_fails_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = vqart(&out, &["experiment", "run", "--manifest", s(&tmp.path().join("nope.json"))]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope.json"));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_and_subcommand_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(vqart(&out, &["experiment", "run", "--bogus"]).status.code(), Some(2));
    assert_eq!(vqart(&out, &["frobnicate"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn out_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(&tmp.path().join("data"), &FixtureSpec { utterances_per_speaker: 6, ..FixtureSpec::default() });
    let out = tmp.path().join("env-out");
    let res = std::process::Command::new(env!("CARGO_BIN_EXE_vqart"))
        .env("VQART_OUT", &out)
        .args(["features", "extract", "--manifest", s(&manifest)])
        .output()
        .unwrap();
    ok(res);
    assert!(out.join("features/features/fx/fx_000.acoustic.csv").is_file());
    assert!(out.join("features/features/fx/fx_000.articulatory.csv").is_file());
    assert!(out.join("features/features/fx/fx_000.acoustic.json").is_file());
    assert!(out.join("features/repro-features.json").is_file());
}

#[test]
fn train_then_evaluate_then_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(&tmp.path().join("data"), &FixtureSpec::default());
    let out = tmp.path().join("out");
    let m = s(&manifest);
    for modality in ["articulatory", "acoustic"] {
        let mut args = vec!["vqvae", "train", "--manifest", m, "--modality", modality, "--seed", "3", "--name", "run"];
        args.extend(SMALL_MODEL);
        ok(vqart(&out, &args));
    }
    let ckpt = out.join("run/0/checkpoints");
    let art = ckpt.join("vqvae-fx-articulatory.json");
    let ac = ckpt.join("vqvae-fx-acoustic.json");
    assert!(out.join("run/0/reports/training-fx-acoustic.json").is_file());
    assert!(out.join("run/0/repro-vqvae-fx-acoustic.json").is_file());

    ok(vqart(
        &out,
        &[
            "abx", "eval", "--manifest", m, "--checkpoint", s(&ac), "--triplets", "5000", "--seed", "7",
            "--split-seed", "3", "--name", "run",
        ],
    ));
    let text = std::fs::read_to_string(out.join("run/0/reports/abx-fx-acoustic.json")).unwrap();
    let report: AbxReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.requested, 5000);
    assert_eq!(report.triplet_count, 5000, "skips: {:?}", report.skipped_pairs);
    assert_eq!(report.seed.0, 7);
    let pairwise = std::fs::read_to_string(out.join("run/0/reports/pairwise-fx-acoustic.csv")).unwrap();
    assert!(pairwise.starts_with("a\\b,"));

    ok(vqart(
        &out,
        &[
            "fusion", "sweep", "--manifest", m, "--articulatory", s(&art), "--acoustic", s(&ac), "--omega-min",
            "0.1", "--omega-max", "10", "--points", "25", "--triplets", "500", "--split-seed", "3", "--name", "run",
        ],
    ));
    let curve = std::fs::read_to_string(out.join("run/0/reports/fusion-fx.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "omega,overall,manner_score,place_score");
    assert_eq!(lines.len(), 26);
    assert!(lines[1].starts_with("0.1,"));
    assert!(lines[25].starts_with("10,"));

    let swapped = vqart(
        &out,
        &["fusion", "sweep", "--manifest", m, "--articulatory", s(&ac), "--acoustic", s(&art), "--name", "bad"],
    );
    assert_eq!(swapped.status.code(), Some(2));
}

#[test]
fn experiment_run_writes_the_output_tree_and_renders() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(&tmp.path().join("data"), &FixtureSpec::default());
    let out = tmp.path().join("out");
    let mut args = vec![
        "experiment", "run", "--manifest", s(&manifest), "--name", "exp", "--repetitions", "2", "--triplets", "300",
        "--points", "5",
    ];
    args.extend(SMALL_MODEL);
    ok(vqart(&out, &args));
    let root = out.join("exp");
    for rep in ["0", "1"] {
        for m in ["articulatory", "acoustic", "fused"] {
            assert!(root.join(rep).join(format!("checkpoints/vqvae-fx-{m}.json")).is_file());
            assert!(root.join(rep).join(format!("reports/abx-fx-{m}.json")).is_file());
            assert!(root.join(rep).join(format!("reports/pairwise-fx-{m}.csv")).is_file());
            assert!(root.join(rep).join(format!("features/codes-fx-{m}.csv")).is_file());
        }
        assert!(root.join(rep).join("checkpoints/guided-pca-fx.json").is_file());
        assert!(root.join(rep).join("reports/fusion-fx.csv").is_file());
        assert!(root.join(rep).join("reports/repetition-fx.json").is_file());
    }
    for f in ["summary-fx.json", "summary.csv", "fusion-fx.csv", "repro.json"] {
        assert!(root.join(f).is_file(), "{f}");
    }
    let repro: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("repro.json")).unwrap()).unwrap();
    assert_eq!(repro["seeds"].as_array().unwrap().len(), 2);
    assert_eq!(repro["checkpoints"].as_object().unwrap().len(), 8);

    let md = ok(vqart(&out, &["report", "render", "--name", "exp"]));
    let md = String::from_utf8(md.stdout).unwrap();
    assert!(md.contains("| fx | acoustic | 2 |"), "{md}");
    let csv = ok(vqart(&out, &["report", "render", "--experiment", s(&root), "--format", "csv"]));
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 4);
}

#[test]
fn audio_only_speaker_cannot_train_articulatory_models() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        utterances_per_speaker: 8,
        without_ema: vec!["fx".into()],
        ..FixtureSpec::default()
    };
    let manifest = fixture(&tmp.path().join("data"), &spec);
    let out = tmp.path().join("out");
    let res = vqart(&out, &["experiment", "run", "--manifest", s(&manifest)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no EMA"));
    assert!(!out.exists());
}

#[test]
fn inversion_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        speakers: vec!["ref".into(), "new".into()],
        utterances_per_speaker: 20,
        consonants_per_utterance: 5,
        without_ema: vec!["new".into()],
        ..FixtureSpec::default()
    };
    let manifest = fixture(&tmp.path().join("data"), &spec);
    let m = s(&manifest);
    let out = tmp.path().join("out");
    let small = ["--hidden", "32", "--hidden-blocks", "2", "--max-epochs", "3", "--patience", "2"];
    let mut args = vec!["invert", "pretrain", "--manifest", m, "--speaker", "ref"];
    args.extend(small);
    ok(vqart(&out, &args));
    let syn = out.join("inversion/inversion/synthesizer-ref.json");
    assert!(syn.is_file());
    let syn_hash = vqart::io::sha256_file(&syn).unwrap();

    let mut args = vec!["invert", "train", "--manifest", m, "--speaker", "new", "--synthesizer", s(&syn)];
    args.extend(small);
    ok(vqart(&out, &args));
    assert_eq!(vqart::io::sha256_file(&syn).unwrap(), syn_hash);
    let system = out.join("inversion/inversion/system-new.json");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&system).unwrap()).unwrap();
    assert_eq!(meta["synthesizer_sha256"], syn_hash.as_str());

    ok(vqart(&out, &["invert", "apply", "--manifest", m, "--speaker", "new", "--system", s(&system)]));
    let inferred = out.join("inversion/features/new/new_000.articulatory-inferred.csv");
    let seq = vqart::io::read_features(&inferred).unwrap();
    assert_eq!(seq.dim(), 6);

    let mut args = vec![
        "experiment", "run", "--manifest", m, "--name", "inf", "--repetitions", "1", "--triplets", "200",
        "--modalities", "articulatory-inferred,acoustic", "--fusion-articulatory", "articulatory-inferred",
        "--inversion-system", s(&system), "--points", "3",
    ];
    args.extend(SMALL_MODEL);
    ok(vqart(&out, &args));
    assert!(out.join("inf/0/reports/abx-new-articulatory-inferred.json").is_file());

    // A tampered synthesizer is refused.
    let copy = out.join("inversion/inversion/synthesizer-for-new.json");
    let mut text = std::fs::read_to_string(&copy).unwrap();
    text.push(' ');
    std::fs::write(&copy, text).unwrap();
    let res = vqart(&out, &["invert", "apply", "--manifest", m, "--speaker", "new", "--system", s(&system), "--name", "x"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("sha256"));
}
