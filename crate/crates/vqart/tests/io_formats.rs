use std::path::Path;

use vqart::io::{
    builtin_phone_table, parse_segmentation, read_ema_csv, read_features, read_phone_table, read_wav, write_ema_csv,
    write_features, write_phone_table, write_wav, EmaTrack, LoadedManifest,
};
use vqart::Error;
use vqart_core::abx::PhoneClass;
use vqart_core::features::{ArticulatoryLayout, FeatureSequence, Modality};
use vqart_core::{Matrix, RngSeed};

fn write(path: &Path, text: &str) {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).unwrap();
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn wav_round_trip_is_exact_on_the_16_bit_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("a.wav");
    let samples: Vec<f64> = (-5..5).map(|k| f64::from(k * 3000) / 32768.0).collect();
    write_wav(&p, &samples, 16_000).unwrap();
    let w = read_wav(&p).unwrap();
    assert_eq!(w.sample_rate, 16_000);
    assert_eq!(w.samples, samples);
}

#[test]
fn wav_clips_out_of_range_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("a.wav");
    write_wav(&p, &[2.0, -2.0], 16_000).unwrap();
    assert_eq!(read_wav(&p).unwrap().samples, vec![32767.0 / 32768.0, -1.0]);
}

#[test]
fn stereo_and_float_wavs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("st.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&p, spec).unwrap();
    w.write_sample(0i16).unwrap();
    w.write_sample(0i16).unwrap();
    w.finalize().unwrap();
    assert!(read_wav(&p).unwrap_err().to_string().contains("2 channel"));

    let p = tmp.path().join("f.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(&p, spec).unwrap();
    w.write_sample(0.0f32).unwrap();
    w.finalize().unwrap();
    assert!(matches!(read_wav(&p), Err(Error::Format { .. })));
}

#[test]
fn ema_csv_parses_and_selects_layout_order() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("e.csv");
    write(&p, "time,b_x,b_y,a_x,a_y\n0.00,1,2,3,4\n0.01,5,6,7,8\n0.02,9,10,11,12\n");
    let t = read_ema_csv(&p).unwrap();
    assert_eq!(t.coils, vec!["b", "a"]);
    assert_eq!(t.data.rows(), 3);
    let layout = ArticulatoryLayout {
        coils: vec![
            vqart_core::features::Coil { name: "a".into(), role: vqart_core::features::ArticulatorRole::Jaw },
            vqart_core::features::Coil { name: "b".into(), role: vqart_core::features::ArticulatorRole::Lips },
        ],
    };
    let m = t.select(&layout, &p).unwrap();
    assert_eq!(m.row(1), &[7.0, 8.0, 5.0, 6.0]);
    let err = t.select(&ArticulatoryLayout::pb2007(), &p).unwrap_err();
    assert!(err.to_string().contains("coil `jaw`"));
}

#[test]
fn ema_at_other_rates_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("e.csv");
    write(&p, "time,a_x,a_y\n0.000,1,2\n0.005,1,2\n");
    let err = read_ema_csv(&p).unwrap_err().to_string();
    assert!(err.contains("100 Hz"), "{err}");
}

#[test]
fn ema_headers_must_pair_up() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("e.csv");
    write(&p, "time,a_x,b_y\n0,1,2\n");
    assert!(read_ema_csv(&p).unwrap_err().to_string().contains("different coils"));
    write(&p, "time,a_x,a_z\n0,1,2\n");
    assert!(read_ema_csv(&p).unwrap_err().to_string().contains("pair"));
    write(&p, "time,a_x\n0,1\n");
    assert!(read_ema_csv(&p).is_err());
    write(&p, "time,a_x,a_y\n0,1,oops\n");
    assert!(read_ema_csv(&p).unwrap_err().to_string().contains("row 2"));
}

#[test]
fn ema_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("e.csv");
    let track = EmaTrack {
        times: vec![0.0, 0.01, 0.02],
        coils: vec!["jaw".into()],
        data: Matrix::from_rows(&[[0.1, -2.5], [1.0 / 3.0, 7.0], [1e-9, 0.0]]).unwrap(),
    };
    write_ema_csv(&p, &track).unwrap();
    assert_eq!(read_ema_csv(&p).unwrap(), track);
}

#[test]
fn feature_csv_round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("f/u1.acoustic.csv");
    let mut rng = RngSeed(4).rng();
    let mut m = Matrix::zeros(7, 5);
    m.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal() * 1e3);
    let seq = FeatureSequence::new("u1", Modality::Acoustic, 0.01, m).unwrap();
    write_features(&p, &seq).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("dim_0,dim_1,dim_2,dim_3,dim_4\n"));
    assert!(tmp.path().join("f/u1.acoustic.json").is_file());
    assert_eq!(read_features(&p).unwrap(), seq);
}

#[test]
fn feature_csv_checks_the_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("u.csv");
    let seq = FeatureSequence::new("u", Modality::Articulatory, 0.01, Matrix::filled(2, 2, 1.0)).unwrap();
    write_features(&p, &seq).unwrap();
    write(&p, "dim_0,dim_1\n1,1\n");
    assert!(read_features(&p).unwrap_err().to_string().contains("2 frames"));
}

#[test]
fn segmentation_parses_and_reports_line_numbers() {
    let p = Path::new("x.lab");
    let segs = parse_segmentation("# header\n0 0.1 sil\n\n0.1 0.25 a\n", p).unwrap();
    assert_eq!(segs.len(), 2);
    assert_eq!(segs[1].label, "a");
    assert_eq!(segs[1].start, 0.1);
    let err = parse_segmentation("0 0.1 sil\n0.1 x a\n", p).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
    assert!(parse_segmentation("0 0.1\n", p).unwrap_err().to_string().contains("line 1"));
    assert!(parse_segmentation("0.2 0.1 a\n", p).is_err());
}

#[test]
fn builtin_tables_have_three_places_and_five_manners() {
    for name in ["pb2007", "mocha"] {
        let inv = builtin_phone_table(name).unwrap();
        assert_eq!(inv.place_groups().len(), 3, "{name}");
        assert_eq!(inv.manner_groups().len(), 5, "{name}");
        assert!(inv.iter().any(|(_, i)| i.class == PhoneClass::Vowel));
        assert_eq!(inv.get("sil").unwrap().class, PhoneClass::Other);
    }
    assert!(matches!(builtin_phone_table("timit"), Err(Error::Usage(_))));
}

#[test]
fn phone_table_round_trip_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("t.csv");
    let inv = builtin_phone_table("pb2007").unwrap();
    write_phone_table(&p, &inv).unwrap();
    assert_eq!(read_phone_table(&p).unwrap(), inv);
    write(&p, "phone,class,place_group,manner_group\nq,glide,,\n");
    assert!(read_phone_table(&p).unwrap_err().to_string().contains("glide"));
    write(&p, "phone,class,place_group,manner_group\nq,vowel,,\nq,vowel,,\n");
    assert!(read_phone_table(&p).unwrap_err().to_string().contains("twice"));
}

fn manifest_dir(tmp: &Path, body: &str) -> std::path::PathBuf {
    write(&tmp.join("wav/u1.wav"), "");
    write(&tmp.join("lab/u1.lab"), "0 0.1 sil\n");
    write(&tmp.join("ema/u1.csv"), "time,a_x,a_y\n0,0,0\n");
    let p = tmp.join("m.json");
    write(&p, body);
    p
}

#[test]
fn manifest_resolves_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let p = manifest_dir(
        tmp.path(),
        r#"{"corpus":"c","layout":"mocha","phone_table":"builtin:mocha","utterances":[
            {"utterance_id":"u1","speaker":"s","wav":"wav/u1.wav","ema":"ema/u1.csv","segmentation":"lab/u1.lab"}]}"#,
    );
    let m = LoadedManifest::load(&p).unwrap();
    assert_eq!(m.layout, ArticulatoryLayout::mocha());
    assert_eq!(m.speakers(), vec!["s"]);
    assert_eq!(m.resolve(&m.manifest.utterances[0].wav), tmp.path().join("wav/u1.wav"));
    assert_eq!(m.sha256.len(), 64);
    assert_eq!(m.pick_speaker(None).unwrap(), "s");
    assert!(matches!(m.pick_speaker(Some("t")), Err(Error::Usage(_))));
}

#[test]
fn manifest_accepts_custom_layouts_and_table_files() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("t.csv"), "phone,class,place_group,manner_group\na,vowel,,\n");
    let p = manifest_dir(
        tmp.path(),
        r#"{"corpus":"c","phone_table":"t.csv","utterances":[
            {"utterance_id":"u1","speaker":"s","wav":"wav/u1.wav","segmentation":"lab/u1.lab"}],
            "layout":{"coils":[{"name":"j","role":"jaw"},{"name":"l","role":"lips"},{"name":"t","role":"tongue"},{"name":"t2","role":"tongue"}]}}"#,
    );
    let m = LoadedManifest::load(&p).unwrap();
    assert_eq!(m.layout.coils.len(), 4);
    assert_eq!(m.inventory.len(), 1);
}

#[test]
fn manifest_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = r#"{"utterance_id":"u1","speaker":"s","wav":"wav/u1.wav","segmentation":"lab/u1.lab"}"#;
    let cases = [
        (format!(r#"{{"corpus":"c","layout":"mocha","phone_table":"builtin:mocha","utterances":[{rec},{rec}]}}"#), "twice"),
        (
            r#"{"corpus":"c","layout":"mocha","phone_table":"builtin:mocha","utterances":[
            {"utterance_id":"u2","speaker":"s","wav":"wav/u2.wav","segmentation":"lab/u1.lab"}]}"#
                .to_string(),
            "missing file",
        ),
        (format!(r#"{{"corpus":"c","layout":"xrmb","phone_table":"builtin:mocha","utterances":[{rec}]}}"#), "xrmb"),
        (format!(r#"{{"corpus":"c","layout":"mocha","phone_table":"builtin:x","utterances":[{rec}]}}"#), "built-in"),
        (r#"{"corpus":"c","layout":"mocha","phone_table":"builtin:mocha","utterances":[]}"#.to_string(), "no utterances"),
        (format!(r#"{{"corpus":"c","layout":"mocha","phone_table":"builtin:mocha","extra":1,"utterances":[{rec}]}}"#), "extra"),
    ];
    for (body, needle) in cases {
        let p = manifest_dir(tmp.path(), &body);
        let err = LoadedManifest::load(&p).unwrap_err().to_string();
        assert!(err.contains(needle), "{needle}: {err}");
    }
    assert!(matches!(LoadedManifest::load(&tmp.path().join("none.json")), Err(Error::Io { .. })));
}
