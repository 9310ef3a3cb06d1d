use std::collections::BTreeMap;

use proptest::prelude::*;
use vqart_core::abx::{
    abx_evaluate, dtw_cosine_distance, evaluate_triplets, extract_vcv, fusion_sweep, late_fusion, log_grid,
    sample_triplets, AbxDesign, AbxScores, DesignDistances, DistancePair, EmbeddingTable, FusionWeight, GroupKind,
    PairBalance, PhoneClass, PhoneInventory, PhoneSegment, VcvSegment,
};
use vqart_core::{Error, Matrix, RngSeed, SeedRng};

fn random(rows: usize, cols: usize, rng: &mut SeedRng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

// ---- DTW ----

fn cosine_cost(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

/// Every monotone path from (0,0) to the far corner as (sum, node count).
fn enumerate_paths(cost: &[Vec<f64>], i: usize, j: usize, sum: f64, len: usize, out: &mut Vec<(f64, usize)>) {
    let (n, m) = (cost.len(), cost[0].len());
    let (sum, len) = (sum + cost[i][j], len + 1);
    if i + 1 == n && j + 1 == m {
        out.push((sum, len));
        return;
    }
    if i + 1 < n {
        enumerate_paths(cost, i + 1, j, sum, len, out);
    }
    if j + 1 < m {
        enumerate_paths(cost, i, j + 1, sum, len, out);
    }
    if i + 1 < n && j + 1 < m {
        enumerate_paths(cost, i + 1, j + 1, sum, len, out);
    }
}

fn oracle_dtw(a: &Matrix, x: &Matrix) -> f64 {
    let cost: Vec<Vec<f64>> = a.iter_rows().map(|r| x.iter_rows().map(|c| cosine_cost(r, c)).collect()).collect();
    let mut paths = Vec::new();
    enumerate_paths(&cost, 0, 0, 0.0, 0, &mut paths);
    let best = paths
        .into_iter()
        .min_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)))
        .unwrap();
    best.0 / best.1 as f64
}

#[test]
fn dtw_equals_exhaustive_path_enumeration() {
    let mut rng = RngSeed(1).rng();
    for case in 0..200 {
        let (ta, tx, d) = (1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(4));
        let a = random(ta, d, &mut rng);
        let x = random(tx, d, &mut rng);
        let got = dtw_cosine_distance(&a, &x).unwrap();
        let want = oracle_dtw(&a, &x);
        assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want}");
        assert!((0.0..=2.0).contains(&got));
        assert_eq!(got, dtw_cosine_distance(&x, &a).unwrap(), "case {case} not symmetric");
        assert_eq!(dtw_cosine_distance(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn dtw_hand_cases_and_errors() {
    let a = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
    let x = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
    assert_eq!(dtw_cosine_distance(&a, &x).unwrap(), 1.0);
    let neg = Matrix::from_rows(&[[-2.0, 0.0]]).unwrap();
    assert_eq!(dtw_cosine_distance(&a, &neg).unwrap(), 2.0);
    assert!(matches!(dtw_cosine_distance(&Matrix::zeros(0, 2), &x), Err(Error::Evaluation(_))));
    assert!(matches!(dtw_cosine_distance(&a, &Matrix::zeros(1, 3)), Err(Error::Dimension { .. })));
}

// ---- VCV extraction ----

fn inventory() -> PhoneInventory {
    let mut inv = PhoneInventory::new();
    inv.vowel("a").vowel("i").vowel("u").vowel("o");
    inv.consonant("b", Some("labiodental"), Some("voiced stop"))
        .consonant("p", Some("labiodental"), Some("voiceless stop"))
        .consonant("v", Some("labiodental"), Some("voiced fricative/affricate"))
        .consonant("d", Some("palatal"), Some("voiced stop"))
        .consonant("t", Some("palatal"), Some("voiceless stop"))
        .consonant("g", Some("dorsal"), Some("voiced stop"))
        .consonant("r", None, Some("sonorant"));
    inv.insert(
        "sil",
        vqart_core::abx::PhoneInfo {
            class: PhoneClass::Other,
            place: None,
            manner: None,
        },
    );
    inv
}

fn segments(labels: &[&str], durations: &[f64]) -> Vec<PhoneSegment> {
    let mut t = 0.0;
    labels
        .iter()
        .zip(durations)
        .map(|(l, d)| {
            let s = PhoneSegment::new(*l, t, t + d).unwrap();
            t += d;
            s
        })
        .collect()
}

fn labels_of(v: &[VcvSegment]) -> Vec<(String, String, String)> {
    v.iter().map(|s| (s.left_vowel.clone(), s.consonant.clone(), s.right_vowel.clone())).collect()
}

fn triple(a: &str, b: &str, c: &str) -> (String, String, String) {
    (a.into(), b.into(), c.into())
}

#[test]
fn vcv_examples() {
    let inv = inventory();
    let run = |labels: &[&str]| {
        extract_vcv("u", &segments(labels, &vec![0.05; labels.len()]), &inv, 0.01, None).unwrap()
    };
    assert_eq!(labels_of(&run(&["a", "b", "a"])), [triple("a", "b", "a")]);
    assert!(run(&["a", "b", "r", "a"]).is_empty());
    assert_eq!(labels_of(&run(&["a", "b", "a", "d", "u"])), [triple("a", "b", "a"), triple("a", "d", "u")]);
    assert!(run(&["a", "b", "sil", "a"]).is_empty());
    match extract_vcv("u", &segments(&["a", "zz", "a"], &[0.05; 3]), &inv, 0.01, None) {
        Err(Error::Ingestion(m)) => assert!(m.contains("zz")),
        other => panic!("{other:?}"),
    }
}

const LABELS: [&str; 8] = ["a", "i", "b", "d", "r", "v", "sil", "u"];

proptest! {
    #[test]
    fn vcv_matches_sliding_window_oracle(picks in prop::collection::vec((0usize..8, 1u32..9), 1..14)) {
        let inv = inventory();
        let labels: Vec<&str> = picks.iter().map(|p| LABELS[p.0]).collect();
        let durations: Vec<f64> = picks.iter().map(|p| f64::from(p.1) * 0.013).collect();
        let segs = segments(&labels, &durations);
        let got = extract_vcv("u", &segs, &inv, 0.01, None).unwrap();

        let class = |l: &str| inv.get(l).unwrap().class;
        let mut want = Vec::new();
        for i in 0..segs.len().saturating_sub(2) {
            if class(&segs[i].label) == PhoneClass::Vowel
                && class(&segs[i + 1].label) == PhoneClass::Consonant
                && class(&segs[i + 2].label) == PhoneClass::Vowel
            {
                let c = &segs[i + 1];
                // Frames whose centers fall in [start, end).
                let centers: Vec<usize> = (0..1000)
                    .filter(|&t| {
                        let m = (t as f64 + 0.5) * 0.01;
                        m >= c.start - 1e-9 && m < c.end - 1e-9
                    })
                    .collect();
                want.push((triple(&segs[i].label, &c.label, &segs[i + 2].label), centers));
            }
        }
        prop_assert_eq!(got.len(), want.len());
        for (g, (lab, centers)) in got.iter().zip(&want) {
            prop_assert_eq!(&triple(&g.left_vowel, &g.consonant, &g.right_vowel), lab);
            if let (Some(&first), Some(&last)) = (centers.first(), centers.last()) {
                prop_assert_eq!((g.first_frame, g.last_frame), (first, last));
            } else {
                prop_assert_eq!(g.first_frame, g.last_frame);
            }
        }
    }
}

// ---- sampling ----

/// `n` occurrences of each consonant, one per utterance `c-i`.
fn corpus(consonants: &[String], n: usize) -> Vec<VcvSegment> {
    let mut out = Vec::new();
    for c in consonants {
        for i in 0..n {
            out.push(VcvSegment {
                utterance_id: format!("{c}-{i}"),
                left_vowel: "a".into(),
                consonant: c.clone(),
                right_vowel: "a".into(),
                first_frame: 0,
                last_frame: i % 3,
            });
        }
    }
    out
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:02}")).collect()
}

fn check_valid(vcvs: &[VcvSegment], triplets: &[vqart_core::abx::AbxTriplet]) {
    for t in triplets {
        assert_ne!(t.a, t.x);
        assert_eq!(vcvs[t.a].consonant, vcvs[t.x].consonant);
        assert_ne!(vcvs[t.a].consonant, vcvs[t.b].consonant);
    }
}

#[test]
fn twenty_consonants_split_five_thousand_evenly() {
    let vcvs = corpus(&names(20), 6);
    let s = sample_triplets(&vcvs, 5000, RngSeed(3), PairBalance::Ordered).unwrap();
    assert_eq!(s.triplets.len(), 5000);
    let counts = s.pair_counts(&vcvs);
    assert_eq!(counts.len(), 380);
    // 5000 = 13·380 + 60: 60 pairs get 14, the rest 13.
    let fourteen = counts.values().filter(|&&c| c == 14).count();
    assert!(counts.values().all(|&c| c == 13 || c == 14));
    assert_eq!(fourteen, 5000 % 380);
    check_valid(&vcvs, &s.triplets);
    assert_eq!(s, sample_triplets(&vcvs, 5000, RngSeed(3), PairBalance::Ordered).unwrap());
    assert_ne!(s.triplets, sample_triplets(&vcvs, 5000, RngSeed(4), PairBalance::Ordered).unwrap().triplets);
}

#[test]
fn two_consonants_get_five_each() {
    let vcvs = corpus(&names(2), 3);
    let s = sample_triplets(&vcvs, 10, RngSeed(0), PairBalance::Ordered).unwrap();
    assert!(s.pair_counts(&vcvs).values().all(|&c| c == 5));
}

#[test]
fn single_occurrence_consonant_only_plays_b() {
    let mut vcvs = corpus(&names(3), 4);
    vcvs.extend(corpus(&["solo".to_string()], 1));
    let solo = vcvs.len() - 1;
    let s = sample_triplets(&vcvs, 600, RngSeed(5), PairBalance::Ordered).unwrap();
    assert!(s.triplets.iter().all(|t| t.a != solo && t.x != solo));
    assert!(s.triplets.iter().any(|t| t.b == solo));
    assert_eq!(s.skipped_pairs.len(), 3);
    let counts = s.pair_counts(&vcvs);
    assert_eq!(counts.len(), 3 * 3);
    let (lo, hi) = (counts.values().min().unwrap(), counts.values().max().unwrap());
    assert!(hi - lo <= 1);
    check_valid(&vcvs, &s.triplets);

    let alone = corpus(&["x".to_string(), "y".to_string()], 1);
    assert!(matches!(sample_triplets(&alone, 10, RngSeed(0), PairBalance::Ordered), Err(Error::Evaluation(_))));
}

#[test]
fn unordered_balance_evens_out_unordered_pairs() {
    let vcvs = corpus(&names(5), 4);
    let s = sample_triplets(&vcvs, 1001, RngSeed(6), PairBalance::Unordered).unwrap();
    let mut unordered: BTreeMap<(String, String), usize> = BTreeMap::new();
    for ((a, b), c) in s.pair_counts(&vcvs) {
        let key = if a < b { (a, b) } else { (b, a) };
        *unordered.entry(key).or_default() += c;
    }
    assert_eq!(unordered.len(), 10);
    assert!(unordered.values().all(|&c| c == 100 || c == 101));
    check_valid(&vcvs, &s.triplets);
}

// ---- scoring ----

/// One-frame-per-occurrence table: each utterance id maps to its consonant's vector plus noise.
fn table(vcvs: &[VcvSegment], f: impl Fn(&VcvSegment, &mut SeedRng) -> Vec<f64>) -> EmbeddingTable {
    let mut rng = RngSeed(77).rng();
    let mut t = EmbeddingTable::new();
    for v in vcvs {
        let rows: Vec<Vec<f64>> = (0..=v.last_frame).map(|_| f(v, &mut rng)).collect();
        t.insert(v.utterance_id.clone(), Matrix::from_rows(&rows).unwrap());
    }
    t
}

fn one_hot(c: &str, consonants: &[String]) -> Vec<f64> {
    consonants.iter().map(|k| f64::from(k == c)).collect()
}

#[test]
fn perfect_constant_and_random_representations() {
    let cons = names(6);
    let vcvs = corpus(&cons, 5);
    let mut inv = PhoneInventory::new();
    for (i, c) in cons.iter().enumerate() {
        inv.consonant(c, Some(["labiodental", "palatal", "dorsal"][i % 3]), Some(["voiced stop", "sonorant"][i / 3]));
    }
    let design = AbxDesign::sample(&vcvs, &inv, 5000, RngSeed(8), PairBalance::Ordered).unwrap();

    let perfect = table(&vcvs, |v, _| one_hot(&v.consonant, &cons));
    let (r, _) = abx_evaluate(&design, &vcvs, &perfect).unwrap();
    assert_eq!((r.overall, r.manner_score, r.place_score), (1.0, Some(1.0), Some(1.0)));
    assert_eq!(r.triplet_count, 5000);
    assert_eq!(r.seed, RngSeed(8));

    let constant = table(&vcvs, |_, _| vec![1.0, 2.0, 3.0]);
    let (r, d) = abx_evaluate(&design, &vcvs, &constant).unwrap();
    assert!(d.overall.iter().all(|p| p.d_ax == p.d_bx && !p.success));
    assert_eq!(r.overall, 0.0);

    let random = table(&vcvs, |_, rng| (0..8).map(|_| rng.normal()).collect());
    let (r, _) = abx_evaluate(&design, &vcvs, &random).unwrap();
    assert!((r.overall - 0.5).abs() < 0.03, "chance level {}", r.overall);
}

#[test]
fn pairwise_cells_reweight_to_the_overall_score() {
    let cons = names(5);
    let vcvs = corpus(&cons, 4);
    let src = table(&vcvs, |v, rng| one_hot(&v.consonant, &cons).iter().map(|x| x + 0.7 * rng.normal()).collect());
    let s = sample_triplets(&vcvs, 997, RngSeed(9), PairBalance::Ordered).unwrap();
    let pairs = evaluate_triplets(&vcvs, &s.triplets, &src).unwrap();
    let scores = AbxScores::from_pairs(&vcvs, &s.triplets, &pairs).unwrap();
    let weighted: usize = scores.pairwise.iter().map(|c| c.successes).sum();
    let tests: usize = scores.pairwise.iter().map(|c| c.tests).sum();
    assert_eq!(tests, 997);
    assert_eq!(weighted as f64 / tests as f64, scores.overall);
    assert!(scores.pairwise.iter().all(|c| c.consonant_a != c.consonant_b && c.tests >= 1));
    assert!(scores.cell("c00", "c00").is_none());
}

#[test]
fn success_survives_increasing_transforms() {
    let mut rng = RngSeed(10).rng();
    for _ in 0..500 {
        let (ax, bx) = (rng.next_f64() * 2.0, rng.next_f64() * 2.0);
        let s = DistancePair::new(ax, bx).success;
        assert_eq!(s, ax < bx);
        assert_eq!(DistancePair::new(2.0 * ax, 2.0 * bx).success, s);
        assert_eq!(DistancePair::new(ax + 1.0, bx + 1.0).success, s);
    }
}

#[test]
fn missing_utterance_is_named() {
    let vcvs = corpus(&names(2), 2);
    let mut src = table(&vcvs, |_, _| vec![1.0]);
    src.sequences.remove("c01-1");
    let s = sample_triplets(&vcvs, 20, RngSeed(0), PairBalance::Ordered).unwrap();
    match evaluate_triplets(&vcvs, &s.triplets, &src) {
        Err(Error::Evaluation(m)) => assert!(m.contains("c01-1"), "{m}"),
        other => panic!("{other:?}"),
    }
}

/// Three place groups × manner groups over a realistic inventory.
fn grouped_corpus() -> (Vec<VcvSegment>, PhoneInventory) {
    let inv = inventory();
    let cons: Vec<String> = ["b", "p", "v", "d", "t", "g", "r"].iter().map(|s| s.to_string()).collect();
    let mut vcvs = Vec::new();
    let vowels = ["a", "i", "u", "o"];
    for (ci, c) in cons.iter().enumerate() {
        for i in 0..4 {
            vcvs.push(VcvSegment {
                utterance_id: format!("{c}-{i}"),
                left_vowel: vowels[(ci + i) % 4].into(),
                consonant: c.clone(),
                right_vowel: vowels[(ci + 2 * i + 1) % 4].into(),
                first_frame: 0,
                last_frame: 1,
            });
        }
    }
    (vcvs, inv)
}

#[test]
fn grouped_scores_match_a_per_group_oracle() {
    let (vcvs, inv) = grouped_corpus();
    let design = AbxDesign::sample(&vcvs, &inv, 300, RngSeed(11), PairBalance::Ordered).unwrap();

    // Labiodental group: A [abo]-style b, B v, X another b is a valid manner test.
    let labio = design.groups.iter().find(|g| g.kind == GroupKind::Place && g.group == "labiodental").unwrap();
    assert!(labio
        .sample
        .triplets
        .iter()
        .any(|t| vcvs[t.a].consonant == "b" && vcvs[t.b].consonant == "v" && vcvs[t.x].consonant == "b"));
    for g in &design.groups {
        let members: Vec<String> = match g.kind {
            GroupKind::Place => inv.place_groups()[&g.group].clone(),
            GroupKind::Manner => inv.manner_groups()[&g.group].clone(),
        };
        for t in &g.sample.triplets {
            assert!([t.a, t.b, t.x].iter().all(|&i| members.contains(&vcvs[i].consonant)));
        }
        assert_eq!(g.sample.triplets.len(), 300);
    }
    // Dorsal and sonorant hold one consonant each; "r" has no place at all.
    let skipped: Vec<&str> = design.skipped_groups.iter().map(|s| s.group.as_str()).collect();
    assert!(skipped.contains(&"dorsal") && skipped.contains(&"sonorant"), "{skipped:?}");

    let cons: Vec<String> = ["b", "p", "v", "d", "t", "g", "r"].iter().map(|s| s.to_string()).collect();
    let src = table(&vcvs, |v, rng| one_hot(&v.consonant, &cons).iter().map(|x| x + 0.6 * rng.normal()).collect());
    let (report, dist) = abx_evaluate(&design, &vcvs, &src).unwrap();

    let rate = |d: &[DistancePair]| d.iter().filter(|p| p.success).count() as f64 / d.len() as f64;
    let mean_of = |kind: GroupKind| {
        let r: Vec<f64> = design
            .groups
            .iter()
            .zip(&dist.groups)
            .filter(|(g, _)| g.kind == kind)
            .map(|(_, d)| rate(d))
            .collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    assert_eq!(report.manner_score, Some(mean_of(GroupKind::Place)));
    assert_eq!(report.place_score, Some(mean_of(GroupKind::Manner)));
}

#[test]
fn singleton_groups_leave_scores_undefined() {
    let cons = names(3);
    let vcvs = corpus(&cons, 3);
    let mut inv = PhoneInventory::new();
    for (i, c) in cons.iter().enumerate() {
        inv.consonant(c, Some(["labiodental", "palatal", "dorsal"][i]), Some(["voiced stop", "sonorant", "voiceless stop"][i]));
    }
    let design = AbxDesign::sample(&vcvs, &inv, 50, RngSeed(12), PairBalance::Ordered).unwrap();
    assert!(design.groups.is_empty());
    assert_eq!(design.skipped_groups.len(), 6);
    let src = table(&vcvs, |v, _| one_hot(&v.consonant, &cons));
    let (r, _) = abx_evaluate(&design, &vcvs, &src).unwrap();
    assert_eq!((r.overall, r.manner_score, r.place_score), (1.0, None, None));
}

// ---- late fusion ----

#[test]
fn default_grid_is_twenty_five_log_points() {
    let g = log_grid(0.1, 10.0, 25).unwrap();
    assert_eq!((g.len(), g[0], g[24]), (25, 0.1, 10.0));
    assert!((g[12] - 1.0).abs() < 1e-12);
    for w in g.windows(2) {
        assert!((w[1] / w[0] - 10f64.powf(2.0 / 24.0)).abs() < 1e-12);
    }
    assert!(log_grid(0.0, 1.0, 5).is_err());
}

fn random_distances(design: &AbxDesign, rng: &mut SeedRng) -> DesignDistances {
    let mut draw = |n: usize| (0..n).map(|_| DistancePair::new(rng.next_f64(), rng.next_f64())).collect::<Vec<_>>();
    DesignDistances {
        overall: draw(design.overall.triplets.len()),
        groups: design.groups.iter().map(|g| draw(g.sample.triplets.len())).collect(),
    }
}

#[test]
fn large_omega_reproduces_the_acoustic_decisions_beyond_the_threshold() {
    let (vcvs, inv) = grouped_corpus();
    let design = AbxDesign::sample(&vcvs, &inv, 200, RngSeed(13), PairBalance::Ordered).unwrap();
    let mut rng = RngSeed(14).rng();
    let ac = random_distances(&design, &mut rng);
    let art = random_distances(&design, &mut rng);

    // Where the modalities disagree, the fused decision turns acoustic once ω·|ac margin| > |art margin|.
    let threshold = ac
        .overall
        .iter()
        .zip(&art.overall)
        .filter(|(a, r)| a.success != r.success)
        .map(|(a, r)| (r.d_ax - r.d_bx).abs() / (a.d_ax - a.d_bx).abs())
        .fold(0.0, f64::max);
    let omega = FusionWeight::new(threshold * 1.01).unwrap();
    for (a, r) in ac.overall.iter().zip(&art.overall) {
        assert_eq!(late_fusion(a, r, omega).success, a.success);
    }
    let below = FusionWeight::new(threshold * 0.5).unwrap();
    assert!(ac.overall.iter().zip(&art.overall).any(|(a, r)| late_fusion(a, r, below).success != a.success));
    assert!(matches!(FusionWeight::new(0.0), Err(Error::Parameter(_))));
}

#[test]
fn equal_modalities_give_an_omega_independent_curve() {
    let (vcvs, inv) = grouped_corpus();
    let design = AbxDesign::sample(&vcvs, &inv, 200, RngSeed(15), PairBalance::Ordered).unwrap();
    let d = random_distances(&design, &mut RngSeed(16).rng());
    let curve = fusion_sweep(&design, &vcvs, &d, &d, &log_grid(0.1, 10.0, 25).unwrap()).unwrap();
    assert_eq!(curve.len(), 25);
    for p in &curve {
        assert_eq!((p.overall, p.manner, p.place), (curve[0].overall, curve[0].manner, curve[0].place));
    }
}
