//! Balanced triplet sampling.
//!
//! The requested total is split as evenly as possible over consonant pairs:
//! every eligible pair receives `⌊n/P⌋` or `⌈n/P⌉` triplets, with the
//! remainder assigned to a seeded random subset of pairs. A consonant needs
//! two occurrences to fill the A and X roles; with fewer it can still be B.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::phones::VcvSegment;
use crate::error::{Error, Result};
use crate::rng::{RngSeed, SeedRng};

/// Indices into the VCV list the triplet was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbxTriplet {
    pub a: usize,
    pub b: usize,
    pub x: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairBalance {
    /// Balance counts over ordered `(consonant(A), consonant(B))` pairs.
    #[default]
    Ordered,
    /// Balance over unordered consonant pairs, splitting each pair's share
    /// between its two orientations.
    Unordered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub consonant_a: String,
    pub consonant_b: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletSample {
    pub triplets: Vec<AbxTriplet>,
    pub requested: usize,
    /// Requested triplets that could not be delivered.
    pub shortfall: usize,
    pub skipped_pairs: Vec<SkippedPair>,
    pub seed: RngSeed,
    pub balance: PairBalance,
}

impl TripletSample {
    /// Triplet count per ordered consonant pair.
    pub fn pair_counts(&self, vcvs: &[VcvSegment]) -> BTreeMap<(String, String), usize> {
        let mut out = BTreeMap::new();
        for t in &self.triplets {
            *out.entry((vcvs[t.a].consonant.clone(), vcvs[t.b].consonant.clone()))
                .or_insert(0) += 1;
        }
        out
    }
}

fn occurrences(vcvs: &[VcvSegment]) -> BTreeMap<&str, Vec<usize>> {
    let mut by: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in vcvs.iter().enumerate() {
        by.entry(v.consonant.as_str()).or_default().push(i);
    }
    by
}

/// Draws `count` triplets for one ordered pair, distinct while possible.
fn draw_for_pair(a_occ: &[usize], b_occ: &[usize], count: usize, rng: &mut SeedRng, out: &mut Vec<AbxTriplet>) {
    if count == 0 {
        return;
    }
    let na = a_occ.len();
    let capacity = na * (na - 1) * b_occ.len();
    let draw = |rng: &mut SeedRng| {
        let ai = rng.below(na);
        let mut xi = rng.below(na - 1);
        if xi >= ai {
            xi += 1;
        }
        AbxTriplet {
            a: a_occ[ai],
            b: b_occ[rng.below(b_occ.len())],
            x: a_occ[xi],
        }
    };
    if count * 2 <= capacity {
        let mut seen = BTreeSet::new();
        while seen.len() < count {
            let t = draw(rng);
            if seen.insert(t) {
                out.push(t);
            }
        }
        return;
    }
    let mut all = Vec::with_capacity(capacity);
    for &a in a_occ {
        for &x in a_occ {
            if a != x {
                for &b in b_occ {
                    all.push(AbxTriplet { a, b, x });
                }
            }
        }
    }
    rng.shuffle(&mut all);
    let take = count.min(capacity);
    out.extend_from_slice(&all[..take]);
    for _ in take..count {
        out.push(draw(rng));
    }
}

/// Splits `n` over `slots`, giving one extra to `n % slots` randomly chosen slots.
fn allocate(n: usize, slots: usize, rng: &mut SeedRng) -> Vec<usize> {
    let base = n / slots;
    let mut counts = alloc::vec![base; slots];
    let mut order: Vec<usize> = (0..slots).collect();
    rng.shuffle(&mut order);
    for &i in order.iter().take(n % slots) {
        counts[i] += 1;
    }
    counts
}

pub fn sample_triplets(vcvs: &[VcvSegment], n: usize, seed: RngSeed, balance: PairBalance) -> Result<TripletSample> {
    let occ = occurrences(vcvs);
    let consonants: Vec<&str> = occ.keys().copied().collect();
    let mut skipped_pairs = Vec::new();
    let mut ordered: Vec<(&str, &str)> = Vec::new();
    for &ca in &consonants {
        for &cb in &consonants {
            if ca == cb {
                continue;
            }
            if occ[ca].len() < 2 {
                skipped_pairs.push(SkippedPair {
                    consonant_a: ca.into(),
                    consonant_b: cb.into(),
                    reason: format!("`{ca}` has {} occurrence(s); A and X need two", occ[ca].len()),
                });
            } else {
                ordered.push((ca, cb));
            }
        }
    }
    if ordered.is_empty() {
        return Err(Error::Evaluation(format!(
            "no consonant pair can be tested ({} consonants, none with two occurrences and a distinct partner)",
            consonants.len()
        )));
    }
    let mut rng = seed.rng();
    let mut triplets = Vec::with_capacity(n);
    match balance {
        PairBalance::Ordered => {
            let counts = allocate(n, ordered.len(), &mut rng);
            for (&(ca, cb), &c) in ordered.iter().zip(&counts) {
                draw_for_pair(&occ[ca], &occ[cb], c, &mut rng, &mut triplets);
            }
        }
        PairBalance::Unordered => {
            let mut unordered: BTreeMap<(&str, &str), Vec<(&str, &str)>> = BTreeMap::new();
            for &(ca, cb) in &ordered {
                let key = if ca < cb { (ca, cb) } else { (cb, ca) };
                unordered.entry(key).or_default().push((ca, cb));
            }
            let counts = allocate(n, unordered.len(), &mut rng);
            for (orientations, &c) in unordered.values().zip(&counts) {
                let split = allocate(c, orientations.len(), &mut rng);
                for (&(ca, cb), &k) in orientations.iter().zip(&split) {
                    draw_for_pair(&occ[ca], &occ[cb], k, &mut rng, &mut triplets);
                }
            }
        }
    }
    Ok(TripletSample {
        shortfall: n - triplets.len(),
        triplets,
        requested: n,
        skipped_pairs,
        seed,
        balance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn vcvs(spec: &[(&str, usize)]) -> Vec<VcvSegment> {
        let mut out = Vec::new();
        for (c, n) in spec {
            for i in 0..*n {
                out.push(VcvSegment {
                    utterance_id: format!("{c}{i}"),
                    left_vowel: "a".into(),
                    consonant: c.to_string(),
                    right_vowel: "a".into(),
                    first_frame: 0,
                    last_frame: 2,
                });
            }
        }
        out
    }

    #[test]
    fn two_consonants_split_evenly() {
        let v = vcvs(&[("b", 3), ("d", 4)]);
        let s = sample_triplets(&v, 10, RngSeed(1), PairBalance::Ordered).unwrap();
        let counts = s.pair_counts(&v);
        assert_eq!(counts[&("b".into(), "d".into())], 5);
        assert_eq!(counts[&("d".into(), "b".into())], 5);
        assert_eq!(s.shortfall, 0);
        for t in &s.triplets {
            assert_ne!(t.a, t.x);
            assert_eq!(v[t.a].consonant, v[t.x].consonant);
            assert_ne!(v[t.a].consonant, v[t.b].consonant);
        }
    }

    #[test]
    fn singleton_consonant_only_plays_b() {
        let v = vcvs(&[("b", 1), ("d", 3), ("g", 3)]);
        let s = sample_triplets(&v, 40, RngSeed(2), PairBalance::Ordered).unwrap();
        assert!(s.triplets.iter().all(|t| v[t.a].consonant != "b"));
        assert!(s.triplets.iter().any(|t| v[t.b].consonant == "b"));
        assert_eq!(s.skipped_pairs.len(), 2);
        let counts: Vec<usize> = s.pair_counts(&v).values().copied().collect();
        assert_eq!(counts.len(), 4);
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        assert_eq!(s.triplets.len(), 40);
    }

    #[test]
    fn no_testable_pair_is_an_error() {
        let v = vcvs(&[("b", 5)]);
        assert!(matches!(sample_triplets(&v, 10, RngSeed(0), PairBalance::Ordered), Err(Error::Evaluation(_))));
        let v = vcvs(&[("b", 1), ("d", 1)]);
        assert!(sample_triplets(&v, 10, RngSeed(0), PairBalance::Ordered).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let v = vcvs(&[("b", 4), ("d", 4), ("g", 2)]);
        let a = sample_triplets(&v, 50, RngSeed(9), PairBalance::Ordered).unwrap();
        let b = sample_triplets(&v, 50, RngSeed(9), PairBalance::Ordered).unwrap();
        assert_eq!(a, b);
        let c = sample_triplets(&v, 50, RngSeed(10), PairBalance::Ordered).unwrap();
        assert_ne!(a.triplets, c.triplets);
    }

    #[test]
    fn unordered_balance_evens_unordered_pairs() {
        let v = vcvs(&[("b", 4), ("d", 4), ("g", 1)]);
        let s = sample_triplets(&v, 31, RngSeed(4), PairBalance::Unordered).unwrap();
        let pc = s.pair_counts(&v);
        let get = |a: &str, b: &str| pc.get(&(a.to_string(), b.to_string())).copied().unwrap_or(0);
        let per = [get("b", "d") + get("d", "b"), get("b", "g") + get("g", "b"), get("d", "g") + get("g", "d")];
        assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{per:?}");
        assert_eq!(per.iter().sum::<usize>(), 31);
    }
}
