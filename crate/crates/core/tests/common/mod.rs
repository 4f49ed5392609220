//! Property checks shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use ifslab::measures::{coding_pushforward, markov_step, CodingMeasure, CodingOptions, SamplingLaw};
use ifslab::{orbit, presets, GridMeasure, Ifs, Interval, IntervalSet, SymbolStream};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

pub fn preset(i: usize) -> Ifs {
    presets::by_name(presets::NAMES[i % presets::NAMES.len()]).unwrap()
}

/// Up to five random intervals (points included) inside `domain`.
pub fn interval_set(domain: Interval) -> impl Strategy<Value = IntervalSet> {
    let w = domain.width();
    let endpoint = prop_oneof![
        4 => 0.0f64..=1.0,
        1 => prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]),
    ];
    prop::collection::vec((endpoint.clone(), endpoint, any::<bool>()), 1..6).prop_map(move |raw| {
        let parts = raw
            .into_iter()
            .map(|(a, b, point)| {
                let a = domain.lo + a * w;
                let b = if point { a } else { domain.lo + b * w };
                Interval::spanning(a, b)
            })
            .collect();
        IntervalSet::normalize(parts, domain).unwrap()
    })
}

pub fn grid_measure(n_bins: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0f64..1.0], n_bins)
        .prop_filter("some mass", |v| v.iter().sum::<f64>() > 0.0)
}

pub fn metric_axioms(a: &IntervalSet, b: &IntervalSet, c: &IntervalSet) -> Check {
    let ab = a.hausdorff(b).unwrap();
    let ba = b.hausdorff(a).unwrap();
    let bc = b.hausdorff(c).unwrap();
    let ac = a.hausdorff(c).unwrap();
    prop_assert_eq!(a.hausdorff(a).unwrap(), 0.0);
    prop_assert!(ab >= 0.0);
    prop_assert_eq!(ab, ba);
    prop_assert!(ac <= ab + bc + 1e-12, "triangle: {} > {} + {}", ac, ab, bc);
    Ok(())
}

fn brute_distance(x: f64, set: &IntervalSet) -> f64 {
    set.parts()
        .iter()
        .map(|p| (p.lo - x).max(x - p.hi).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

fn samples(set: &IntervalSet, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for p in set.parts() {
        let n = (p.width() / step).ceil() as usize;
        for i in 0..=n {
            out.push(p.lo + (p.hi - p.lo) * i as f64 / n.max(1) as f64);
        }
    }
    out
}

/// Sampled one-sided distances differ from the exact ones by at most the
/// sampling step.
pub fn hausdorff_matches_sampling(a: &IntervalSet, b: &IntervalSet) -> Check {
    let step = 1e-3;
    let one_sided = |s: &IntervalSet, t: &IntervalSet| {
        samples(s, step)
            .into_iter()
            .map(|x| brute_distance(x, t))
            .fold(0.0, f64::max)
    };
    let brute = one_sided(a, b).max(one_sided(b, a));
    let exact = a.hausdorff(b).unwrap();
    prop_assert!((exact - brute).abs() <= step, "exact {} vs sampled {}", exact, brute);
    Ok(())
}

pub fn normalize_idempotent(a: &IntervalSet) -> Check {
    let again = IntervalSet::normalize(a.parts().to_vec(), a.domain()).unwrap();
    prop_assert_eq!(again.parts(), a.parts());
    Ok(())
}

pub fn fatten_monotone(a: &IntervalSet, e1: f64, e2: f64) -> Check {
    let (lo, hi) = (e1.min(e2), e1.max(e2));
    prop_assert!(a.fatten(lo).unwrap().subset_within(&a.fatten(hi).unwrap(), 1e-12).unwrap());
    prop_assert!(a.subset_within(&a.fatten(lo).unwrap(), 0.0).unwrap());
    Ok(())
}

/// `B` is monotone and distributes over unions.
pub fn bh_monotone_additive(ifs: &Ifs, a: &IntervalSet, c: &IntervalSet) -> Check {
    let ac = a.union(c).unwrap();
    let ba = ifs.bh_apply(a).unwrap();
    let bc = ifs.bh_apply(c).unwrap();
    let bac = ifs.bh_apply(&ac).unwrap();
    prop_assert!(ba.subset_within(&bac, 1e-12).unwrap());
    let joined = ba.union(&bc).unwrap();
    let merge = a.limits().merge_eps;
    let d = bac.hausdorff(&joined).unwrap();
    prop_assert!(d <= merge, "B(A ∪ C) vs B(A) ∪ B(C): {}", d);
    Ok(())
}

/// `B^n(X)` equals the union of all word images of length `n`.
pub fn cover_identity(ifs: &Ifs, n: usize) -> Result<(), String> {
    let direct = ifs.bh_iterate(&ifs.full_set(), n).map_err(|e| e.to_string())?;
    let images = ifslab::symbolic::words_of_len(ifs.k(), n)
        .unwrap()
        .iter()
        .map(|w| ifs.word_image(w).unwrap())
        .collect();
    let union = IntervalSet::normalize(images, ifs.domain()).map_err(|e| e.to_string())?;
    if direct.parts() != union.parts() {
        return Err(format!(
            "depth {n}: {} parts via B^n, {} via words, d_H {}",
            direct.len(),
            union.len(),
            direct.hausdorff(&union).unwrap_or(f64::NAN)
        ));
    }
    Ok(())
}

/// Each Markov step conserves mass and is affine in the measure.
pub fn markov_mass_and_linearity(ifs: &Ifs, w: f64, mu: Vec<f64>, nu: Vec<f64>, alpha: f64) -> Check {
    let d = ifs.domain();
    let weights = [w, 1.0 - w];
    let mu = GridMeasure::normalized(d, mu).unwrap();
    let nu = GridMeasure::normalized(d, nu).unwrap();
    let mix = mu.mix(&nu, alpha).unwrap();
    let (sm, sn, sx) = (
        markov_step(ifs, &weights, &mu).unwrap(),
        markov_step(ifs, &weights, &nu).unwrap(),
        markov_step(ifs, &weights, &mix).unwrap(),
    );
    for s in [&sm, &sn, &sx] {
        prop_assert!((s.total_mass() - 1.0).abs() <= 1e-12, "mass {}", s.total_mass());
        prop_assert!(s.masses().iter().all(|&m| m >= 0.0));
    }
    let expected = sm.mix(&sn, alpha).unwrap();
    for (i, (a, b)) in sx.masses().iter().zip(expected.masses()).enumerate() {
        prop_assert!((a - b).abs() <= 1e-12, "bin {}: {} vs {}", i, a, b);
    }
    Ok(())
}

/// Sampling results do not depend on the worker count, and seeded orbits
/// repeat exactly.
pub fn deterministic_under_workers(seed: u64) -> Check {
    let ifs = presets::cantor();
    let law = SamplingLaw::Bernoulli {
        weights: vec![0.3, 0.7],
    };
    let run = |workers| {
        let opts = CodingOptions {
            n_samples: 5_000,
            prefix_len: 30,
            tol: 1e-9,
            n_bins: 243,
            seed,
            workers,
        };
        match coding_pushforward(&ifs, &law, &opts).unwrap().measure {
            CodingMeasure::Grid(g) => g,
            CodingMeasure::Hat(_) => unreachable!(),
        }
    };
    prop_assert_eq!(run(1), run(8));
    let stream = SymbolStream::bernoulli(&[0.3, 0.7], seed).unwrap();
    let a = orbit(&ifs, 0.5, &stream, 2_000).unwrap();
    let b = orbit(&ifs, 0.5, &stream.clone(), 2_000).unwrap();
    prop_assert_eq!(a, b);
    Ok(())
}
