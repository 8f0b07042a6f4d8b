#![allow(dead_code)]

use boxlab::env::{standard_generalization_trials, BoxIndex, KeyDef, KeyIndex, Layout, NumberSet};
use boxlab::hypothesis::{Hypothesis, NamedRule};
use boxlab::rulelang::{Atom, BoxView, Expr};
use boxlab::smc::{Context, ParticleSet};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 8] = ["red", "pink", "white", "grey", "red1", "purplearrow", "blue", "x9"];

pub fn arb_atom() -> impl Strategy<Value = Atom> {
    let name = || proptest::sample::select(NAMES.to_vec()).prop_map(str::to_string);
    prop_oneof![
        Just(Atom::ColorMatch),
        Just(Atom::ShapeMatch),
        Just(Atom::NumberMatch),
        Just(Atom::NumberKnown),
        Just(Atom::KeyHasNumber),
        Just(Atom::KeyHasShape),
        Just(Atom::True),
        Just(Atom::False),
        name().prop_map(Atom::KeyColorIs),
        name().prop_map(Atom::BoxColorIs),
        (1u8..12).prop_map(Atom::BoxPositionIs),
        (1u8..12).prop_map(Atom::KeyNumberIs),
        (name(), name()).prop_map(|(key, box_)| Atom::Pair { key, box_ }),
    ]
}

pub fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_atom().prop_map(Expr::Atom).prop_recursive(6, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::or(a, b)),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, t, e)| Expr::if_(c, t, e)),
        ]
    })
}

/// Every key and box view an agent can meet: layout keys and the
/// generalization candidates, against each layout box under every
/// non-empty belief set plus the novel boxes.
pub fn all_pairs(layout: &Layout) -> (Vec<KeyDef>, Vec<BoxView>) {
    let trials = standard_generalization_trials();
    let mut keys = layout.keys.clone();
    keys.extend(trials.iter().flat_map(|t| t.candidates.iter().cloned()));
    let mut views = Vec::new();
    for b in &layout.boxes {
        views.push(BoxView::observed(b));
        for mask in 1u32..32 {
            let members: Vec<u8> = (1..=5u8).filter(|n| mask & (1 << (n - 1)) != 0).collect();
            let set = NumberSet::try_from(members).unwrap();
            views.push(BoxView::unobserved(b, set));
        }
    }
    views.extend(trials.iter().map(|t| BoxView::observed(&t.novel_box)));
    (keys, views)
}

/// Mutual information between outcome and hypothesis by enumerating the
/// joint table `w_i * p(y | h_i)`.
pub fn mi_oracle(weights: &[f64], predicts: &[bool], rho: f64) -> f64 {
    let lik = |s: bool, y: bool| match (s, y) {
        (true, true) => rho,
        (true, false) => 1.0 - rho,
        (false, true) => 0.0,
        (false, false) => 1.0,
    };
    let mut mi = 0.0;
    for y in [false, true] {
        let py: f64 = weights.iter().zip(predicts).map(|(w, &s)| w * lik(s, y)).sum();
        for (w, &s) in weights.iter().zip(predicts) {
            let joint = w * lik(s, y);
            if joint > 0.0 {
                mi += joint * (joint / (w * py)).ln();
            }
        }
    }
    mi
}

pub fn named_set(layout: &Layout, rho: f64) -> ParticleSet<f64> {
    ParticleSet::uniform(NamedRule::ALL.iter().map(|&r| Hypothesis::named(r, layout)).collect(), rho, 0)
}

/// Random attempts whose outcomes are drawn from one of the rules, so the
/// sequence stays consistent with at least one particle.
pub fn evidence_sequence(layout: &Layout, seed: u64, len: usize, rho: f64) -> Vec<(BoxIndex, KeyIndex, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = NamedRule::ALL[rng.random_range(0..4)].soc(layout);
    (0..len)
        .map(|_| {
            let b = BoxIndex(rng.random_range(0..layout.n_boxes()));
            let k = KeyIndex(rng.random_range(0..layout.n_keys()));
            let y = truth.predicts(b, k) && rng.random_bool(rho);
            (b, k, y)
        })
        .collect()
}

/// Largest total-variation distance, over every prefix of `n_seqs` random
/// sequences of length `len`, between the particle weights of the four named
/// rules and the exact posterior computed in rationals with `rho = 4/5`.
pub fn max_posterior_tv(n_seqs: u64, len: usize) -> f64 {
    let layout = Layout::standard();
    let views = layout.observed_views();
    let ctx = Context { layout: &layout, views: &views };
    let rho_q = Ratio::new(4i128, 5);
    let rules: Vec<_> = NamedRule::ALL.iter().map(|r| r.soc(&layout)).collect();
    let to_f64 = |r: Ratio<i128>| *r.numer() as f64 / *r.denom() as f64;
    let mut worst = 0.0f64;
    for seed in 0..n_seqs {
        let mut ps = named_set(&layout, 0.8);
        let mut unnorm = vec![Ratio::from_integer(1i128); rules.len()];
        for (b, k, y) in evidence_sequence(&layout, seed, len, 0.8) {
            ps.update_weights(ctx, b, k, y).unwrap();
            for (u, soc) in unnorm.iter_mut().zip(&rules) {
                *u *= match (soc.predicts(b, k), y) {
                    (true, true) => rho_q,
                    (true, false) => Ratio::from_integer(1) - rho_q,
                    (false, true) => Ratio::from_integer(0),
                    (false, false) => Ratio::from_integer(1),
                };
            }
            let total: Ratio<i128> = unnorm.iter().sum();
            let tv: f64 = ps.weights().iter().zip(&unnorm).map(|(w, &u)| (w - to_f64(u / total)).abs()).sum::<f64>() / 2.0;
            worst = worst.max(tv);
        }
    }
    worst
}
