#![allow(dead_code)]

use proptest::prelude::*;
use quitpath::path::{AbsorptionPath, PathBlock};
use quitpath::strategy::{BehaviorProfile, Tail};
use quitpath::{QuittingGame, Rational, Scalar};

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

pub fn qs(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|x| Rational::from_i64(*x)).collect()
}

/// The three-player cyclic game with the fixture's multi-quit policy.
pub fn ftv3() -> QuittingGame<Rational> {
    QuittingGame::with_min_minus_one(&[qs(&[0, 2, -1]), qs(&[-1, 0, 2]), qs(&[2, -1, 0])], qs(&[0, 0, 0])).unwrap()
}

pub fn five() -> QuittingGame<Rational> {
    let single = vec![
        vec![q(0, 1), q(2, 1), q(-1, 2), q(1, 1), q(-1, 1)],
        vec![q(-1, 2), q(0, 1), q(2, 1), q(1, 1), q(-1, 1)],
        vec![q(2, 1), q(-1, 2), q(0, 1), q(1, 1), q(-1, 1)],
        vec![q(-1, 1), q(-2, 1), q(-3, 1), q(0, 1), q(10, 7)],
        vec![q(2, 1), q(7, 2), q(47, 8), q(5, 2), q(0, 1)],
    ];
    QuittingGame::with_min_minus_one(&single, qs(&[0; 5])).unwrap()
}

/// `[(1,1/2),(2,1/2),(3,1/2)]` repeated forever.
pub fn ftv_cycle() -> AbsorptionPath<Rational> {
    let flow = |i: usize| {
        let mut z = qs(&[0, 0, 0]);
        z[i] = q(1, 1);
        PathBlock::Flow { z, rho: q(1, 2) }
    };
    AbsorptionPath::new(3, vec![], Some(vec![flow(0), flow(1), flow(2)])).unwrap()
}

/// Games with every payoff entry an integer in `[-m, m]`.
pub fn arb_game(n: usize, m: i64) -> impl Strategy<Value = QuittingGame<f64>> {
    prop::collection::vec(prop::collection::vec(-m..=m, n), 1 << n).prop_map(move |rows| {
        let payoffs = rows.into_iter().map(|r| r.into_iter().map(|v| v as f64).collect()).collect();
        QuittingGame::new((1..=n).map(|i| format!("P{i}")).collect(), payoffs).unwrap()
    })
}

/// A mixed action with `0 < p(xi) < 1`.
pub fn arb_stage(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..0.9f64, n).prop_filter("some quitting", |xi| xi.iter().any(|v| *v > 1e-3))
}

/// Profiles whose every stage has `0 < p < 1`, with a cyclic tail.
pub fn arb_profile(n: usize) -> impl Strategy<Value = BehaviorProfile> {
    (prop::collection::vec(arb_stage(n), 0..4), prop::collection::vec(arb_stage(n), 1..4))
        .prop_map(move |(prefix, cycle)| BehaviorProfile::new(n, prefix, Tail::Cycle(cycle)).unwrap())
}

fn arb_block(n: usize) -> impl Strategy<Value = PathBlock<f64>> {
    prop_oneof![
        arb_stage(n).prop_map(|xi| PathBlock::Jump { xi }),
        (prop::collection::vec(0.0..1.0f64, n), 0.05..0.95f64).prop_filter_map("flow direction", |(w, rho)| {
            let total: f64 = w.iter().sum();
            (total > 1e-3).then(|| PathBlock::Flow { z: w.iter().map(|v| v / total).collect(), rho })
        }),
    ]
}

/// Absorbing paths: a prefix followed by a cycle or a terminal flow.
pub fn arb_path(n: usize) -> impl Strategy<Value = AbsorptionPath<f64>> {
    (prop::collection::vec(arb_block(n), 0..4), prop::collection::vec(arb_block(n), 1..4), any::<bool>(), prop::collection::vec(0.0..1.0f64, n))
        .prop_filter_map("valid path", move |(prefix, cycle, cyclic, w)| {
            if cyclic {
                AbsorptionPath::new(n, prefix, Some(cycle)).ok()
            } else {
                let total: f64 = w.iter().sum();
                if total < 1e-3 {
                    return None;
                }
                let mut prefix = prefix;
                prefix.push(PathBlock::Flow { z: w.iter().map(|v| v / total).collect(), rho: 1.0 });
                AbsorptionPath::new(n, prefix, None).ok()
            }
        })
}
