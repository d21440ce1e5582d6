//! Absorption paths: absorption probability as a function of the total
//! absorbed mass `t`, built from jumps (stage-like mixed actions) and flows
//! (players quitting at constant relative rates).
//!
//! Blocks are stored in conditional coordinates; a block starting at absolute
//! time `t0` with conditional absorption probability `p` ends at
//! `t0 + (1 - t0) p`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{absorb_prob, profile_distribution, ActionProfile, QuittingGame};
use crate::one_shot::{Condition, OneShotGame};
use crate::scalar::{convert, convert_vec, Scalar};
use crate::strategy::{is_absorbing as profile_absorbs, BehaviorProfile, Tail};

#[derive(Debug, Clone, PartialEq)]
pub enum PathBlock<S> {
    Jump { xi: Vec<S> },
    /// Player `i` quits at rate `z_i` (relative to `dt`) until the conditional
    /// absorbed mass reaches `rho`.
    Flow { z: Vec<S>, rho: S },
}

impl<S: Scalar> PathBlock<S> {
    /// Conditional absorption probability of the block.
    pub fn prob(&self) -> S {
        match self {
            PathBlock::Jump { xi } => absorb_prob(xi),
            PathBlock::Flow { rho, .. } => rho.clone(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.prob() >= S::one()
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            PathBlock::Jump { xi } => {
                if xi.len() != n {
                    return Err(Error::InvalidPath(format!("jump has {} entries, expected {n}", xi.len())));
                }
                if xi.iter().any(|v| *v < S::zero() || *v > S::one()) {
                    return Err(Error::InvalidPath("jump probabilities must lie in [0,1]".into()));
                }
                if absorb_prob(xi).is_negligible() {
                    return Err(Error::InvalidPath("jump with p(xi) = 0".into()));
                }
            }
            PathBlock::Flow { z, rho } => {
                if z.len() != n {
                    return Err(Error::InvalidPath(format!("flow has {} rates, expected {n}", z.len())));
                }
                let total = z.iter().fold(S::zero(), |a, b| a + b.clone());
                if z.iter().any(|v| *v < S::zero()) || !(total - S::one()).is_negligible() {
                    return Err(Error::InvalidPath("flow rates must form a probability vector".into()));
                }
                if *rho <= S::zero() || *rho > S::one() {
                    return Err(Error::InvalidPath(format!("flow rho = {rho} outside (0,1]")));
                }
            }
        }
        Ok(())
    }

    /// `(alpha, beta)` with `gamma_before = alpha + beta * gamma_after`.
    fn payoff_map(&self, game: &QuittingGame<S>) -> (Vec<S>, S) {
        match self {
            PathBlock::Jump { xi } => (game.absorbing_mass_payoff(xi), S::one() - absorb_prob(xi)),
            PathBlock::Flow { z, rho } => {
                let rz = flow_target(game, z);
                (rz.into_iter().map(|v| v * rho.clone()).collect(), S::one() - rho.clone())
            }
        }
    }
}

/// `Rz = sum_i z_i r(Q^i, C^{-i})`.
pub fn flow_target<S: Scalar>(game: &QuittingGame<S>, z: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); game.n()];
    for (i, zi) in z.iter().enumerate() {
        if zi.is_zero() {
            continue;
        }
        for (o, r) in out.iter_mut().zip(game.single_quit(i)) {
            *o = o.clone() + zi.clone() * r.clone();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "part", content = "index")]
pub enum BlockIndex {
    Prefix(usize),
    Cycle(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionPath<S> {
    n: usize,
    prefix: Vec<PathBlock<S>>,
    cycle: Option<Vec<PathBlock<S>>>,
    non_absorbing: bool,
}

/// One block placed on the absolute time axis.
#[derive(Debug, Clone)]
pub struct Segment<'a, S> {
    pub block: &'a PathBlock<S>,
    pub index: BlockIndex,
    pub t0: S,
    pub t1: S,
}

impl<S: Scalar> AbsorptionPath<S> {
    pub fn new(n: usize, prefix: Vec<PathBlock<S>>, cycle: Option<Vec<PathBlock<S>>>) -> Result<Self> {
        Self::build(n, prefix, cycle, false)
    }

    /// A finite path whose total absorption stays below one.
    pub fn non_absorbing(n: usize, prefix: Vec<PathBlock<S>>) -> Result<Self> {
        Self::build(n, prefix, None, true)
    }

    fn build(n: usize, prefix: Vec<PathBlock<S>>, cycle: Option<Vec<PathBlock<S>>>, non_absorbing: bool) -> Result<Self> {
        for b in prefix.iter().chain(cycle.iter().flatten()) {
            b.validate(n)?;
        }
        if let Some(pos) = prefix.iter().position(PathBlock::is_terminal) {
            if pos + 1 != prefix.len() || cycle.is_some() {
                return Err(Error::InvalidPath("blocks after total absorption".into()));
            }
        }
        if let Some(c) = &cycle {
            if c.is_empty() {
                return Err(Error::InvalidPath("cycle must be nonempty".into()));
            }
            if c.iter().any(PathBlock::is_terminal) {
                return Err(Error::InvalidPath("cycle blocks must have conditional probability below one".into()));
            }
        }
        let reaches_one = cycle.is_some() || prefix.last().is_some_and(PathBlock::is_terminal);
        if reaches_one && non_absorbing {
            return Err(Error::InvalidPath("path marked non-absorbing reaches total absorption".into()));
        }
        if !reaches_one && !non_absorbing {
            return Err(Error::InvalidPath("path never reaches total absorption; mark it non-absorbing explicitly".into()));
        }
        Ok(AbsorptionPath { n, prefix, cycle, non_absorbing })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prefix(&self) -> &[PathBlock<S>] {
        &self.prefix
    }

    pub fn cycle(&self) -> Option<&[PathBlock<S>]> {
        self.cycle.as_deref()
    }

    pub fn is_non_absorbing(&self) -> bool {
        self.non_absorbing
    }

    pub fn block(&self, index: BlockIndex) -> &PathBlock<S> {
        match index {
            BlockIndex::Prefix(k) => &self.prefix[k],
            BlockIndex::Cycle(k) => &self.cycle.as_ref().expect("cycle index without a cycle")[k],
        }
    }

    /// Blocks in time order on the absolute axis; infinite when there is a cycle.
    pub fn segments(&self) -> SegmentIter<'_, S> {
        SegmentIter { path: self, next: 0, t: S::zero(), done: false }
    }

    /// Absolute spans of the prefix followed by `periods` cycle periods.
    pub fn absolute_times(&self, periods: usize) -> Vec<(S, S)> {
        let count = self.prefix.len() + periods * self.cycle.as_ref().map_or(0, Vec::len);
        self.segments().take(count).map(|s| (s.t0, s.t1)).collect()
    }

    /// Absolute time at which the cycle starts.
    pub fn cycle_start(&self) -> S {
        self.segments().take(self.prefix.len()).last().map_or(S::zero(), |s| s.t1)
    }

    /// `(pi_t, pihat_t)`, right-continuous. `pi` is indexed by quitter mask
    /// (entry 0 is unused and zero).
    pub fn eval(&self, t: &S) -> (Vec<S>, S) {
        assert!(*t >= S::zero() && *t <= S::one(), "t must lie in [0,1]");
        if *t >= S::one() {
            let pi = self.pi_one();
            let hat = pi.iter().fold(S::zero(), |a, b| a + b.clone());
            return (pi, hat);
        }
        let mut pi = vec![S::zero(); 1 << self.n];
        for seg in self.segments() {
            if *t < seg.t0 {
                break;
            }
            let stop = *t < seg.t1;
            let upto = if stop { t.clone() } else { seg.t1.clone() };
            add_block_mass(&mut pi, seg.block, &seg.t0, &upto);
            if stop {
                break;
            }
        }
        let hat = pi.iter().fold(S::zero(), |a, b| a + b.clone());
        (pi, hat)
    }

    /// `(pi_{t-}, pihat_{t-})`; differs from [`eval`](Self::eval) only at jump instants.
    pub fn eval_left(&self, t: &S) -> (Vec<S>, S) {
        assert!(*t > S::zero() && *t <= S::one(), "left limits need t in (0,1]");
        if *t >= S::one() {
            return self.eval(t);
        }
        let mut pi = vec![S::zero(); 1 << self.n];
        for seg in self.segments() {
            if *t <= seg.t0 {
                break;
            }
            let stop = *t < seg.t1;
            let upto = if stop { t.clone() } else { seg.t1.clone() };
            add_block_mass(&mut pi, seg.block, &seg.t0, &upto);
            if stop {
                break;
            }
        }
        let hat = pi.iter().fold(S::zero(), |a, b| a + b.clone());
        (pi, hat)
    }

    pub fn convert<T: Scalar>(&self) -> AbsorptionPath<T> {
        let conv = |b: &PathBlock<S>| match b {
            PathBlock::Jump { xi } => PathBlock::Jump { xi: convert_vec(xi) },
            PathBlock::Flow { z, rho } => PathBlock::Flow { z: convert_vec(z), rho: convert(rho) },
        };
        AbsorptionPath {
            n: self.n,
            prefix: self.prefix.iter().map(conv).collect(),
            cycle: self.cycle.as_ref().map(|c| c.iter().map(conv).collect()),
            non_absorbing: self.non_absorbing,
        }
    }

    /// `eval` at many points.
    pub fn eval_many(&self, ts: &[S]) -> Vec<(Vec<S>, S)> {
        ts.iter().map(|t| self.eval(t)).collect()
    }

    /// `pi_1(a)`: total mass of each outcome, in closed form.
    pub fn pi_one(&self) -> Vec<S> {
        let mut pi = vec![S::zero(); 1 << self.n];
        let mut t = S::zero();
        for b in &self.prefix {
            let t1 = t.clone() + (S::one() - t.clone()) * b.prob();
            add_block_mass(&mut pi, b, &t, &t1);
            t = t1;
        }
        if let Some(cycle) = &self.cycle {
            // One period with unit remaining mass, then a geometric series.
            let mut unit = vec![S::zero(); 1 << self.n];
            let mut s = S::zero();
            for b in cycle {
                let s1 = s.clone() + (S::one() - s.clone()) * b.prob();
                add_block_mass(&mut unit, b, &s, &s1);
                s = s1;
            }
            let scale = (S::one() - t) / s;
            for (p, u) in pi.iter_mut().zip(unit) {
                *p = p.clone() + u * scale.clone();
            }
        }
        pi
    }

    /// Continuation payoff entering each block (the left limit at its start).
    pub fn block_payoffs(&self, game: &QuittingGame<S>) -> BlockPayoffs<S> {
        let n = self.n;
        let compose = |blocks: &[PathBlock<S>], end: Vec<S>| -> Vec<Vec<S>> {
            let mut out = vec![end];
            for b in blocks.iter().rev() {
                let (alpha, beta) = b.payoff_map(game);
                let next = out.last().unwrap();
                out.push(alpha.into_iter().zip(next).map(|(a, g)| a + beta.clone() * g.clone()).collect());
            }
            out.reverse();
            out
        };
        let (cycle_g, after_prefix) = match &self.cycle {
            Some(cycle) => {
                // Fixed point G = A + c G over one period.
                let mut a = vec![S::zero(); n];
                let mut c = S::one();
                for b in cycle.iter().rev() {
                    let (alpha, beta) = b.payoff_map(game);
                    a = alpha.into_iter().zip(&a).map(|(x, y)| x + beta.clone() * y.clone()).collect();
                    c = c * beta;
                }
                let start: Vec<S> = a.into_iter().map(|v| v / (S::one() - c.clone())).collect();
                let mut g = compose(cycle, start.clone());
                g.pop();
                (g, start)
            }
            None if self.non_absorbing => (vec![], game.continue_payoff().to_vec()),
            None => (vec![], vec![S::zero(); n]),
        };
        let mut prefix_g = compose(&self.prefix, after_prefix.clone());
        prefix_g.pop();
        BlockPayoffs { prefix: prefix_g, after_prefix, cycle: cycle_g }
    }

    /// `gamma_t`, right-continuous (post-jump inside a jump's span).
    pub fn payoff_path(&self, game: &QuittingGame<S>, t: &S) -> Result<Vec<S>> {
        self.payoff_at(game, t, false)
    }

    /// `gamma_{t-}`.
    pub fn payoff_path_left(&self, game: &QuittingGame<S>, t: &S) -> Result<Vec<S>> {
        self.payoff_at(game, t, true)
    }

    fn payoff_at(&self, game: &QuittingGame<S>, t: &S, left: bool) -> Result<Vec<S>> {
        let undefined = || Error::UndefinedAtOne { t: t.to_f64() };
        if *t >= S::one() || *t < S::zero() {
            return Err(undefined());
        }
        let g = self.block_payoffs(game);
        for seg in self.segments() {
            if *t >= seg.t1 {
                continue;
            }
            if *t < seg.t0 {
                break;
            }
            if left && *t == seg.t0 {
                return Ok(g.entering(seg.index).to_vec());
            }
            return Ok(match seg.block {
                PathBlock::Jump { .. } => {
                    if seg.block.is_terminal() {
                        return Err(undefined());
                    }
                    g.leaving(seg.index).to_vec()
                }
                PathBlock::Flow { z, .. } => flow_payoff(&flow_target(game, z), g.entering(seg.index), &seg.t0, t),
            });
        }
        if self.non_absorbing {
            Ok(game.continue_payoff().to_vec())
        } else {
            Err(undefined())
        }
    }

    /// Continuation path after absolute time `t`, rescaled to start at zero.
    pub fn shifted(&self, t: &S) -> Result<AbsorptionPath<S>> {
        if *t >= S::one() || *t < S::zero() {
            return Err(Error::InvalidPath("shift must lie in [0,1)".into()));
        }
        let Some(seg) = self.segments().find(|seg| *t < seg.t1) else {
            return Err(Error::UndefinedAtOne { t: t.to_f64() });
        };
        let at_start = *t == seg.t0;
        // The block containing `t`, restricted to what remains of it.
        let first = match seg.block {
            _ if at_start => Some(seg.block.clone()),
            PathBlock::Jump { .. } => None,
            PathBlock::Flow { z, rho } if *rho >= S::one() => Some(PathBlock::Flow { z: z.clone(), rho: S::one() }),
            PathBlock::Flow { z, .. } => {
                Some(PathBlock::Flow { z: z.clone(), rho: (seg.t1.clone() - t.clone()) / (S::one() - t.clone()) })
            }
        };
        match seg.index {
            BlockIndex::Prefix(k) => {
                let mut prefix: Vec<_> = first.into_iter().collect();
                prefix.extend(self.prefix[k + 1..].iter().cloned());
                Self::build(self.n, prefix, self.cycle.clone(), self.non_absorbing)
            }
            BlockIndex::Cycle(k) => {
                let c = self.cycle.as_ref().expect("cycle segment");
                let len = c.len();
                if at_start {
                    let rotated = (0..len).map(|d| c[(k + d) % len].clone()).collect();
                    return AbsorptionPath::new(self.n, vec![], Some(rotated));
                }
                let rotated = (1..=len).map(|d| c[(k + d) % len].clone()).collect();
                AbsorptionPath::new(self.n, first.into_iter().collect(), Some(rotated))
            }
        }
    }
}

/// `gamma_t = Rz + (gamma_{t0} - Rz)(1 - t0)/(1 - t)` along a flow.
pub fn flow_payoff<S: Scalar>(rz: &[S], g0: &[S], t0: &S, t: &S) -> Vec<S> {
    let ratio = (S::one() - t0.clone()) / (S::one() - t.clone());
    rz.iter().zip(g0).map(|(r, g)| r.clone() + (g.clone() - r.clone()) * ratio.clone()).collect()
}

fn add_block_mass<S: Scalar>(pi: &mut [S], block: &PathBlock<S>, t0: &S, upto: &S) {
    match block {
        PathBlock::Jump { xi } => {
            let scale = S::one() - t0.clone();
            for (mask, p) in profile_distribution(xi).into_iter().enumerate().skip(1) {
                pi[mask] = pi[mask].clone() + scale.clone() * p;
            }
        }
        PathBlock::Flow { z, .. } => {
            let dt = upto.clone() - t0.clone();
            for (i, zi) in z.iter().enumerate() {
                let m = ActionProfile::single(i).mask() as usize;
                pi[m] = pi[m].clone() + zi.clone() * dt.clone();
            }
        }
    }
}

pub struct SegmentIter<'a, S> {
    path: &'a AbsorptionPath<S>,
    next: usize,
    t: S,
    done: bool,
}

impl<'a, S: Scalar> Iterator for SegmentIter<'a, S> {
    type Item = Segment<'a, S>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let prefix_len = self.path.prefix.len();
        let (block, index) = if self.next < prefix_len {
            (&self.path.prefix[self.next], BlockIndex::Prefix(self.next))
        } else {
            let cycle = self.path.cycle.as_ref()?;
            let k = (self.next - prefix_len) % cycle.len();
            (&cycle[k], BlockIndex::Cycle(k))
        };
        self.next += 1;
        let t0 = self.t.clone();
        let t1 = if block.is_terminal() {
            self.done = true;
            S::one()
        } else {
            t0.clone() + (S::one() - t0.clone()) * block.prob()
        };
        self.t = t1.clone();
        Some(Segment { block, index, t0, t1 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPayoffs<S> {
    /// `gamma_{t0-}` for each prefix block.
    pub prefix: Vec<Vec<S>>,
    /// Payoff once the prefix is over: the cycle value, `r(C)` for a
    /// non-absorbing path, or zero after total absorption.
    pub after_prefix: Vec<S>,
    pub cycle: Vec<Vec<S>>,
}

impl<S> BlockPayoffs<S> {
    pub fn entering(&self, index: BlockIndex) -> &[S] {
        match index {
            BlockIndex::Prefix(k) => &self.prefix[k],
            BlockIndex::Cycle(k) => &self.cycle[k],
        }
    }

    /// Value right after the block (entering the next one).
    pub fn leaving(&self, index: BlockIndex) -> &[S] {
        match index {
            BlockIndex::Prefix(k) if k + 1 < self.prefix.len() => &self.prefix[k + 1],
            BlockIndex::Prefix(_) => &self.after_prefix,
            BlockIndex::Cycle(k) => &self.cycle[(k + 1) % self.cycle.len()],
        }
    }
}

/// Embeds an absorbing behavior profile: one jump per stage with `p > 0`.
pub fn from_profile(x: &BehaviorProfile) -> Result<AbsorptionPath<f64>> {
    if !profile_absorbs(x) {
        return Err(Error::NonAbsorbing("the profile continues forever with positive probability".into()));
    }
    let n = x.n();
    let mut prefix = Vec::new();
    let push = |blocks: &mut Vec<PathBlock<f64>>, xi: &Vec<f64>| -> bool {
        let p = absorb_prob(xi);
        if p > 0.0 {
            blocks.push(PathBlock::Jump { xi: xi.clone() });
        }
        p >= 1.0
    };
    for xi in x.prefix() {
        if push(&mut prefix, xi) {
            return AbsorptionPath::new(n, prefix, None);
        }
    }
    let cycle_stages: Vec<Vec<f64>> = match x.tail() {
        Tail::AllContinue => unreachable!("absorbing profiles end in a certain quit"),
        Tail::RepeatLast => vec![x.prefix().last().unwrap().clone()],
        Tail::Cycle(c) => c.clone(),
    };
    let mut cycle = Vec::new();
    for xi in &cycle_stages {
        if push(&mut cycle, xi) {
            // Certain absorption inside the first period: the path is finite.
            prefix.extend(cycle);
            return AbsorptionPath::new(n, prefix, None);
        }
    }
    AbsorptionPath::new(n, prefix, Some(cycle))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertCondition {
    /// A pure action beats the jump's mixed payoff.
    JumpGain,
    /// An action played at a jump loses against the mixed payoff.
    JumpLoss,
    /// The continuation payoff falls below the quitting payoff on a flow.
    BelowQuit,
    /// A player quitting on a flow has a continuation payoff above quitting.
    AboveQuit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCert<S> {
    pub player: usize,
    pub perfect: bool,
    /// Smallest epsilon for which every condition holds.
    pub required_eps: S,
    pub worst_t: Option<S>,
    pub worst_condition: Option<CertCondition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport<S> {
    pub eps: S,
    pub players: Vec<PlayerCert<S>>,
}

impl<S: Scalar> CertReport<S> {
    pub fn perfect(&self) -> bool {
        self.players.iter().all(|p| p.perfect)
    }

    pub fn required_eps(&self) -> S {
        self.players.iter().fold(S::zero(), |a, p| S::max_of(a, p.required_eps.clone()))
    }
}

/// Sequential epsilon-perfectness of a path.
///
/// Jumps are checked as one-shot games against the post-jump payoff. On a flow
/// every `gamma^j` is affine in `1/(1-t)`, so its extremes are at the block's
/// ends and checking both endpoints is exact.
pub fn certify<S: Scalar>(game: &QuittingGame<S>, path: &AbsorptionPath<S>, eps: &S) -> Result<CertReport<S>> {
    if game.n() != path.n() {
        return Err(Error::InvalidPath(format!("path has {} players, game has {}", path.n(), game.n())));
    }
    if path.is_non_absorbing() {
        return Err(Error::InvalidPath("non-absorbing paths are not certified".into()));
    }
    let n = game.n();
    let g = path.block_payoffs(game);
    let mut worst: Vec<(S, Option<S>, Option<CertCondition>)> = vec![(S::zero(), None, None); n];
    let mut record = |i: usize, margin: S, t: &S, cond: CertCondition| {
        if margin > worst[i].0 || (worst[i].1.is_none() && margin > S::zero()) {
            worst[i] = (margin, Some(t.clone()), Some(cond));
        }
    };
    let count = path.prefix().len() + path.cycle().map_or(0, <[_]>::len);
    for seg in path.segments().take(count) {
        match seg.block {
            PathBlock::Jump { xi } => {
                let os = OneShotGame::new(game, g.leaving(seg.index).to_vec());
                for i in 0..n {
                    let v = os.is_eps_perfect(xi, i, &S::zero());
                    for viol in v.violations {
                        let cond = match viol.condition {
                            Condition::Gain => CertCondition::JumpGain,
                            Condition::Loss => CertCondition::JumpLoss,
                        };
                        record(i, viol.margin, &seg.t0, cond);
                    }
                }
            }
            PathBlock::Flow { z, .. } => {
                let rz = flow_target(game, z);
                let start = g.entering(seg.index).to_vec();
                let end = if seg.block.is_terminal() { rz.clone() } else { g.leaving(seg.index).to_vec() };
                debug_assert!(flow_is_monotone(&rz, &start, &end, &seg.t0, &seg.t1));
                for i in 0..n {
                    let quit = game.single_quit(i)[i].clone();
                    for (gamma, t) in [(&start, &seg.t0), (&end, &seg.t1)] {
                        record(i, quit.clone() - gamma[i].clone(), t, CertCondition::BelowQuit);
                        if !z[i].is_zero() {
                            record(i, gamma[i].clone() - quit.clone(), t, CertCondition::AboveQuit);
                        }
                    }
                }
            }
        }
    }
    let players = worst
        .into_iter()
        .enumerate()
        .map(|(player, (required_eps, worst_t, worst_condition))| PlayerCert {
            player,
            perfect: required_eps <= *eps,
            required_eps,
            worst_t,
            worst_condition,
        })
        .collect();
    Ok(CertReport { eps: eps.clone(), players })
}

/// The interior midpoint of a flow lies between its endpoint values.
fn flow_is_monotone<S: Scalar>(rz: &[S], start: &[S], end: &[S], t0: &S, t1: &S) -> bool {
    if S::EXACT || *t1 >= S::one() {
        return true;
    }
    let two = S::from_i64(2);
    let mid = flow_payoff(rz, start, t0, &((t0.clone() + t1.clone()) / two));
    mid.iter().zip(start).zip(end).all(|((m, a), b)| {
        let lo = S::min_of(a.clone(), b.clone());
        let hi = S::max_of(a.clone(), b.clone());
        let slack = S::from_f64(1e-9) * (S::one() + hi.abs() + lo.abs());
        *m >= lo - slack.clone() && *m <= hi + slack
    })
}

/// `sup_t ||pi^a_t - pi^b_t||_inf` over the grid.
pub fn weak_distance<S: Scalar, T: Scalar>(a: &AbsorptionPath<S>, b: &AbsorptionPath<T>, grid: &[f64]) -> f64 {
    assert_eq!(a.n(), b.n(), "paths must have the same number of players");
    grid.iter()
        .map(|&t| {
            let (pa, _) = a.eval(&S::from_f64(t));
            let (pb, _) = b.eval(&T::from_f64(t));
            pa.iter().zip(&pb).map(|(x, y)| (x.to_f64() - y.to_f64()).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// CSV with header `t,pi[<quitters>]...,gamma[<player>]...`. The gamma columns need a
/// game and are blank where the payoff path is undefined.
pub fn to_csv<S: Scalar>(game: Option<&QuittingGame<S>>, path: &AbsorptionPath<S>, grid: &[S]) -> String {
    let n = path.n();
    let mut out = String::from("t");
    for mask in 1u32..(1 << n) {
        let _ = write!(out, ",pi[{}]", ActionProfile(mask).label());
    }
    for i in (0..n).filter(|_| game.is_some()) {
        let _ = write!(out, ",gamma[{}]", i + 1);
    }
    out.push('\n');
    for t in grid {
        let (pi, _) = path.eval(t);
        let _ = write!(out, "{}", t.to_f64());
        for v in &pi[1..] {
            let _ = write!(out, ",{}", v.to_f64());
        }
        match game.map(|g| path.payoff_path(g, t)) {
            Some(Ok(gamma)) => gamma.iter().for_each(|v| {
                let _ = write!(out, ",{}", v.to_f64());
            }),
            Some(Err(_)) => out.push_str(&",".repeat(n)),
            None => {}
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn ri(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| Rational::from_i64(x)).collect()
    }

    fn ftv3() -> QuittingGame<Rational> {
        QuittingGame::with_min_minus_one(&[ri(&[0, 2, -1]), ri(&[-1, 0, 2]), ri(&[2, -1, 0])], ri(&[0, 0, 0]))
            .unwrap()
    }

    fn flow(i: usize, rho: Rational) -> PathBlock<Rational> {
        let mut z = ri(&[0, 0, 0]);
        z[i] = q(1, 1);
        PathBlock::Flow { z, rho }
    }

    fn ftv_cycle() -> AbsorptionPath<Rational> {
        AbsorptionPath::new(3, vec![], Some(vec![flow(0, q(1, 2)), flow(1, q(1, 2)), flow(2, q(1, 2))])).unwrap()
    }

    #[test]
    fn jump_spans_and_two_player_example() {
        let p = AbsorptionPath::new(
            2,
            vec![PathBlock::Jump { xi: vec![q(1, 3), q(1, 4)] }, PathBlock::Jump { xi: vec![q(1, 1), q(0, 1)] }],
            None,
        )
        .unwrap();
        let times = p.absolute_times(0);
        assert_eq!(times[0], (q(0, 1), q(1, 2)));
        assert_eq!(times[1], (q(1, 2), q(1, 1)));
        let (pi, hat) = p.eval(&q(0, 1));
        assert_eq!(pi[1], q(1, 4));
        assert_eq!(pi[2], q(1, 6));
        assert_eq!(pi[3], q(1, 12));
        assert_eq!(hat, q(1, 2));
        // Inside the span the value is frozen at the post-jump state.
        assert_eq!(p.eval(&q(1, 3)).0, pi);
        assert_eq!(p.eval(&q(1, 1)).1, q(1, 1));
    }

    #[test]
    fn certain_jump_spans_everything() {
        let p = AbsorptionPath::new(2, vec![PathBlock::Jump { xi: vec![q(1, 1), q(1, 2)] }], None).unwrap();
        assert_eq!(p.absolute_times(0), vec![(q(0, 1), q(1, 1))]);
    }

    #[test]
    fn cycle_breakpoints_halve() {
        let p = ftv_cycle();
        let starts: Vec<Rational> = p.absolute_times(2).into_iter().map(|(a, _)| a).collect();
        assert_eq!(starts[..4], [q(0, 1), q(1, 2), q(3, 4), q(7, 8)]);
        // Flow spans keep pihat_t = t.
        assert_eq!(p.eval(&q(5, 8)).1, q(5, 8));
    }

    #[test]
    fn total_mass_matches_geometric_series() {
        let pi = ftv_cycle().pi_one();
        assert_eq!(pi[1], q(4, 7));
        assert_eq!(pi[2], q(2, 7));
        assert_eq!(pi[4], q(1, 7));
        assert_eq!(pi[3], q(0, 1));
    }

    #[test]
    fn ftv_cycle_payoffs() {
        let g = ftv3();
        let p = ftv_cycle();
        assert_eq!(p.payoff_path(&g, &q(0, 1)).unwrap(), ri(&[0, 1, 0]));
        assert_eq!(p.payoff_path(&g, &q(1, 2)).unwrap(), ri(&[0, 0, 1]));
        assert_eq!(p.payoff_path(&g, &q(3, 4)).unwrap(), ri(&[1, 0, 0]));
        // gamma^2 = 2 - 1/(1-t) and gamma^3 = -1 + 1/(1-t) on [0, 1/2).
        let t = q(1, 3);
        let inv = q(1, 1) / (q(1, 1) - t.clone());
        assert_eq!(p.payoff_path(&g, &t).unwrap(), vec![q(0, 1), q(2, 1) - inv.clone(), q(-1, 1) + inv]);
    }

    #[test]
    fn ftv_cycle_is_zero_perfect_from_any_start() {
        let g = ftv3();
        let p = ftv_cycle();
        let report = certify(&g, &p, &q(0, 1)).unwrap();
        assert!(report.perfect());
        assert_eq!(report.required_eps(), q(0, 1));
        for t in [q(1, 5), q(1, 2), q(2, 3), q(7, 8)] {
            let shifted = p.shifted(&t).unwrap();
            assert!(certify(&g, &shifted, &q(0, 1)).unwrap().perfect(), "start {t}");
        }
    }

    #[test]
    fn dipping_flow_is_reported() {
        // Player 2 quits forever: player 3 gets -1 from the start but its quit pays 0.
        let g = ftv3();
        let p = AbsorptionPath::new(3, vec![flow(1, q(1, 1))], None).unwrap();
        let report = certify(&g, &p, &q(1, 2)).unwrap();
        let p1 = &report.players[0];
        assert!(!p1.perfect);
        assert_eq!(p1.required_eps, q(1, 1));
        assert_eq!(p1.worst_condition, Some(CertCondition::BelowQuit));
        assert_eq!(p1.worst_t, Some(q(0, 1)));
    }

    #[test]
    fn single_outcome_path_has_constant_payoff() {
        let g = ftv3();
        let p = AbsorptionPath::new(3, vec![flow(0, q(1, 1))], None).unwrap();
        for t in [q(0, 1), q(1, 2), q(99, 100)] {
            assert_eq!(p.payoff_path(&g, &t).unwrap(), ri(&[0, 2, -1]));
        }
        assert!(p.payoff_path(&g, &q(1, 1)).is_err());
    }

    #[test]
    fn rejects_malformed_paths() {
        assert!(AbsorptionPath::new(3, vec![flow(0, q(1, 2))], None).is_err());
        assert!(AbsorptionPath::non_absorbing(3, vec![flow(0, q(1, 2))]).is_ok());
        assert!(AbsorptionPath::new(3, vec![flow(0, q(1, 1)), flow(1, q(1, 2))], None).is_err());
        assert!(AbsorptionPath::new(3, vec![], Some(vec![flow(0, q(1, 1))])).is_err());
        assert!(AbsorptionPath::new(3, vec![PathBlock::Jump { xi: ri(&[0, 0, 0]) }], None).is_err());
    }

    #[test]
    fn profile_embedding_skips_idle_stages() {
        let x = BehaviorProfile::new(2, vec![vec![1.0, 0.0]], Tail::AllContinue).unwrap();
        let p = from_profile(&x).unwrap();
        assert_eq!(p.absolute_times(0), vec![(0.0, 1.0)]);
        let idle = BehaviorProfile::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], Tail::AllContinue).unwrap();
        assert_eq!(from_profile(&idle).unwrap(), p);
        let half = BehaviorProfile::stationary(vec![0.5, 0.0]).unwrap();
        let starts: Vec<f64> = from_profile(&half).unwrap().absolute_times(3).into_iter().map(|(a, _)| a).collect();
        assert_eq!(starts, vec![0.0, 0.5, 0.75, 0.875]);
        let never = BehaviorProfile::new(2, vec![vec![0.5, 0.0]], Tail::AllContinue).unwrap();
        assert!(matches!(from_profile(&never), Err(Error::NonAbsorbing(_))));
    }
}
