//! Construction of continuous equilibria: absorption paths made of flow
//! blocks whose payoff path stays on the boundary `Y` of the nonnegative
//! orthant (normalized games, so quitting pays zero to the quitter).
//!
//! The construction runs backward in path time. Going backward over a flow
//! block with direction `z` and conditional length `rho`, the payoff moves
//! affinely toward `Rz`:
//!
//! `gamma_start = rho Rz + (1 - rho) gamma_end`.
//!
//! A direction is admissible at `gamma` when `(Rz)_j >= 0` for every `j` with
//! `gamma^j = 0` and `(Rz)_i = 0` whenever `z_i > 0`. The block ends (in
//! backward time) as soon as another coordinate reaches zero. A repeated
//! state, or a repeating pattern of directions whose payoff map has a fixed
//! point, closes a cycle and yields an infinite periodic path.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Matrix, QuittingGame};
use crate::lcp::{principal_minors_q, step1_direction, QConfig};
use crate::linalg;
use crate::path::{certify, flow_payoff, AbsorptionPath, CertReport, PathBlock};
use crate::scalar::{approximate_rational, rational_to_f64, Rational, Scalar};

/// A point on a forward flow block.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<S> {
    /// Absolute path time.
    pub u: S,
    pub gamma: Vec<S>,
    /// Coordinates with `gamma^j = 0`, as a bitmask.
    pub active: u32,
    pub z: Vec<S>,
}

impl<S: Scalar> FlowState<S> {
    pub fn new(u: S, gamma: Vec<S>, z: Vec<S>) -> Self {
        let active = zero_mask(&gamma);
        FlowState { u, gamma, active, z }
    }
}

fn zero_mask<S: Scalar>(gamma: &[S]) -> u32 {
    gamma.iter().enumerate().filter(|(_, v)| v.is_negligible()).fold(0, |m, (j, _)| m | (1 << j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEvent<S> {
    /// Absolute time of the event.
    pub u: S,
    /// Conditional length of the block up to the event.
    pub rho: S,
    /// State at the event, with the enlarged active set.
    pub next: FlowState<S>,
}

/// Integrates a forward flow block in closed form up to the first time an
/// inactive coordinate of `gamma` reaches zero. `Ok(None)` means the state is
/// stationary (`gamma = Rz`), so the block lasts forever.
pub fn flow_segment<S: Scalar>(game: &QuittingGame<S>, state: &FlowState<S>) -> Result<Option<FlowEvent<S>>> {
    let r = game.quit_matrix();
    let rz = r.mul_vec(&state.z);
    // gamma = Rz + lambda (gamma_0 - Rz), lambda = (1-u0)/(1-u) >= 1.
    let mut best: Option<S> = None;
    for (j, (g, t)) in state.gamma.iter().zip(&rz).enumerate() {
        if state.active & (1 << j) != 0 {
            continue;
        }
        if *t > g.clone() && *t > S::zero() {
            let lambda = t.clone() / (t.clone() - g.clone());
            if best.as_ref().is_none_or(|b| lambda < *b) {
                best = Some(lambda);
            }
        }
    }
    let stationary = state.gamma.iter().zip(&rz).all(|(g, t)| (g.clone() - t.clone()).is_negligible());
    let Some(lambda) = best else {
        return if stationary { Ok(None) } else { Err(Error::Divergence) };
    };
    let one = S::one();
    let rho = one.clone() - one.clone() / lambda.clone();
    let u = state.u.clone() + (one.clone() - state.u.clone()) * rho.clone();
    let mut gamma = flow_payoff(&rz, &state.gamma, &state.u, &u);
    for g in gamma.iter_mut().filter(|g| g.is_negligible()) {
        *g = S::zero();
    }
    let next = FlowState { u: u.clone(), active: zero_mask(&gamma), gamma, z: state.z.clone() };
    Ok(Some(FlowEvent { u, rho, next }))
}

/// One backward block: `Some((rho, gamma_start))`, or `None` when no
/// coordinate reaches zero (the block can be extended to all of `[0, t)`).
pub fn reverse_step<S: Scalar>(r: &Matrix<S>, gamma_end: &[S], z: &[S]) -> Option<(S, Vec<S>)> {
    let rz = r.mul_vec(z);
    let mut rho: Option<S> = None;
    let mut hit = Vec::new();
    for (j, (g, t)) in gamma_end.iter().zip(&rz).enumerate() {
        if *g > S::zero() && !g.is_negligible() && *t < S::zero() {
            let cand = g.clone() / (g.clone() - t.clone());
            match &rho {
                Some(best) if cand > *best => {}
                Some(best) if cand == *best => hit.push(j),
                _ => {
                    rho = Some(cand);
                    hit = vec![j];
                }
            }
        }
    }
    let rho = rho?;
    let mut start: Vec<S> = rz
        .iter()
        .zip(gamma_end)
        .map(|(t, g)| rho.clone() * t.clone() + (S::one() - rho.clone()) * g.clone())
        .collect();
    for j in hit {
        start[j] = S::zero();
    }
    for v in start.iter_mut() {
        if v.is_negligible() {
            *v = S::zero();
        }
    }
    Some((rho, start))
}

fn is_admissible<S: Scalar>(r: &Matrix<S>, active: u32, z: &[S]) -> bool {
    let rz = r.mul_vec(z);
    z.iter().enumerate().all(|(i, zi)| zi.is_zero() || (active & (1 << i) != 0 && rz[i].is_negligible()))
        && rz.iter().enumerate().all(|(j, v)| active & (1 << j) == 0 || *v >= S::zero() || v.is_negligible())
}

/// Admissible directions at a state with zero set `active`, in search order:
/// single quitters by index, then Step-1 LCP directions by `i0`, then any
/// remaining complementary mixtures by support.
pub fn directions<S: Scalar>(r: &Matrix<S>, active: u32) -> Vec<Vec<S>> {
    let n = r.rows();
    let j_set: Vec<usize> = (0..n).filter(|j| active & (1 << j) != 0).collect();
    let mut out: Vec<Vec<S>> = Vec::new();
    let push = |z: Vec<S>, out: &mut Vec<Vec<S>>| {
        if is_admissible(r, active, &z) && !out.contains(&z) {
            out.push(z);
        }
    };
    for &i in &j_set {
        let mut z = vec![S::zero(); n];
        z[i] = S::one();
        push(z, &mut out);
    }
    for &i0 in &j_set {
        if let Ok(zj) = step1_direction(r, &j_set, i0) {
            let mut z = vec![S::zero(); n];
            for (&j, v) in j_set.iter().zip(zj) {
                z[j] = v;
            }
            push(z, &mut out);
        }
    }
    let m = j_set.len();
    for sub in 1u32..(1 << m) {
        if sub.count_ones() < 2 {
            continue;
        }
        let support: Vec<usize> = (0..m).filter(|k| sub & (1 << k) != 0).map(|k| j_set[k]).collect();
        let mut a: Vec<Vec<S>> = support.iter().map(|&j| support.iter().map(|&i| r.get(j, i).clone()).collect()).collect();
        let mut b = vec![S::zero(); support.len()];
        a.push(vec![S::one(); support.len()]);
        b.push(S::one());
        let Some(x) = linalg::solve(&a, &b) else { continue };
        if x.iter().any(|v| *v <= S::zero() || v.is_negligible()) {
            continue;
        }
        let mut z = vec![S::zero(); n];
        for (&j, v) in support.iter().zip(x) {
            z[j] = v;
        }
        push(z, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub max_events: usize,
    pub backtrack_budget: usize,
    /// Longest direction pattern considered when closing a cycle.
    pub max_period: usize,
    /// Denominator bound when recognizing an exact rational fixed point.
    pub max_denominator: i64,
    /// Q-matrix test of every principal minor before searching.
    pub q_check: Option<QConfig>,
    /// Certification tolerance at epsilon = 0.
    pub cert_tol: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            max_events: 600,
            backtrack_budget: 200,
            max_period: 12,
            max_denominator: 1_000_000,
            q_check: Some(QConfig { seed: 0, samples: 1000 }),
            cert_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleCertificate {
    /// Cycle blocks in forward time order.
    pub blocks: Vec<PathBlock<Rational>>,
    /// Payoff at the start of the cycle; a fixed point of the cycle's payoff map.
    pub gamma: Vec<Rational>,
    /// True when `gamma` is an exact rational fixed point.
    pub exact: bool,
    /// `max |Phi(gamma) - gamma|` for the backward cycle map `Phi`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub path: AbsorptionPath<Rational>,
    pub certificate: Option<CycleCertificate>,
    pub report: CertReport<Rational>,
    pub start: Vec<Rational>,
    pub events: usize,
    pub backtracks: usize,
}

impl SynthesisResult {
    /// `(quitters, rho)` for each block of the path's prefix and cycle.
    pub fn summary(&self) -> Vec<BlockSummary> {
        let describe = |b: &PathBlock<Rational>, in_cycle: bool| match b {
            PathBlock::Flow { z, rho } => BlockSummary {
                players: z.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, _)| i + 1).collect(),
                rho: rational_to_f64(rho),
                rho_exact: crate::scalar::format_rational(rho),
                in_cycle,
            },
            PathBlock::Jump { xi } => BlockSummary {
                players: xi.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, _)| i + 1).collect(),
                rho: rational_to_f64(&b.prob()),
                rho_exact: crate::scalar::format_rational(&b.prob()),
                in_cycle,
            },
        };
        let mut out: Vec<_> = self.path.prefix().iter().map(|b| describe(b, false)).collect();
        out.extend(self.path.cycle().unwrap_or(&[]).iter().map(|b| describe(b, true)));
        out
    }

    /// Players quitting in each cycle block (single-quitter blocks only).
    pub fn cycle_order(&self) -> Vec<Vec<usize>> {
        self.summary().into_iter().filter(|s| s.in_cycle).map(|s| s.players).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSummary {
    /// 1-based quitting players.
    pub players: Vec<usize>,
    pub rho: f64,
    pub rho_exact: String,
    pub in_cycle: bool,
}

fn check_preconditions(game: &QuittingGame<Rational>, cfg: &SynthesisConfig) -> Result<()> {
    if !game.is_normalized() {
        return Err(Error::Precondition("synthesis needs a normalized game (r^i(Q^i) = 0)".into()));
    }
    if let Some(qcfg) = &cfg.q_check {
        for (idx, verdict) in principal_minors_q(&game.quit_matrix(), qcfg) {
            if !verdict.passed() {
                let set: Vec<usize> = idx.iter().map(|i| i + 1).collect();
                return Err(Error::Precondition(format!("principal minor {set:?} of R is not a Q-matrix")));
            }
        }
    }
    Ok(())
}

/// Builds a certified path whose payoff at the end of the construction (the
/// latest time considered) is `start`. Without a start, the battery of
/// [`scan_points`] is tried in order.
pub fn synthesize(game: &QuittingGame<Rational>, start: Option<&[Rational]>, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    check_preconditions(game, cfg)?;
    match start {
        Some(s) => search(game, s, cfg),
        None => {
            let mut last = Error::BudgetExhausted { events: 0, backtracks: 0 };
            for s in scan_points(game) {
                match search(game, &s, cfg) {
                    Ok(res) => return Ok(res),
                    Err(e) => last = e,
                }
            }
            Err(last)
        }
    }
}

struct Frame {
    gamma: Vec<Rational>,
    active: u32,
    candidates: Vec<Vec<Rational>>,
    next: usize,
}

impl Frame {
    fn new(r: &Matrix<Rational>, gamma: Vec<Rational>) -> Self {
        let active = zero_mask(&gamma);
        Frame { candidates: directions(r, active), gamma, active, next: 0 }
    }
}

fn search(game: &QuittingGame<Rational>, start: &[Rational], cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    let n = game.n();
    if start.len() != n {
        return Err(Error::Precondition(format!("start has {} coordinates, expected {n}", start.len())));
    }
    if start.iter().any(|v| *v < Rational::zero()) || !start.iter().any(|v| v.is_zero()) {
        return Err(Error::Precondition("start must lie on the boundary of the nonnegative orthant".into()));
    }
    let r = game.quit_matrix();
    let mut stack = vec![Frame::new(&r, start.to_vec())];
    // blocks[k] leads (backward) from stack[k] to stack[k + 1].
    let mut blocks: Vec<(Vec<Rational>, Rational)> = Vec::new();
    let (mut events, mut backtracks) = (0usize, 0usize);
    let finish = |path: AbsorptionPath<Rational>, certificate: Option<CycleCertificate>, events, backtracks| {
        let report = certify(game, &path, &Rational::zero())?;
        if report.required_eps().to_f64() > cfg.cert_tol {
            return Ok(None);
        }
        Ok(Some(SynthesisResult { path, certificate, report, start: start.to_vec(), events, backtracks }))
    };
    loop {
        if events >= cfg.max_events || backtracks > cfg.backtrack_budget {
            return Err(Error::BudgetExhausted { events, backtracks });
        }
        let top = stack.last_mut().expect("stack is never empty here");
        if top.next >= top.candidates.len() {
            stack.pop();
            backtracks += 1;
            if stack.is_empty() {
                return Err(Error::BudgetExhausted { events, backtracks });
            }
            blocks.pop();
            continue;
        }
        let z = top.candidates[top.next].clone();
        top.next += 1;
        events += 1;
        let Some((rho, gamma)) = reverse_step(&r, &top.gamma, &z) else {
            // No coordinate ever reaches zero: this direction alone is an equilibrium.
            let path = AbsorptionPath::new(n, vec![PathBlock::Flow { z, rho: Rational::one() }], None)?;
            match finish(path, None, events, backtracks)? {
                Some(res) => return Ok(res),
                None => continue,
            }
        };
        blocks.push((z, rho));
        stack.push(Frame::new(&r, gamma));

        if let Some(res) = close_exact(game, &stack, &blocks) {
            if let Some(done) = finish(res.0, Some(res.1), events, backtracks)? {
                return Ok(done);
            }
        }
        for period in 1..=cfg.max_period.min(blocks.len() / 2) {
            let len = blocks.len();
            let same = (0..period).all(|k| {
                let (a, b) = (len - period + k, len - 2 * period + k);
                stack[a].active == stack[b].active && blocks[a].0 == blocks[b].0
            });
            if !same {
                continue;
            }
            let pattern: Vec<(u32, Vec<Rational>)> = (len - period..len).map(|k| (stack[k].active, blocks[k].0.clone())).collect();
            if let Some(cert) = close_fixed_point(game, &pattern, &stack.last().unwrap().gamma, cfg) {
                let path = AbsorptionPath::new(n, vec![], Some(cert.blocks.clone()))?;
                if let Some(done) = finish(path, Some(cert), events, backtracks)? {
                    return Ok(done);
                }
            }
        }
    }
}

/// Cycle from an exactly repeated state.
fn close_exact(game: &QuittingGame<Rational>, stack: &[Frame], blocks: &[(Vec<Rational>, Rational)]) -> Option<(AbsorptionPath<Rational>, CycleCertificate)> {
    let last = &stack.last()?.gamma;
    let k = stack[..stack.len() - 1].iter().position(|f| f.gamma == *last)?;
    let forward: Vec<PathBlock<Rational>> =
        blocks[k..].iter().rev().map(|(z, rho)| PathBlock::Flow { z: z.clone(), rho: rho.clone() }).collect();
    let path = AbsorptionPath::new(game.n(), vec![], Some(forward.clone())).ok()?;
    Some((path, CycleCertificate { blocks: forward, gamma: last.clone(), exact: true, residual: 0.0 }))
}

/// Applies a direction pattern backward, checking the zero sets along the way.
fn apply_pattern<S: Scalar>(r: &Matrix<S>, pattern: &[(u32, Vec<S>)], gamma: &[S]) -> Option<(Vec<S>, Vec<S>)> {
    let mut g = gamma.to_vec();
    let mut rhos = Vec::with_capacity(pattern.len());
    for (active, z) in pattern {
        if zero_mask(&g) != *active {
            return None;
        }
        let (rho, next) = reverse_step(r, &g, z)?;
        rhos.push(rho);
        g = next;
    }
    Some((g, rhos))
}

/// Fixed point of the backward payoff map of a repeating direction pattern:
/// iterated in `f64`, then recognized as a small-denominator rational and
/// verified exactly. Falls back to the exact image of the `f64` fixed point.
fn close_fixed_point(game: &QuittingGame<Rational>, pattern: &[(u32, Vec<Rational>)], gamma: &[Rational], cfg: &SynthesisConfig) -> Option<CycleCertificate> {
    let r = game.quit_matrix();
    let rf: Matrix<f64> = r.convert();
    let pattern_f: Vec<(u32, Vec<f64>)> = pattern.iter().map(|(a, z)| (*a, z.iter().map(rational_to_f64).collect())).collect();
    let mut g: Vec<f64> = gamma.iter().map(rational_to_f64).collect();
    let mut converged = false;
    for _ in 0..20_000 {
        let (next, _) = apply_pattern(&rf, &pattern_f, &g)?;
        let delta = next.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        g = next;
        if delta <= 1e-15 * (1.0 + g.iter().fold(0.0, |m: f64, v| m.max(v.abs()))) {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let candidates = [
        g.iter().map(|&v| if v == 0.0 { Some(Rational::zero()) } else { approximate_rational(v, cfg.max_denominator) }).collect::<Option<Vec<_>>>(),
        Some(g.iter().map(|&v| Rational::from_f64(v)).collect()),
    ];
    for (attempt, cand) in candidates.into_iter().enumerate() {
        let Some(g_star) = cand else { continue };
        let Some((image, rhos)) = apply_pattern(&r, pattern, &g_star) else { continue };
        let residual = image.iter().zip(&g_star).map(|(a, b)| rational_to_f64(&(a.clone() - b.clone())).abs()).fold(0.0, f64::max);
        let exact = image == g_star;
        if attempt == 0 && !exact {
            continue;
        }
        if residual > 1e-12 {
            return None;
        }
        let forward: Vec<PathBlock<Rational>> = pattern
            .iter()
            .zip(rhos)
            .rev()
            .map(|((_, z), rho)| PathBlock::Flow { z: z.clone(), rho })
            .collect();
        return Some(CycleCertificate { blocks: forward, gamma: g_star, exact, residual });
    }
    None
}

/// Orthant-boundary vertices and edge midpoints of `[0, M]^n`, `M` the payoff bound.
pub fn scan_points(game: &QuittingGame<Rational>) -> Vec<Vec<Rational>> {
    let n = game.n();
    let m = {
        let b = game.bound();
        if b.is_zero() {
            Rational::one()
        } else {
            b
        }
    };
    let half = m.clone() / Rational::from_i64(2);
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let vertex: Vec<Rational> = (0..n).map(|i| if mask & (1 << i) != 0 { m.clone() } else { Rational::zero() }).collect();
        if vertex.iter().any(Zero::is_zero) {
            out.push(vertex.clone());
        }
        for i in 0..n {
            if mask & (1 << i) == 0 {
                continue;
            }
            let mut mid = vertex.clone();
            mid[i] = half.clone();
            if mid.iter().any(Zero::is_zero) {
                out.push(mid);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Distinct certified paths, in start order.
    pub paths: Vec<SynthesisResult>,
    /// Starts where the search failed.
    pub failures: Vec<(Vec<Rational>, Error)>,
}

/// Runs the search from every scan point and keeps one path per cycle up to rotation.
pub fn scan_starts(game: &QuittingGame<Rational>, cfg: &SynthesisConfig) -> Result<ScanResult> {
    check_preconditions(game, cfg)?;
    let starts = scan_points(game);
    let results: Vec<Result<SynthesisResult>> = starts.par_iter().map(|s| search(game, s, cfg)).collect();
    let mut seen = Vec::new();
    let mut out = ScanResult { paths: Vec::new(), failures: Vec::new() };
    for (start, res) in starts.into_iter().zip(results) {
        match res {
            Ok(res) => {
                let key = canonical_key(&res.path);
                if !seen.contains(&key) {
                    seen.push(key);
                    out.paths.push(res);
                }
            }
            Err(e) => out.failures.push((start, e)),
        }
    }
    Ok(out)
}

/// Block list up to rotation of the cycle.
pub fn canonical_key(path: &AbsorptionPath<Rational>) -> Vec<String> {
    let key = |b: &PathBlock<Rational>| match b {
        PathBlock::Flow { z, rho } => format!("flow{:?}@{rho}", z.iter().map(ToString::to_string).collect::<Vec<_>>()),
        PathBlock::Jump { xi } => format!("jump{:?}", xi.iter().map(ToString::to_string).collect::<Vec<_>>()),
    };
    let mut out: Vec<String> = path.prefix().iter().map(key).collect();
    if let Some(cycle) = path.cycle() {
        let keys: Vec<String> = cycle.iter().map(key).collect();
        let best = (0..keys.len())
            .map(|s| keys[s..].iter().chain(&keys[..s]).cloned().collect::<Vec<_>>())
            .min()
            .unwrap_or_default();
        out.push("cycle".into());
        out.extend(best);
    }
    out
}
