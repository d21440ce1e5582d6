//! From absorption paths back to behavior profiles.
//!
//! The grid advances by conditional steps of `1/k`: from `s` the next point is
//! the furthest point of the path's jump and flow instants below
//! `s + (1 - s)/k`, except that a jump with `p >= 1/k` is a grid interval of
//! its own. A jump interval plays the jump's mixed action; any other interval
//! plays the mixed action that reproduces its absorbed mass with quit ratios
//! proportional to the single-quitter masses.
//!
//! [`GridMode::Aligned`] instead cuts every flow block into equal steps of at
//! most `1/k` and keeps jumps whole, so a cyclic path yields a cyclic profile.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{absorb_prob, profile_distribution};
use crate::path::{AbsorptionPath, PathBlock};
use crate::scalar::Scalar;
use crate::strategy::{BehaviorProfile, Tail};

/// Residual mass below which grids and bound checks stop.
pub const RESIDUAL_MASS: f64 = 1e-9;

/// Mixed action with `p(xi) = p(y)` and `xi^i / xi^j = y(Q^i) / y(Q^j)`.
///
/// `y` is indexed by quitter mask; entry 0 is ignored. The hypotheses are
/// `p(y) <= eps0` and `y(a) <= eps0 * y(Q^i)` for every multi-quitter `a`
/// containing `i`.
pub fn lemma_xi(y: &[f64], eps0: f64) -> Result<Vec<f64>> {
    let n = y.len().trailing_zeros() as usize;
    if y.len() != 1 << n || n == 0 {
        return Err(Error::Hypothesis("y must be indexed by quitter masks".into()));
    }
    let p: f64 = y[1..].iter().sum();
    if y[1..].iter().any(|v| *v < 0.0) || p > 1.0 {
        return Err(Error::Hypothesis("y must be a sub-probability vector".into()));
    }
    if p > eps0 {
        return Err(Error::Hypothesis(format!("p(y) = {p} exceeds {eps0}")));
    }
    let single: Vec<f64> = (0..n).map(|i| y[1 << i]).collect();
    for (mask, &v) in y.iter().enumerate().skip(1) {
        if mask.count_ones() >= 2 {
            if let Some(i) = (0..n).find(|i| mask & (1 << i) != 0 && v > eps0 * single[*i]) {
                return Err(Error::Hypothesis(format!("multi-quit mass {v} too large relative to player {}", i + 1)));
            }
        }
    }
    if p == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let total: f64 = single.iter().sum();
    let w: Vec<f64> = single.iter().map(|v| v / total).collect();
    if w.iter().filter(|v| **v > 0.0).count() == 1 {
        return Ok(w.iter().map(|v| if *v > 0.0 { p } else { 0.0 }).collect());
    }
    // p(zeta w) is increasing in zeta; p(p w) <= p and p(w / max w) = 1.
    let absorb = |zeta: f64| 1.0 - w.iter().map(|wi| 1.0 - zeta * wi).product::<f64>();
    let (mut lo, mut hi) = (p, 1.0 / w.iter().cloned().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if absorb(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let zeta = 0.5 * (lo + hi);
    Ok(w.iter().map(|wi| (zeta * wi).min(1.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// A jump with `p(xi) >= 1/k`, played as is.
    BigJump,
    /// A flow step, or a jump with `p(xi) < 1/k` (also played as is).
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    /// Absolute absorption probability at the start of the stage.
    pub s: f64,
    pub kind: GridKind,
}

/// Number of equal conditional steps of size at most `1/k` covering `rho`.
fn flow_steps(rho: f64, k: usize) -> usize {
    let m = ((1.0 - rho).ln() / (1.0 - 1.0 / k as f64).ln()).ceil();
    (m as usize).max(1)
}

/// One stage per grid point of a single block.
struct BlockStages {
    stages: Vec<Vec<f64>>,
    kinds: Vec<GridKind>,
}

fn block_stages(block: &PathBlock<f64>, k: usize) -> Result<BlockStages> {
    let inv_k = 1.0 / k as f64;
    match block {
        PathBlock::Jump { xi } => {
            let kind = if absorb_prob(xi) >= inv_k { GridKind::BigJump } else { GridKind::Fine };
            Ok(BlockStages { stages: vec![xi.clone()], kinds: vec![kind] })
        }
        PathBlock::Flow { z, rho } => {
            // A terminal flow is a stationary tail with conditional step 1/k.
            let (m, c) = if *rho >= 1.0 {
                (1, inv_k)
            } else {
                let m = flow_steps(*rho, k);
                (m, 1.0 - (1.0 - rho).powf(1.0 / m as f64))
            };
            let n = z.len();
            let mut y = vec![0.0; 1 << n];
            for (i, zi) in z.iter().enumerate() {
                y[1 << i] = zi * c;
            }
            let xi = lemma_xi(&y, inv_k * (1.0 + 1e-12))?;
            Ok(BlockStages { stages: vec![xi; m], kinds: vec![GridKind::Fine; m] })
        }
    }
}

/// Residual mass after which the inductive grid hands over to the aligned one.
pub const TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// The inductive `1/k` grid.
    #[default]
    Inductive,
    /// Equal steps inside each block; cycles stay cycles.
    Aligned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub k: usize,
    pub mode: GridMode,
    pub profile: BehaviorProfile,
    /// Stage start points (prefix stages, then one tail period).
    pub grid: Vec<GridPoint>,
    /// Every jump has `p >= 1/k` from this `k` on, which guarantees the
    /// stage construction's hypotheses.
    pub k_threshold: usize,
}

fn check_k<S: Scalar>(path: &AbsorptionPath<S>, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Precondition("k must be at least 2".into()));
    }
    if path.is_non_absorbing() {
        return Err(Error::Precondition("non-absorbing paths are not discretized".into()));
    }
    Ok(())
}

fn k_threshold(path: &AbsorptionPath<f64>) -> usize {
    let min_jump = path
        .prefix()
        .iter()
        .chain(path.cycle().unwrap_or(&[]))
        .filter(|b| matches!(b, PathBlock::Jump { .. }))
        .map(PathBlock::prob)
        .fold(1.0, f64::min);
    ((1.0 / min_jump).ceil() as usize).max(2)
}

/// The behavior profile `x^k` on the inductive grid.
pub fn discretize<S: Scalar>(path: &AbsorptionPath<S>, k: usize) -> Result<Discretization> {
    discretize_with(path, k, GridMode::Inductive)
}

pub fn discretize_with<S: Scalar>(path: &AbsorptionPath<S>, k: usize, mode: GridMode) -> Result<Discretization> {
    check_k(path, k)?;
    let path: AbsorptionPath<f64> = path.convert();
    let threshold = k_threshold(&path);
    let (profile, grid) = match mode {
        GridMode::Inductive => inductive(&path, k)?,
        GridMode::Aligned => aligned(&path, k)?,
    };
    Ok(Discretization { k, mode, profile, grid, k_threshold: threshold })
}

fn aligned(path: &AbsorptionPath<f64>, k: usize) -> Result<(BehaviorProfile, Vec<GridPoint>)> {
    let mut prefix = Vec::new();
    let mut kinds = Vec::new();
    for b in path.prefix() {
        let bs = block_stages(b, k)?;
        prefix.extend(bs.stages);
        kinds.extend(bs.kinds);
    }
    let last_is_flow = matches!(path.prefix().last(), Some(PathBlock::Flow { rho, .. }) if *rho >= 1.0);
    let tail = match path.cycle() {
        Some(cycle) => {
            let mut stages = Vec::new();
            for b in cycle {
                let bs = block_stages(b, k)?;
                stages.extend(bs.stages);
                kinds.extend(bs.kinds);
            }
            Tail::Cycle(stages)
        }
        None if last_is_flow => Tail::RepeatLast,
        None => Tail::AllContinue,
    };
    let profile = BehaviorProfile::new(path.n(), prefix, tail)?;
    let mut s = 0.0;
    let mut grid = Vec::with_capacity(kinds.len());
    for (n, kind) in kinds.into_iter().enumerate() {
        grid.push(GridPoint { s, kind });
        s += (1.0 - s) * absorb_prob(&profile.stage(n + 1));
    }
    Ok((profile, grid))
}

/// Next inductive grid point after `s` (which is not a big jump).
fn next_point(path: &AbsorptionPath<f64>, s: f64, k: usize) -> f64 {
    let c = s + (1.0 - s) / k as f64;
    let mut best = s;
    for seg in path.segments() {
        if seg.t1 <= s {
            continue;
        }
        if seg.t0 >= c {
            break;
        }
        match seg.block {
            // Flow instants fill the span, so the supremum reaches `c` inside it.
            PathBlock::Flow { .. } if c <= seg.t1 => return c,
            PathBlock::Flow { .. } => best = seg.t1,
            PathBlock::Jump { .. } => {
                if seg.t0 > s {
                    best = seg.t0;
                }
                // A jump at least `1/k` long starts its own interval.
                if seg.t0 > s && seg.block.prob() >= 1.0 / k as f64 {
                    return best;
                }
                if seg.t1 < c {
                    best = seg.t1;
                }
            }
        }
        if seg.block.is_terminal() {
            break;
        }
    }
    best
}

// Works in conditional coordinates: after each interval the path is re-based at
// its end, so step masses never divide by a small residual.
fn inductive(path: &AbsorptionPath<f64>, k: usize) -> Result<(BehaviorProfile, Vec<GridPoint>)> {
    let n = path.n();
    let inv_k = 1.0 / k as f64;
    let mut stages = Vec::new();
    let mut grid = Vec::new();
    let mut residual = 1.0;
    let mut rest = path.clone();
    loop {
        let s = 1.0 - residual;
        let seg = rest.segments().next().expect("an absorbing path has a first block");
        if let PathBlock::Jump { xi } = seg.block {
            if seg.block.prob() >= inv_k {
                grid.push(GridPoint { s, kind: GridKind::BigJump });
                stages.push(xi.clone());
                if seg.block.is_terminal() {
                    return Ok((BehaviorProfile::new(n, stages, Tail::AllContinue)?, grid));
                }
                residual *= 1.0 - seg.t1;
                rest = rest.shifted(&seg.t1)?;
                continue;
            }
        }
        // Inside the final flow every interval is the same stationary stage.
        let in_terminal_flow = matches!(seg.block, PathBlock::Flow { rho, .. } if *rho >= 1.0);
        let next = next_point(&rest, 0.0, k);
        if next <= 0.0 {
            return Err(Error::Hypothesis(format!("grid stalls at s = {s}")));
        }
        let y = if next >= 1.0 { rest.pi_one() } else { rest.eval_left(&next).0 };
        grid.push(GridPoint { s, kind: GridKind::Fine });
        stages.push(lemma_xi(&y, inv_k * (1.0 + 1e-9))?);
        residual *= 1.0 - next;
        if in_terminal_flow || next >= 1.0 {
            let tail = if in_terminal_flow { Tail::RepeatLast } else { Tail::AllContinue };
            return Ok((BehaviorProfile::new(n, stages, tail)?, grid));
        }
        rest = rest.shifted(&next)?;
        if residual <= TAIL_MASS {
            // Close with the aligned discretization of what remains so that
            // every later stage still follows the path.
            let (tail_profile, tail_grid) = aligned(&rest, k)?;
            let s = 1.0 - residual;
            grid.extend(tail_grid.into_iter().map(|g| GridPoint { s: s + residual * g.s, kind: g.kind }));
            stages.extend(tail_profile.prefix().iter().cloned());
            return Ok((BehaviorProfile::new(n, stages, tail_profile.tail().clone())?, grid));
        }
    }
}

/// Stage start points of `x^k` on the inductive grid.
pub fn build_grid<S: Scalar>(path: &AbsorptionPath<S>, k: usize) -> Result<Vec<GridPoint>> {
    Ok(discretize(path, k)?.grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub points_checked: usize,
    /// Largest `||pi^x_{s-} - pi_{s-}||_inf` over grid points.
    pub max_distance: f64,
    /// Largest ratio of distance to `s 2^n (n + 1) / k`.
    pub worst_ratio: f64,
    pub worst_s: f64,
    pub holds: bool,
}

/// Checks `||pi^{x^k}_{s_n-} - pi_{s_n-}||_inf <= s_n 2^n (n + 1) / k` at every stage start.
pub fn verify_bound<S: Scalar>(path: &AbsorptionPath<S>, k: usize, profile: &BehaviorProfile) -> Result<BoundReport> {
    let path: AbsorptionPath<f64> = path.convert();
    let n = path.n();
    let factor = (1u64 << n) as f64 * (n as f64 + 1.0) / k as f64;
    let mut pi_x = vec![0.0; 1 << n];
    let mut survive = 1.0;
    let mut report = BoundReport { k, points_checked: 0, max_distance: 0.0, worst_ratio: 0.0, worst_s: 0.0, holds: true };
    let mut stage = 1;
    while survive > RESIDUAL_MASS {
        let s = 1.0 - survive;
        if s > 0.0 {
            let (pi, _) = path.eval_left(&s);
            let dist = pi.iter().zip(&pi_x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let bound = s * factor;
            let ratio = if bound > 0.0 { dist / bound } else if dist > 1e-15 { f64::INFINITY } else { 0.0 };
            report.points_checked += 1;
            if dist > report.max_distance {
                report.max_distance = dist;
            }
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                report.worst_s = s;
            }
            if dist > bound + 1e-12 {
                report.holds = false;
            }
        }
        let xi = profile.stage(stage);
        let dist = profile_distribution(&xi);
        for (acc, p) in pi_x.iter_mut().zip(&dist).skip(1) {
            *acc += survive * p;
        }
        survive *= dist[0];
        if stage >= profile.prefix().len() && matches!(profile.tail(), Tail::AllContinue) {
            break;
        }
        stage += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::from_profile;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn ftv_cycle() -> AbsorptionPath<Rational> {
        let flow = |i: usize| {
            let mut z = vec![q(0, 1); 3];
            z[i] = q(1, 1);
            PathBlock::Flow { z, rho: q(1, 2) }
        };
        AbsorptionPath::new(3, vec![], Some(vec![flow(0), flow(1), flow(2)])).unwrap()
    }

    #[test]
    fn lemma_single_and_symmetric() {
        let mut y = vec![0.0; 4];
        y[2] = 0.01;
        assert_eq!(lemma_xi(&y, 0.1).unwrap(), vec![0.0, 0.01]);
        let mut y = vec![0.0; 4];
        y[1] = 0.01;
        y[2] = 0.01;
        let xi = lemma_xi(&y, 0.1).unwrap();
        assert!((xi[0] - xi[1]).abs() < 1e-15);
        assert!((absorb_prob(&xi) - 0.02).abs() < 1e-14);
    }

    #[test]
    fn lemma_error_bound() {
        let n = 3;
        let eps = 0.01;
        let mut y = vec![0.0; 8];
        y[1] = 0.003;
        y[2] = 0.002;
        y[4] = 0.004;
        y[3] = 0.00001;
        y[7] = 0.000_000_2;
        let xi = lemma_xi(&y, eps).unwrap();
        let p: f64 = y[1..].iter().sum();
        assert!((absorb_prob(&xi) - p).abs() < 1e-14);
        assert!((xi[0] / xi[1] - 1.5).abs() < 1e-12);
        let dist = profile_distribution(&xi);
        let bound = (1 << n) as f64 * (n as f64 + 1.0) * eps * p;
        for a in 1..8 {
            assert!((dist[a] - y[a]).abs() <= bound);
        }
    }

    #[test]
    fn lemma_rejects_violated_hypotheses() {
        let mut y = vec![0.0; 4];
        y[1] = 0.2;
        assert!(matches!(lemma_xi(&y, 0.1), Err(Error::Hypothesis(_))));
        let mut y = vec![0.0; 4];
        y[1] = 0.01;
        y[3] = 0.01;
        assert!(matches!(lemma_xi(&y, 0.1), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn certain_jump_grid() {
        let p = AbsorptionPath::new(2, vec![PathBlock::Jump { xi: vec![1.0, 0.5] }], None).unwrap();
        let grid = build_grid(&p, 10).unwrap();
        assert_eq!(grid, vec![GridPoint { s: 0.0, kind: GridKind::BigJump }]);
    }

    #[test]
    fn aligned_cycle_steps_are_small() {
        let p = ftv_cycle();
        let d = discretize_with(&p, 10, GridMode::Aligned).unwrap();
        let Tail::Cycle(stages) = d.profile.tail() else { panic!("expected a cycle tail") };
        // Seven steps of conditional size 1 - 2^{-1/7} < 1/10 per block.
        assert_eq!(stages.len(), 21);
        for s in stages {
            assert!(absorb_prob(s) <= 0.1);
            assert_eq!(s.iter().filter(|v| **v > 0.0).count(), 1);
        }
        let grid = d.grid;
        assert!((grid[7].s - 0.5).abs() < 1e-12);
        assert!(grid.windows(2).all(|w| w[0].s < w[1].s && (w[1].s - w[0].s) / (1.0 - w[0].s) <= 0.1 + 1e-12));
    }

    #[test]
    fn inductive_grid_takes_full_steps() {
        let p = ftv_cycle();
        let d = discretize(&p, 10).unwrap();
        assert!(matches!(d.profile.tail(), Tail::Cycle(c) if c.len() == 21));
        for w in d.grid.windows(2).filter(|w| w[1].s < 1.0 - 1e-6) {
            assert!(((w[1].s - w[0].s) / (1.0 - w[0].s) - 0.1).abs() < 1e-9);
        }
        // The step straddling t = 1/2 mixes players 1 and 2.
        let straddle = d.grid.iter().position(|g| g.s > 0.5).unwrap() - 1;
        let xi = d.profile.stage(straddle + 1);
        assert!(xi[0] > 0.0 && xi[1] > 0.0 && xi[2] == 0.0);
    }

    #[test]
    fn terminal_flow_is_stationary_small_quitting() {
        let p = AbsorptionPath::new(2, vec![PathBlock::Flow { z: vec![1.0, 0.0], rho: 1.0 }], None).unwrap();
        let d = discretize(&p, 50).unwrap();
        assert_eq!(d.profile.tail(), &Tail::RepeatLast);
        assert_eq!(d.profile.stage(7), vec![1.0 / 50.0, 0.0]);
    }

    #[test]
    fn jump_paths_are_reproduced() {
        let x = BehaviorProfile::new(2, vec![vec![0.3, 0.2], vec![1.0, 0.0]], Tail::AllContinue).unwrap();
        let p = from_profile(&x).unwrap();
        let d = discretize(&p, 5).unwrap();
        assert_eq!(d.profile.prefix(), x.prefix());
        let report = verify_bound(&p, 5, &d.profile).unwrap();
        assert_eq!(report.max_distance, 0.0);
    }

    #[test]
    fn bound_holds_on_ftv_cycle() {
        let p = ftv_cycle();
        for k in [10, 100] {
            let d = discretize(&p, k).unwrap();
            let report = verify_bound(&p, k, &d.profile).unwrap();
            assert!(report.holds, "k = {k}: {report:?}");
            assert!(report.points_checked > 0);
        }
    }
}
