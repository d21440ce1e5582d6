//! Stationary-after-a-prefix behavior strategy profiles and their evaluation.
//!
//! A profile is a finite list of stage profiles followed by a tail rule, so
//! every quantity here (payoff, continuation payoffs, best replies) has an
//! exact closed form and no truncation is needed.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{profile_distribution, QuittingGame};
use crate::one_shot::OneShotGame;

#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    /// Everybody continues forever after the prefix.
    AllContinue,
    /// The last prefix stage is repeated forever.
    RepeatLast,
    /// The listed stages repeat forever.
    Cycle(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    n: usize,
    prefix: Vec<Vec<f64>>,
    tail: Tail,
}

impl BehaviorProfile {
    pub fn new(n: usize, prefix: Vec<Vec<f64>>, tail: Tail) -> Result<Self> {
        let check = |stage: &Vec<f64>| -> Result<()> {
            if stage.len() != n {
                return Err(Error::InvalidProfile(format!("stage has {} entries, expected {n}", stage.len())));
            }
            if let Some(x) = stage.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidProfile(format!("quit probability {x} outside [0,1]")));
            }
            Ok(())
        };
        prefix.iter().try_for_each(check)?;
        match &tail {
            Tail::RepeatLast if prefix.is_empty() => {
                return Err(Error::InvalidProfile("repeat_last tail needs a nonempty prefix".into()))
            }
            Tail::Cycle(stages) if stages.is_empty() => {
                return Err(Error::InvalidProfile("cycle tail must be nonempty".into()))
            }
            Tail::Cycle(stages) => stages.iter().try_for_each(check)?,
            _ => {}
        }
        Ok(BehaviorProfile { n, prefix, tail })
    }

    pub fn stationary(xi: Vec<f64>) -> Result<Self> {
        BehaviorProfile::new(xi.len(), vec![xi], Tail::RepeatLast)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prefix(&self) -> &[Vec<f64>] {
        &self.prefix
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    /// Quit probabilities at stage `k` (1-based).
    pub fn stage(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1, "stages are 1-based");
        if k <= self.prefix.len() {
            return self.prefix[k - 1].clone();
        }
        let offset = k - self.prefix.len() - 1;
        match &self.tail {
            Tail::AllContinue => vec![0.0; self.n],
            Tail::RepeatLast => self.prefix.last().expect("validated").clone(),
            Tail::Cycle(stages) => stages[offset % stages.len()].clone(),
        }
    }

    /// The profile played from stage `k + 1` on.
    pub fn shifted(&self, k: usize) -> BehaviorProfile {
        if k <= self.prefix.len() {
            let mut prefix = self.prefix[k..].to_vec();
            let tail = match &self.tail {
                Tail::RepeatLast if prefix.is_empty() => {
                    prefix.push(self.prefix.last().expect("validated").clone());
                    Tail::RepeatLast
                }
                t => t.clone(),
            };
            return BehaviorProfile { n: self.n, prefix, tail };
        }
        let offset = k - self.prefix.len();
        match &self.tail {
            Tail::AllContinue => BehaviorProfile { n: self.n, prefix: vec![], tail: Tail::AllContinue },
            Tail::RepeatLast => {
                BehaviorProfile { n: self.n, prefix: vec![self.prefix.last().unwrap().clone()], tail: Tail::RepeatLast }
            }
            Tail::Cycle(stages) => {
                let r = offset % stages.len();
                let mut rotated = stages[r..].to_vec();
                rotated.extend_from_slice(&stages[..r]);
                BehaviorProfile { n: self.n, prefix: vec![], tail: Tail::Cycle(rotated) }
            }
        }
    }

    /// Stages that are examined explicitly: the prefix plus one period of the tail.
    fn explicit_stages(&self) -> Vec<Vec<f64>> {
        let mut stages = self.prefix.clone();
        match &self.tail {
            Tail::AllContinue => stages.push(vec![0.0; self.n]),
            Tail::RepeatLast => {}
            Tail::Cycle(c) => stages.extend(c.iter().cloned()),
        }
        stages
    }

    /// Replaces player `i`'s entries with a pure quit/continue plan.
    fn with_plan(&self, i: usize, prefix_plan: &[bool], tail_plan: &[bool]) -> BehaviorProfile {
        let set = |stage: &[f64], quit: bool| {
            let mut s = stage.to_vec();
            s[i] = if quit { 1.0 } else { 0.0 };
            s
        };
        let prefix: Vec<_> = self.prefix.iter().zip(prefix_plan).map(|(s, &q)| set(s, q)).collect();
        match &self.tail {
            Tail::AllContinue => {
                let mut prefix = prefix;
                if tail_plan.first().copied().unwrap_or(false) {
                    prefix.push(set(&vec![0.0; self.n], true));
                }
                BehaviorProfile { n: self.n, prefix, tail: Tail::AllContinue }
            }
            Tail::RepeatLast => {
                let mut prefix = prefix;
                let last = self.prefix.last().unwrap();
                prefix.push(set(last, tail_plan[0]));
                BehaviorProfile { n: self.n, prefix, tail: Tail::RepeatLast }
            }
            Tail::Cycle(c) => {
                let cycle = c.iter().zip(tail_plan).map(|(s, &q)| set(s, q)).collect();
                BehaviorProfile { n: self.n, prefix, tail: Tail::Cycle(cycle) }
            }
        }
    }
}

/// `(sum_{a != C} xi(a) r(a), xi(C))` for one stage.
fn stage_terms(game: &QuittingGame<f64>, xi: &[f64]) -> (Vec<f64>, f64) {
    let dist = profile_distribution(xi);
    (game.absorbing_mass_payoff(xi), dist[0])
}

fn affine_step(u: &[f64], c: f64, next: &[f64]) -> Vec<f64> {
    u.iter().zip(next).map(|(a, b)| a + c * b).collect()
}

/// Value at the start of the tail.
fn tail_value(game: &QuittingGame<f64>, x: &BehaviorProfile) -> Vec<f64> {
    let cont = game.continue_payoff().to_vec();
    let stages: Vec<Vec<f64>> = match &x.tail {
        Tail::AllContinue => return cont,
        Tail::RepeatLast => vec![x.prefix.last().unwrap().clone()],
        Tail::Cycle(c) => c.clone(),
    };
    let mut survive = 1.0;
    let mut acc = vec![0.0; x.n];
    for xi in &stages {
        let (u, c) = stage_terms(game, xi);
        for (a, v) in acc.iter_mut().zip(&u) {
            *a += survive * v;
        }
        survive *= c;
    }
    if survive >= 1.0 {
        return cont;
    }
    acc.iter().map(|a| a / (1.0 - survive)).collect()
}

/// Continuation payoffs `gamma_1, ..., gamma_{L+1}` for the explicit stages
/// (prefix plus one tail period), with `gamma_{L+1}` the tail value.
pub fn continuation_payoffs(game: &QuittingGame<f64>, x: &BehaviorProfile) -> Vec<Vec<f64>> {
    let stages = match &x.tail {
        Tail::RepeatLast => x.prefix.clone(),
        _ => x.explicit_stages(),
    };
    let mut values = vec![tail_value(game, x)];
    for xi in stages.iter().rev() {
        let (u, c) = stage_terms(game, xi);
        let next = values.last().unwrap();
        values.push(affine_step(&u, c, next));
    }
    values.reverse();
    values
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub value: Vec<f64>,
    /// Guaranteed bound on the absolute error of `value`.
    pub error_bound: f64,
}

/// `gamma(x)`, in closed form for every tail rule.
pub fn payoff(game: &QuittingGame<f64>, x: &BehaviorProfile) -> PayoffEstimate {
    PayoffEstimate { value: continuation_payoffs(game, x).swap_remove(0), error_bound: 0.0 }
}

/// `gamma_n(x)`: the payoff of the profile played from stage `n` on.
pub fn payoff_from(game: &QuittingGame<f64>, x: &BehaviorProfile, n: usize) -> Vec<f64> {
    assert!(n >= 1, "stages are 1-based");
    payoff(game, &x.shifted(n - 1)).value
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionStats {
    /// `P(theta = n)` for `n = 1..=N`.
    pub stage_absorption: Vec<f64>,
    /// `P(theta <= N, a_theta = a)` indexed by quitter mask (index 0 unused).
    pub by_profile: Vec<f64>,
    /// `P(theta > N)`.
    pub survival: f64,
}

impl AbsorptionStats {
    pub fn absorbed(&self) -> f64 {
        self.stage_absorption.iter().sum()
    }
}

pub fn absorption_stats(game: &QuittingGame<f64>, x: &BehaviorProfile, horizon: usize) -> AbsorptionStats {
    assert!(horizon >= 1, "horizon must be positive");
    let mut survival = 1.0;
    let mut by_profile = vec![0.0; 1 << game.n()];
    let mut stage_absorption = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let dist = profile_distribution(&x.stage(k));
        let mut absorbed = 0.0;
        for (mask, p) in dist.iter().enumerate().skip(1) {
            by_profile[mask] += survival * p;
            absorbed += survival * p;
        }
        stage_absorption.push(absorbed);
        survival *= dist[0];
    }
    AbsorptionStats { stage_absorption, by_profile, survival }
}

/// True when play ends with probability one.
pub fn is_absorbing(x: &BehaviorProfile) -> bool {
    let stage_absorbs = |xi: &Vec<f64>| xi.iter().any(|&v| v > 0.0);
    if x.prefix.iter().any(|xi| xi.iter().any(|&v| v >= 1.0)) {
        return true;
    }
    match &x.tail {
        Tail::AllContinue => false,
        Tail::RepeatLast => stage_absorbs(x.prefix.last().unwrap()),
        Tail::Cycle(c) => c.iter().any(stage_absorbs),
    }
}

/// Player `i`'s view of one stage: quitting value and the continuation terms.
struct DecisionStage {
    quit: f64,
    /// Payoff mass from absorption by the others when `i` continues.
    cont_mass: f64,
    /// Probability that all others continue.
    cont_prob: f64,
}

fn decision_stage(game: &QuittingGame<f64>, xi: &[f64], i: usize) -> DecisionStage {
    let mut others = xi.to_vec();
    others[i] = 0.0;
    let dist = profile_distribution(&others);
    let mut quit = 0.0;
    let mut cont_mass = 0.0;
    for (mask, p) in dist.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        quit += p * game.payoffs_by_mask()[mask | (1 << i)][i];
        if mask != 0 {
            cont_mass += p * game.payoffs_by_mask()[mask][i];
        }
    }
    DecisionStage { quit, cont_mass, cont_prob: dist[0] }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub player: usize,
    /// Optimal payoff of player `i` against the others' strategies.
    pub value: f64,
    /// The profile in which player `i` plays the optimal pure plan.
    pub reply: BehaviorProfile,
}

/// Solves player `i`'s optimal stopping problem against `x^{-i}` exactly.
///
/// The tail is a finite-state periodic decision problem, solved by policy
/// iteration; the prefix is then handled by backward induction.
pub fn best_response_value(game: &QuittingGame<f64>, x: &BehaviorProfile, i: usize) -> BestResponse {
    let cont_forever = game.continue_payoff()[i];
    let tail_stages: Vec<DecisionStage> = match &x.tail {
        Tail::AllContinue => vec![decision_stage(game, &vec![0.0; x.n], i)],
        Tail::RepeatLast => vec![decision_stage(game, x.prefix.last().unwrap(), i)],
        Tail::Cycle(c) => c.iter().map(|xi| decision_stage(game, xi, i)).collect(),
    };
    let (tail_value, tail_plan) = solve_periodic(&tail_stages, cont_forever);

    let mut value = tail_value;
    let mut prefix_plan = vec![false; x.prefix.len()];
    for (k, xi) in x.prefix.iter().enumerate().rev() {
        let s = decision_stage(game, xi, i);
        let cont = s.cont_mass + s.cont_prob * value;
        prefix_plan[k] = s.quit > cont;
        value = s.quit.max(cont);
    }
    BestResponse { player: i, value, reply: x.with_plan(i, &prefix_plan, &tail_plan) }
}

/// Value at the first stage of a periodic stopping problem and an optimal plan.
fn solve_periodic(stages: &[DecisionStage], cont_forever: f64) -> (f64, Vec<bool>) {
    // Start from "never quit" and improve until the plan is stable.
    let mut plan = vec![false; stages.len()];
    let mut value = evaluate_plan(stages, &plan, cont_forever);
    for _ in 0..=4 * stages.len() + 8 {
        let mut next = value;
        let mut new_plan = vec![false; stages.len()];
        for (k, s) in stages.iter().enumerate().rev() {
            let cont = s.cont_mass + s.cont_prob * next;
            // Keep the current choice on ties so the iteration terminates.
            new_plan[k] = if (s.quit - cont).abs() <= 1e-15 * (1.0 + s.quit.abs()) { plan[k] } else { s.quit > cont };
            next = if new_plan[k] { s.quit } else { cont };
        }
        if new_plan == plan {
            break;
        }
        plan = new_plan;
        value = evaluate_plan(stages, &plan, cont_forever);
    }
    (value, plan)
}

/// Exact value of a periodic pure plan: solves `W = a + b W` over one period.
fn evaluate_plan(stages: &[DecisionStage], plan: &[bool], cont_forever: f64) -> f64 {
    let (mut a, mut b) = (0.0, 1.0);
    for (s, &quit) in stages.iter().zip(plan).rev() {
        if quit {
            a = s.quit;
            b = 0.0;
        } else {
            a = s.cont_mass + s.cont_prob * a;
            b *= s.cont_prob;
        }
    }
    if b >= 1.0 {
        // Nobody ever quits along this plan.
        cont_forever
    } else {
        a / (1.0 - b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumVerdict {
    pub holds: bool,
    pub payoff: Vec<f64>,
    pub best_values: Vec<f64>,
    /// `best_values[i] - payoff[i]`.
    pub gains: Vec<f64>,
}

impl EquilibriumVerdict {
    /// Smallest epsilon for which the profile is an epsilon-equilibrium.
    pub fn required_eps(&self) -> f64 {
        self.gains.iter().fold(0.0, |a: f64, &g| a.max(g))
    }
}

pub fn is_eps_equilibrium(game: &QuittingGame<f64>, x: &BehaviorProfile, eps: f64, tol: f64) -> EquilibriumVerdict {
    assert!(eps >= 0.0, "eps must be nonnegative");
    let value = payoff(game, x).value;
    let best_values: Vec<f64> = (0..x.n).map(|i| best_response_value(game, x, i).value).collect();
    let gains: Vec<f64> = best_values.iter().zip(&value).map(|(b, v)| b - v).collect();
    EquilibriumVerdict { holds: gains.iter().all(|g| *g <= eps + tol), payoff: value, best_values, gains }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeqPerfectVerdict {
    pub player: usize,
    pub perfect: bool,
    /// Smallest epsilon for which the player is sequentially epsilon-perfect.
    pub required_eps: f64,
    /// Stage (1-based) where `required_eps` is attained.
    pub worst_stage: usize,
    /// First stage failing at the requested epsilon.
    pub first_violation: Option<usize>,
}

/// Checks player `i`'s one-shot perfectness in `G(gamma_{n+1}(x))` at every
/// distinct stage: the prefix and one period of the tail.
pub fn is_seq_eps_perfect_profile(game: &QuittingGame<f64>, x: &BehaviorProfile, i: usize, eps: f64) -> SeqPerfectVerdict {
    assert!(eps >= 0.0, "eps must be nonnegative");
    let stages = match &x.tail {
        Tail::RepeatLast => x.prefix.clone(),
        _ => x.explicit_stages(),
    };
    let gammas = continuation_payoffs(game, x);
    let mut worst = (0.0, 1);
    let mut first_violation = None;
    for (k, xi) in stages.iter().enumerate() {
        let os = OneShotGame::new(game, gammas[k + 1].clone());
        let verdict = os.is_eps_perfect(xi, i, &eps);
        if verdict.required_eps > worst.0 {
            worst = (verdict.required_eps, k + 1);
        }
        if !verdict.perfect && first_violation.is_none() {
            first_violation = Some(k + 1);
        }
    }
    SeqPerfectVerdict {
        player: i,
        perfect: first_violation.is_none(),
        required_eps: worst.0,
        worst_stage: worst.1,
        first_violation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub runs: usize,
    pub absorbed_runs: usize,
    pub mean_payoff: Vec<f64>,
    pub mean_absorption_stage: f64,
}

/// Monte Carlo play of the profile; runs still alive after `max_stages`
/// are scored with the perpetual-continuation payoff.
pub fn simulate<R: Rng>(game: &QuittingGame<f64>, x: &BehaviorProfile, runs: usize, max_stages: usize, rng: &mut R) -> SimulationSummary {
    let mut total = vec![0.0; game.n()];
    let mut absorbed_runs = 0;
    let mut stage_sum = 0.0;
    for _ in 0..runs {
        let mut outcome = None;
        for k in 1..=max_stages {
            let xi = x.stage(k);
            let mask = xi.iter().enumerate().fold(0u32, |m, (i, &p)| if rng.random::<f64>() < p { m | (1 << i) } else { m });
            if mask != 0 {
                outcome = Some((k, mask));
                break;
            }
        }
        let payoff = match outcome {
            Some((k, mask)) => {
                absorbed_runs += 1;
                stage_sum += k as f64;
                &game.payoffs_by_mask()[mask as usize]
            }
            None => game.continue_payoff(),
        };
        for (t, v) in total.iter_mut().zip(payoff) {
            *t += v;
        }
    }
    SimulationSummary {
        runs,
        absorbed_runs,
        mean_payoff: total.iter().map(|t| t / runs.max(1) as f64).collect(),
        mean_absorption_stage: if absorbed_runs > 0 { stage_sum / absorbed_runs as f64 } else { f64::NAN },
    }
}
