//! The one-stage game `G(y)`: one round of the quitting game whose
//! all-continue outcome pays the continuation vector `y`.

use serde::Serialize;

use crate::game::{profile_distribution, QuittingGame};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Quit,
    Continue,
}

/// Which of the two perfectness inequalities failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// An action beats the mixed payoff by more than epsilon.
    Gain,
    /// An action played with positive probability loses more than epsilon.
    Loss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<S> {
    pub condition: Condition,
    pub action: Action,
    /// Amount by which the inequality fails at epsilon = 0.
    pub margin: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfectnessVerdict<S> {
    pub perfect: bool,
    pub quit_value: S,
    pub continue_value: S,
    pub mixed_value: S,
    /// Smallest epsilon for which the player is epsilon-perfect.
    pub required_eps: S,
    /// Conditions that fail at the requested epsilon.
    pub violations: Vec<Violation<S>>,
}

#[derive(Debug, Clone)]
pub struct OneShotGame<'a, S> {
    pub game: &'a QuittingGame<S>,
    pub continuation: Vec<S>,
}

impl<'a, S: Scalar> OneShotGame<'a, S> {
    pub fn new(game: &'a QuittingGame<S>, continuation: Vec<S>) -> Self {
        assert_eq!(game.n(), continuation.len(), "continuation dimension mismatch");
        OneShotGame { game, continuation }
    }

    /// Player `i`'s payoff from the pure action `action` against `xi^{-i}`
    /// (coordinate `i` of `xi` is ignored).
    pub fn pure_dev_payoff(&self, i: usize, action: Action, xi: &[S]) -> S {
        let forced = match action {
            Action::Quit => S::one(),
            Action::Continue => S::zero(),
        };
        let mut profile = xi.to_vec();
        profile[i] = forced;
        self.expected(&profile, i)
    }

    /// Expected payoff vector when everybody mixes according to `xi`.
    pub fn mixed_payoff(&self, xi: &[S]) -> Vec<S> {
        (0..self.game.n()).map(|i| self.expected(xi, i)).collect()
    }

    /// Checks both perfectness inequalities for player `i` at `xi`.
    pub fn is_eps_perfect(&self, xi: &[S], i: usize, eps: &S) -> PerfectnessVerdict<S> {
        let quit_value = self.pure_dev_payoff(i, Action::Quit, xi);
        let continue_value = self.pure_dev_payoff(i, Action::Continue, xi);
        let p = xi[i].clone();
        let mixed_value = p.clone() * quit_value.clone() + (S::one() - p.clone()) * continue_value.clone();

        let mut margins = vec![
            (Condition::Gain, Action::Quit, quit_value.clone() - mixed_value.clone()),
            (Condition::Gain, Action::Continue, continue_value.clone() - mixed_value.clone()),
        ];
        if p > S::zero() {
            margins.push((Condition::Loss, Action::Quit, mixed_value.clone() - quit_value.clone()));
        }
        if p < S::one() {
            margins.push((Condition::Loss, Action::Continue, mixed_value.clone() - continue_value.clone()));
        }

        let required_eps = margins.iter().fold(S::zero(), |acc, (_, _, m)| S::max_of(acc, m.clone()));
        let violations: Vec<_> = margins
            .into_iter()
            .filter(|(_, _, m)| m > eps)
            .map(|(condition, action, margin)| Violation { condition, action, margin })
            .collect();
        PerfectnessVerdict {
            perfect: violations.is_empty(),
            quit_value,
            continue_value,
            mixed_value,
            required_eps,
            violations,
        }
    }

    fn expected(&self, xi: &[S], i: usize) -> S {
        let dist = profile_distribution(xi);
        let mut acc = S::zero();
        for (mask, prob) in dist.iter().enumerate() {
            if prob.is_zero() {
                continue;
            }
            let value = if mask == 0 {
                self.continuation[i].clone()
            } else {
                self.game.payoffs_by_mask()[mask][i].clone()
            };
            acc = acc + prob.clone() * value;
        }
        acc
    }
}
