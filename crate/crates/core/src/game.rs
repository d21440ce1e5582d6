//! Quitting games and the mixed-action algebra over them.
//!
//! Action profiles are quitter bitmasks: bit `i` set means player `i` quits,
//! mask `0` is the all-continue profile.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Hard cap on the number of players (dense storage of `2^n` payoff vectors).
pub const MAX_PLAYERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId(pub usize);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 1-based, as players are usually numbered.
        write!(f, "{}", self.0 + 1)
    }
}

/// Set of players who quit in a stage. The empty set is the all-continue profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionProfile(pub u32);

impl ActionProfile {
    pub const ALL_CONTINUE: ActionProfile = ActionProfile(0);

    pub fn from_quitters(quitters: &[usize]) -> Self {
        ActionProfile(quitters.iter().fold(0, |m, &i| m | (1 << i)))
    }

    pub fn single(i: usize) -> Self {
        ActionProfile(1 << i)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn quits(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn quitter_count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_absorbing(self) -> bool {
        self.0 != 0
    }

    pub fn quitters(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..32).filter(move |i| mask & (1 << i) != 0)
    }

    /// Label used in CSV headers: 1-based players joined by `+`.
    pub fn label(self) -> String {
        self.quitters().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("+")
    }
}

/// Quit probabilities, one per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile<S>(Vec<S>);

impl<S: Scalar> MixedProfile<S> {
    pub fn new(xi: Vec<S>) -> Result<Self> {
        if xi.is_empty() || xi.len() > MAX_PLAYERS {
            return Err(Error::InvalidProfile(format!("{} players", xi.len())));
        }
        for (i, x) in xi.iter().enumerate() {
            if *x < S::zero() || *x > S::one() {
                return Err(Error::InvalidProfile(format!("xi[{i}] = {x} outside [0,1]")));
            }
        }
        Ok(MixedProfile(xi))
    }

    pub fn zeros(n: usize) -> Self {
        MixedProfile(vec![S::zero(); n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut xi = vec![S::zero(); n];
        xi[i] = S::one();
        MixedProfile(xi)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<S> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with player `i`'s quit probability replaced.
    pub fn with(&self, i: usize, value: S) -> Self {
        let mut xi = self.0.clone();
        xi[i] = value;
        MixedProfile(xi)
    }
}

/// `p(xi) = 1 - prod(1 - xi^i)`.
pub fn absorb_prob<S: Scalar>(xi: &[S]) -> S {
    S::one() - continue_prob(xi)
}

/// Probability that everybody continues.
pub fn continue_prob<S: Scalar>(xi: &[S]) -> S {
    xi.iter().fold(S::one(), |acc, x| acc * (S::one() - x.clone()))
}

/// Probability of the pure profile `a` under independent quitting.
pub fn profile_prob<S: Scalar>(xi: &[S], a: ActionProfile) -> S {
    xi.iter().enumerate().fold(S::one(), |acc, (i, x)| {
        if a.quits(i) {
            acc * x.clone()
        } else {
            acc * (S::one() - x.clone())
        }
    })
}

/// Probabilities of all `2^n` pure profiles, indexed by mask.
pub fn profile_distribution<S: Scalar>(xi: &[S]) -> Vec<S> {
    let mut dist = vec![S::one()];
    for x in xi {
        let stay = S::one() - x.clone();
        let mut next = Vec::with_capacity(dist.len() * 2);
        next.extend(dist.iter().map(|d| d.clone() * stay.clone()));
        next.extend(dist.iter().map(|d| d.clone() * x.clone()));
        dist = next;
    }
    dist
}

/// A quitting game with payoff vectors for every quitter set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuittingGame<S> {
    players: Vec<String>,
    /// `payoffs[mask]`; `payoffs[0]` is the payoff of perpetual continuation.
    payoffs: Vec<Vec<S>>,
}

impl<S: Scalar> QuittingGame<S> {
    /// `payoffs` is indexed by quitter mask with the continuation payoff at index 0.
    pub fn new(players: Vec<String>, payoffs: Vec<Vec<S>>) -> Result<Self> {
        let n = players.len();
        if n == 0 || n > MAX_PLAYERS {
            return Err(Error::InvalidGame(format!("player count {n} outside 1..={MAX_PLAYERS}")));
        }
        if payoffs.len() != 1 << n {
            return Err(Error::InvalidGame(format!(
                "expected {} payoff vectors, got {}",
                1usize << n,
                payoffs.len()
            )));
        }
        for (mask, v) in payoffs.iter().enumerate() {
            if v.len() != n {
                return Err(Error::InvalidGame(format!("payoff for mask {mask} has length {}", v.len())));
            }
            if v.iter().any(|x| !x.to_f64().is_finite()) {
                return Err(Error::InvalidGame(format!("non-finite payoff for mask {mask}")));
            }
        }
        Ok(QuittingGame { players, payoffs })
    }

    /// Builds a game from single-quitter payoff columns, filling every
    /// multi-quitter profile with the coordinatewise minimum of its constituent
    /// single-quitter payoffs minus one.
    pub fn with_min_minus_one(single: &[Vec<S>], continue_payoff: Vec<S>) -> Result<Self> {
        let n = single.len();
        let players = (1..=n).map(|i| format!("P{i}")).collect();
        let mut payoffs = vec![continue_payoff];
        for mask in 1u32..(1 << n) {
            let a = ActionProfile(mask);
            if a.quitter_count() == 1 {
                payoffs.push(single[a.quitters().next().unwrap()].clone());
            } else {
                payoffs.push(min_minus_one(single, a));
            }
        }
        QuittingGame::new(players, payoffs)
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn payoff(&self, a: ActionProfile) -> &[S] {
        &self.payoffs[a.0 as usize]
    }

    pub fn continue_payoff(&self) -> &[S] {
        &self.payoffs[0]
    }

    /// `r(Q^i, C^{-i})`.
    pub fn single_quit(&self, i: usize) -> &[S] {
        self.payoff(ActionProfile::single(i))
    }

    pub fn payoffs_by_mask(&self) -> &[Vec<S>] {
        &self.payoffs
    }

    /// Largest absolute payoff entry.
    pub fn bound(&self) -> S {
        self.payoffs.iter().fold(S::zero(), |acc, v| S::max_of(acc, scalar::max_abs(v)))
    }

    pub fn absorbing_profiles(&self) -> impl Iterator<Item = ActionProfile> {
        (1u32..(1 << self.n())).map(ActionProfile)
    }

    /// `sum_{a != C} xi(a) r(a)`, the absorbing payoff before normalization by `p(xi)`.
    pub fn absorbing_mass_payoff(&self, xi: &[S]) -> Vec<S> {
        let dist = profile_distribution(xi);
        let mut acc = vec![S::zero(); self.n()];
        for (mask, prob) in dist.iter().enumerate().skip(1) {
            if prob.is_zero() {
                continue;
            }
            for (slot, r) in acc.iter_mut().zip(&self.payoffs[mask]) {
                *slot = slot.clone() + prob.clone() * r.clone();
            }
        }
        acc
    }

    /// `r(xi)`: expected payoff conditional on absorption.
    pub fn absorbing_payoff(&self, xi: &[S]) -> Result<Vec<S>> {
        let p = absorb_prob(xi);
        if p.is_zero() {
            return Err(Error::DegenerateProfile);
        }
        Ok(self.absorbing_mass_payoff(xi).into_iter().map(|v| v / p.clone()).collect())
    }

    /// Shifts every coordinate `i` by `-r^i(Q^i, C^{-i})`.
    pub fn normalize(&self) -> QuittingGame<S> {
        let shift: Vec<S> = (0..self.n()).map(|i| self.single_quit(i)[i].clone()).collect();
        let payoffs = self
            .payoffs
            .iter()
            .map(|v| v.iter().zip(&shift).map(|(x, s)| x.clone() - s.clone()).collect())
            .collect();
        QuittingGame { players: self.players.clone(), payoffs }
    }

    pub fn is_normalized(&self) -> bool {
        (0..self.n()).all(|i| self.single_quit(i)[i].is_zero())
    }

    /// `R(game)`: entry `(i, j)` is `r^i(Q^j, C^{-j})`.
    pub fn quit_matrix(&self) -> Matrix<S> {
        let n = self.n();
        Matrix::from_fn(n, n, |i, j| self.single_quit(j)[i].clone())
    }

    pub fn convert<T: Scalar>(&self) -> QuittingGame<T> {
        QuittingGame {
            players: self.players.clone(),
            payoffs: self.payoffs.iter().map(|v| scalar::convert_vec(v)).collect(),
        }
    }
}

pub(crate) fn min_minus_one<S: Scalar>(single: &[Vec<S>], a: ActionProfile) -> Vec<S> {
    let n = single.len();
    (0..n)
        .map(|coord| {
            let min = a
                .quitters()
                .map(|q| single[q][coord].clone())
                .reduce(S::min_of)
                .expect("nonempty quitter set");
            min - S::one()
        })
        .collect()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { S::one() } else { S::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Restriction to the rows and columns listed in `idx`.
    pub fn principal(&self, idx: &[usize]) -> Matrix<S> {
        Matrix::from_fn(idx.len(), idx.len(), |a, b| self.get(idx[a], idx[b]).clone())
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(_, x)| !x.is_zero())
                    .fold(S::zero(), |acc, (a, x)| acc + a.clone() * x.clone())
            })
            .collect()
    }

    pub fn neg(&self) -> Matrix<S> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| -x.clone()).collect() }
    }

    pub fn convert<T: Scalar>(&self) -> Matrix<T> {
        Matrix { rows: self.rows, cols: self.cols, data: scalar::convert_vec(&self.data) }
    }
}
