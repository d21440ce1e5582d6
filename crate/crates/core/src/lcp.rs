//! The simplex-normalized linear complementarity problem
//!
//! find `z = (z_0, z_1, .., z_n)` in the simplex with
//! `w = z_0 q + sum_i z_i R^i >= 0` and `z_i w_i = 0` for `i >= 1`,
//!
//! solved by exhaustive support enumeration, plus a sampling falsifier for the
//! Q-matrix property and the direction finder used by the path construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Matrix;
use crate::linalg;
use crate::scalar::{convert_vec, Scalar};

pub const MAX_LCP_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LcpInstance<S> {
    pub r: Matrix<S>,
    pub q: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution<S> {
    pub w: Vec<S>,
    /// `(z_0, z_1, .., z_n)`.
    pub z: Vec<S>,
}

impl<S: Scalar> LcpSolution<S> {
    /// Indices `i >= 1` (reported 0-based into `R`'s columns) with `z_i > 0`.
    pub fn support(&self) -> Vec<usize> {
        self.z[1..].iter().enumerate().filter(|(_, v)| is_positive(*v)).map(|(i, _)| i).collect()
    }
}

fn is_nonneg<S: Scalar>(x: &S) -> bool {
    *x >= S::zero() || x.is_negligible()
}

fn is_positive<S: Scalar>(x: &S) -> bool {
    *x > S::zero() && !x.is_negligible()
}

impl<S: Scalar> LcpInstance<S> {
    pub fn new(r: Matrix<S>, q: Vec<S>) -> Result<Self> {
        if r.rows() != r.cols() || r.rows() != q.len() {
            return Err(Error::Precondition(format!("LCP needs a square matrix matching q (got {}x{}, |q| = {})", r.rows(), r.cols(), q.len())));
        }
        if r.rows() > MAX_LCP_DIM {
            return Err(Error::Precondition(format!("LCP dimension {} exceeds {MAX_LCP_DIM}", r.rows())));
        }
        Ok(LcpInstance { r, q })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// `w = z_0 q + sum_i z_i R^i`.
    pub fn w_of(&self, z: &[S]) -> Vec<S> {
        let rz = self.r.mul_vec(&z[1..]);
        rz.into_iter().zip(&self.q).map(|(a, qj)| a + z[0].clone() * qj.clone()).collect()
    }

    /// Checks the defining constraints of a solution.
    pub fn is_solution(&self, sol: &LcpSolution<S>) -> bool {
        let n = self.n();
        if sol.z.len() != n + 1 || sol.w.len() != n {
            return false;
        }
        let total = sol.z.iter().fold(S::zero(), |a, b| a + b.clone());
        let w = self.w_of(&sol.z);
        (total - S::one()).is_negligible()
            && sol.z.iter().all(is_nonneg)
            && w.iter().all(is_nonneg)
            && w.iter().zip(&sol.w).all(|(a, b)| (a.clone() - b.clone()).is_negligible())
            && (0..n).all(|i| sol.z[i + 1].is_negligible() || w[i].is_negligible())
    }
}

/// All basic solutions, one per support of `z` (bit 0 of a support is `z_0`).
pub fn solve_enumerate<S: Scalar>(inst: &LcpInstance<S>) -> Vec<LcpSolution<S>> {
    let n = inst.n();
    let mut out: Vec<LcpSolution<S>> = Vec::new();
    for support in 1u32..(1u32 << (n + 1)) {
        let Some(sol) = solve_support(inst, support) else { continue };
        if !out.iter().any(|s| s.z == sol.z) {
            out.push(sol);
        }
    }
    out
}

/// Whether any support carries a solution; stops at the first one.
pub fn has_solution<S: Scalar>(inst: &LcpInstance<S>) -> bool {
    (1u32..(1u32 << (inst.n() + 1))).any(|support| solve_support(inst, support).is_some())
}

/// Solution with `z` supported in `support` and `w_j = 0` on the support.
fn solve_support<S: Scalar>(inst: &LcpInstance<S>, support: u32) -> Option<LcpSolution<S>> {
    let n = inst.n();
    let vars: Vec<usize> = (0..=n).filter(|k| support & (1 << k) != 0).collect();
    let column = |k: usize, j: usize| -> S {
        if k == 0 {
            inst.q[j].clone()
        } else {
            inst.r.get(j, k - 1).clone()
        }
    };
    let mut a: Vec<Vec<S>> = vars.iter().filter(|&&k| k >= 1).map(|&k| vars.iter().map(|&v| column(v, k - 1)).collect()).collect();
    let mut b = vec![S::zero(); a.len()];
    a.push(vec![S::one(); vars.len()]);
    b.push(S::one());
    let x = linalg::solve(&a, &b)?;
    if !x.iter().all(is_nonneg) {
        return None;
    }
    let mut z = vec![S::zero(); n + 1];
    for (&k, v) in vars.iter().zip(x) {
        z[k] = if v.is_negligible() { S::zero() } else { v };
    }
    let w = inst.w_of(&z);
    if !w.iter().all(is_nonneg) {
        return None;
    }
    let sol = LcpSolution { w, z };
    inst.is_solution(&sol).then_some(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QConfig {
    pub seed: u64,
    /// Number of uniform sphere samples; sign patterns are added on top.
    pub samples: usize,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig { seed: 0, samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum QStatus {
    NoCounterexampleFound { samples: usize },
    Counterexample { q: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMatrixVerdict {
    #[serde(flatten)]
    pub status: QStatus,
    pub note: &'static str,
}

impl QMatrixVerdict {
    pub fn passed(&self) -> bool {
        matches!(self.status, QStatus::NoCounterexampleFound { .. })
    }
}

const Q_NOTE: &str = "sampling falsifier: absence of a counterexample does not prove the Q-matrix property";

fn sample_qs(n: usize, cfg: &QConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut qs = Vec::new();
    let pattern_count = 3usize.checked_pow(n as u32).map(|p| p - 1);
    let magnitude = |rng: &mut ChaCha8Rng| rng.random_range(0.1..1.0);
    match pattern_count {
        Some(count) if count <= cfg.samples => {
            for code in 1..=count {
                let mut c = code;
                let q = (0..n)
                    .map(|_| {
                        let digit = c % 3;
                        c /= 3;
                        match digit {
                            0 => 0.0,
                            1 => magnitude(&mut rng),
                            _ => -magnitude(&mut rng),
                        }
                    })
                    .collect();
                qs.push(q);
            }
        }
        _ => {
            for _ in 0..cfg.samples {
                let q = (0..n)
                    .map(|_| match rng.random_range(0..3) {
                        0 => 0.0,
                        1 => magnitude(&mut rng),
                        _ => -magnitude(&mut rng),
                    })
                    .collect::<Vec<f64>>();
                if q.iter().any(|v| *v != 0.0) {
                    qs.push(q);
                }
            }
        }
    }
    for _ in 0..cfg.samples {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            qs.push(g.iter().map(|v| v / norm).collect());
        }
    }
    qs
}

/// Seeded search for a `q` with no solution. Candidates are found in `f64`
/// and, for exact scalars, confirmed exactly before being reported.
pub fn is_q_matrix_sampled<S: Scalar>(r: &Matrix<S>, cfg: &QConfig) -> QMatrixVerdict {
    assert!(cfg.samples >= 1, "at least one sample is required");
    let n = r.rows();
    let rf: Matrix<f64> = r.convert();
    let qs = sample_qs(n, cfg);
    let mut failures: Vec<usize> = qs
        .par_iter()
        .enumerate()
        .filter(|(_, q)| {
            let inst = LcpInstance { r: rf.clone(), q: q.to_vec() };
            !has_solution(&inst)
        })
        .map(|(k, _)| k)
        .collect();
    failures.sort_unstable();
    for k in failures {
        let confirmed = !S::EXACT || {
            let inst = LcpInstance { r: r.clone(), q: convert_vec::<f64, S>(&qs[k]) };
            !has_solution(&inst)
        };
        if confirmed {
            return QMatrixVerdict { status: QStatus::Counterexample { q: qs[k].clone() }, note: Q_NOTE };
        }
    }
    QMatrixVerdict { status: QStatus::NoCounterexampleFound { samples: qs.len() }, note: Q_NOTE }
}

/// Q verdict for every nonempty principal submatrix, in subset-bitmask order.
pub fn principal_minors_q<S: Scalar>(r: &Matrix<S>, cfg: &QConfig) -> Vec<(Vec<usize>, QMatrixVerdict)> {
    let n = r.rows();
    assert!(n <= 12, "principal minor scan is limited to n <= 12");
    (1u32..(1 << n))
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let verdict = is_q_matrix_sampled(&r.principal(&idx), cfg);
            (idx, verdict)
        })
        .collect()
}

/// A distribution `z` over `J` with `(R_J z)_j >= 0` for all `j` in `J` and
/// equality for at least one `j`, obtained from `lcp(R_J, -e_{i0})`.
///
/// `j_set` lists indices into `r`; the output is aligned with `j_set`.
pub fn step1_direction<S: Scalar>(r: &Matrix<S>, j_set: &[usize], i0: usize) -> Result<Vec<S>> {
    let Some(pos) = j_set.iter().position(|&j| j == i0) else {
        return Err(Error::Precondition(format!("i0 = {i0} is not in J")));
    };
    let rj = r.principal(j_set);
    if (0..j_set.len()).any(|k| !rj.get(k, k).is_negligible()) {
        return Err(Error::Precondition("R_J must have a zero diagonal (normalized game)".into()));
    }
    let mut q = vec![S::zero(); j_set.len()];
    q[pos] = -S::one();
    let inst = LcpInstance::new(rj.clone(), q)?;
    let mut candidates: Vec<(Vec<usize>, Vec<S>)> = solve_enumerate(&inst)
        .into_iter()
        .filter(|s| s.z[0] < S::one() && !(S::one() - s.z[0].clone()).is_negligible())
        .map(|s| {
            let scale = S::one() - s.z[0].clone();
            let z: Vec<S> = s.z[1..].iter().map(|v| v.clone() / scale.clone()).collect();
            (s.support(), z)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    candidates
        .into_iter()
        .map(|(_, z)| z)
        .find(|z| {
            let combo = rj.mul_vec(z);
            combo.iter().all(is_nonneg) && combo.iter().any(|v| v.is_negligible())
        })
        .ok_or_else(|| Error::NoLcpSolution(format!("lcp(R_J, -e_{}) has no usable solution for J = {j_set:?}", i0 + 1)))
}
