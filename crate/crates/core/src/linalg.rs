//! Gaussian elimination over [`Scalar`], exact for rationals.

use crate::scalar::Scalar;

/// Solves `a x = b` for a possibly non-square system.
///
/// Returns the basic solution with free variables set to zero, or `None`
/// when the system is inconsistent.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Option<Vec<S>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = pick_pivot(&m, r, c) else { continue };
        m.swap(r, p);
        let inv = S::one() / m[r][c].clone();
        for v in m[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for i in 0..rows {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            let pivot_row = m[r].clone();
            for (v, pv) in m[i][c..=cols].iter_mut().zip(&pivot_row[c..=cols]) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
        pivots.push(c);
        r += 1;
    }
    if m[r..].iter().any(|row| !row[cols].is_negligible()) {
        return None;
    }
    let mut x = vec![S::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = m[i][cols].clone();
    }
    Some(x)
}

/// Row index of the pivot for column `c` at or below row `r`.
fn pick_pivot<S: Scalar>(m: &[Vec<S>], r: usize, c: usize) -> Option<usize> {
    if S::EXACT {
        return (r..m.len()).find(|&i| !m[i][c].is_zero());
    }
    let best = (r..m.len()).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())?;
    (!m[best][c].is_negligible()).then_some(best)
}
