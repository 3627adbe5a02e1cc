//! Independent reference computations for integration tests. Nothing here
//! calls the solvers under test.

#![allow(dead_code)]

use nalgebra::DMatrix;
use riskeig_core::{MdpInstance, NonnegMatrix, Policy};

/// Largest eigenvalue modulus from a dense real Schur decomposition.
pub fn dense_sprad(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Transitive closure by Floyd–Warshall; `reach[i][j]` iff a path of length
/// zero or more leads from `i` to `j`.
pub fn closure(rows: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let n = rows.len();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || rows[i][j] > 0.0).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Per-state growth `log sprad` of the part of `Q` reachable from each
/// state, via mutual-reachability classes and dense eigenvalues.
pub fn reachable_log_sprad(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let reach = closure(rows);
    let class_radius: Vec<f64> = (0..n)
        .map(|i| {
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            if class.len() == 1 {
                rows[i][i]
            } else {
                let sub: Vec<Vec<f64>> = class
                    .iter()
                    .map(|&a| class.iter().map(|&b| rows[a][b]).collect())
                    .collect();
                dense_sprad(&sub)
            }
        })
        .collect();
    (0..n)
        .map(|i| {
            let best = (0..n)
                .filter(|&j| reach[i][j])
                .map(|j| class_radius[j])
                .fold(0.0, f64::max);
            if best > 0.0 {
                best.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// `Q_φ(i,j) = Σ_u φ(u|i) p(j|i,u) e^{r(i,u,j)}`, written out directly.
pub fn weight_rows(inst: &MdpInstance, policy: &Policy) -> Vec<Vec<f64>> {
    let n = inst.n_states();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    inst.rows(i)
                        .iter()
                        .zip(policy.row(i))
                        .map(|(row, &phi)| {
                            if row.prob[j] > 0.0 {
                                phi * row.prob[j] * row.reward[j].exp()
                            } else {
                                0.0
                            }
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Every deterministic policy as a list of slots.
pub fn all_slot_choices(inst: &MdpInstance) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..inst.n_states() {
        let k = inst.rows(i).len();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |s| {
                    let mut v = prefix.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

/// Per-state optimal growth by enumerating deterministic policies.
pub fn brute_force_growth(inst: &MdpInstance) -> Vec<f64> {
    let n = inst.n_states();
    let mut best = vec![f64::NEG_INFINITY; n];
    for slots in all_slot_choices(inst) {
        let policy = Policy::deterministic(inst, &slots).unwrap();
        for (b, g) in best.iter_mut().zip(reachable_log_sprad(&weight_rows(inst, &policy))) {
            *b = b.max(g);
        }
    }
    best
}

/// `Σ_{paths of length N from i} Π Q(x_m, x_{m+1})` by explicit enumeration.
pub fn path_sum(rows: &[Vec<f64>], start: usize, len: usize) -> f64 {
    if len == 0 {
        return 1.0;
    }
    (0..rows.len())
        .filter(|&j| rows[start][j] > 0.0)
        .map(|j| rows[start][j] * path_sum(rows, j, len - 1))
        .sum()
}

pub fn matrix_rows(q: &NonnegMatrix) -> Vec<Vec<f64>> {
    (0..q.n()).map(|i| q.row(i).to_vec()).collect()
}

/// `Σ q c − D(q‖p)` written out.
pub fn gibbs_objective(p: &[f64], c: &[f64], q: &[f64]) -> f64 {
    let mut v = 0.0;
    for k in 0..p.len() {
        if q[k] > 0.0 {
            v += q[k] * c[k] - q[k] * (q[k] / p[k]).ln();
        }
    }
    v
}

/// Maximum of a concave function over `0..=hi` by ternary search on the
/// integer grid, finished by a local scan.
fn grid_argmax(hi: usize, f: impl Fn(usize) -> f64) -> (usize, f64) {
    let (mut lo, mut up) = (0usize, hi);
    while up - lo > 4 {
        let m1 = lo + (up - lo) / 3;
        let m2 = up - (up - lo) / 3;
        if f(m1) < f(m2) {
            lo = m1 + 1;
        } else {
            up = m2;
        }
    }
    (lo..=up)
        .map(|k| (k, f(k)))
        .fold((lo, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

/// Best value of `Σ q c − D(q‖p)` over the 2-simplex grid with spacing
/// `1/steps`. The objective is concave, so nested grid ternary search finds
/// the grid maximum; the outer scan is widened for safety.
pub fn simplex_grid_max3(p: &[f64; 3], c: &[f64; 3], steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    let inner = |a: usize| {
        grid_argmax(steps - a, |b| {
            let q = [a as f64 * h, b as f64 * h, (steps - a - b) as f64 * h];
            gibbs_objective(p, c, &q)
        })
        .1
    };
    let (a0, _) = grid_argmax(steps, inner);
    let lo = a0.saturating_sub(50);
    let hi = (a0 + 50).min(steps);
    (lo..=hi).map(inner).fold(f64::NEG_INFINITY, f64::max)
}
