//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use pra_core::lp::LpProblem;
use pra_core::nn::Matrix;
use pra_core::sim::Scenario;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every permutation of `0..k` in lexicographic order.
pub fn all_perms(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// All permutations for small `k`, otherwise `n_random` random ones.
pub fn test_perms(k: usize, n_random: usize, r: &mut impl Rng) -> Vec<Vec<usize>> {
    if k <= 4 {
        return all_perms(k);
    }
    (0..n_random)
        .map(|_| {
            let mut p: Vec<usize> = (0..k).collect();
            p.shuffle(r);
            p
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    for i in (0..m).rev() {
        if idx[i] < n - m + i {
            idx[i] += 1;
            for j in i + 1..m {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimum of a bounded LP by enumerating every basic solution of its
/// slack form `[A_eq 0; A_ub I] (x, w) = b`, `(x, w) ≥ 0`. `None` when no
/// basic solution is feasible. All-zero inequality rows are dropped first.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let n = lp.n_vars();
    let ub_rows: Vec<usize> = (0..lp.b_ub.len())
        .filter(|&i| lp.a_ub.row(i).iter().any(|v| *v != 0.0))
        .collect();
    if (0..lp.b_ub.len()).any(|i| !ub_rows.contains(&i) && lp.b_ub[i] < 0.0) {
        return None;
    }
    let m_eq = lp.b_eq.len();
    let m = m_eq + ub_rows.len();
    let cols = n + ub_rows.len();
    let column = |c: usize| -> Vec<f64> {
        let mut col = vec![0.0; m];
        for r in 0..m_eq {
            col[r] = if c < n { lp.a_eq.get(r, c) } else { 0.0 };
        }
        for (q, &i) in ub_rows.iter().enumerate() {
            col[m_eq + q] = if c < n {
                lp.a_ub.get(i, c)
            } else if c - n == q {
                1.0
            } else {
                0.0
            };
        }
        col
    };
    let all_cols: Vec<Vec<f64>> = (0..cols).map(column).collect();
    let b: Vec<f64> = lp
        .b_eq
        .iter()
        .copied()
        .chain(ub_rows.iter().map(|&i| lp.b_ub[i]))
        .collect();
    if m == 0 {
        return Some(0.0);
    }
    if m > cols {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let a: Vec<Vec<f64>> = (0..m)
            .map(|r| idx.iter().map(|&c| all_cols[c][r]).collect())
            .collect();
        if let Some(xb) = solve_square(a, b.clone()) {
            if xb.iter().all(|v| *v >= -1e-9) {
                let obj: f64 = idx
                    .iter()
                    .zip(&xb)
                    .filter(|(c, _)| **c < n)
                    .map(|(c, v)| lp.c[*c] * v)
                    .sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        if !next_combination(&mut idx, cols) {
            break;
        }
    }
    best
}

/// Minimum total time over plans whose entries are multiples of `h`,
/// for scenarios where every active user's QoS row pins its last active
/// frame given the others. Exhaustive; only for tiny instances.
pub fn grid_enumeration(sc: &Scenario, h: f64) -> Option<f64> {
    let t_f = sc.n_frames();
    let steps = (1.0 / h).round() as usize;
    let mut free: Vec<(usize, usize)> = Vec::new();
    let mut pinned: Vec<(usize, usize)> = Vec::new();
    for k in 0..sc.k {
        let active: Vec<usize> = (0..t_f)
            .filter(|&j| sc.norm_rates.get(k, j) > 0.0)
            .collect();
        let (last, rest) = active.split_last()?;
        free.extend(rest.iter().map(|&j| (k, j)));
        pinned.push((k, *last));
    }
    let mut best: Option<f64> = None;
    let mut counter = vec![0usize; free.len()];
    loop {
        let mut plan = Matrix::zeros(sc.k_max(), t_f);
        for (&(k, j), &c) in free.iter().zip(&counter) {
            plan.set(k, j, c as f64 * h);
        }
        let mut ok = true;
        for &(k, j) in &pinned {
            let got: f64 = (0..t_f)
                .map(|jj| plan.get(k, jj) * sc.norm_rates.get(k, jj))
                .sum();
            let s = (1.0 - got) / sc.norm_rates.get(k, j);
            if s < -1e-12 {
                ok = false;
            }
            plan.set(k, j, s.max(0.0));
        }
        if ok {
            let feasible = sc.assoc.iter().all(|m| {
                (0..t_f).all(|j| {
                    (0..sc.k).map(|k| m.get(k, j) * plan.get(k, j)).sum::<f64>() <= 1.0 + 1e-12
                })
            });
            if feasible {
                let obj: f64 = plan.data().iter().sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        let mut i = 0;
        loop {
            if i == counter.len() {
                return best;
            }
            counter[i] += 1;
            if counter[i] <= steps {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

/// Random hand-made instance: rates uniform in `[lo, hi]`, with each
/// (user, frame) cell served by a random BS and occasionally unusable
/// (rate 0). Every active user keeps at least one usable frame.
pub fn random_instance(
    r: &mut impl Rng,
    k_max: usize,
    k: usize,
    t_f: usize,
    n_bs: usize,
    lo: f64,
    hi: f64,
) -> Scenario {
    let mut rates = Matrix::zeros(k_max, t_f);
    let mut serving = vec![vec![None; t_f]; k_max];
    for kk in 0..k {
        let keep = r.random_range(0..t_f);
        for j in 0..t_f {
            serving[kk][j] = Some(r.random_range(0..n_bs));
            if j == keep || !r.random_bool(0.15) {
                rates.set(kk, j, r.random_range(lo..hi));
            }
        }
    }
    Scenario::from_normalized(k, n_bs, rates, &serving).expect("valid instance")
}

/// The same scenario with its user rows reordered: new row `k` is old row
/// `perm[k]`. `perm` must fix the padded rows.
pub fn permute_users(sc: &Scenario, perm: &[usize]) -> Scenario {
    let (k_max, t_f) = sc.norm_rates.shape();
    let rows = |m: &Matrix| Matrix::from_fn(k_max, t_f, |k, j| m.get(perm[k], j));
    let mut out = sc.clone();
    out.norm_rates = rows(&sc.norm_rates);
    out.rates = rows(&sc.rates);
    out.gain = rows(&sc.gain);
    out.assoc = sc.assoc.iter().map(rows).collect();
    out.file_bits = perm.iter().map(|&p| sc.file_bits[p]).collect();
    out
}
