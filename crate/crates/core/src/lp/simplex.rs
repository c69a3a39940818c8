//! Two-phase dense tableau simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  A_eq x = b_eq,  A_ub x ≤ b_ub,  x ≥ 0`.
//!
//! Phase one minimizes the sum of artificial variables; artificial variables
//! left in the basis at zero level are pivoted out or their rows dropped as
//! redundant. Phase two optimizes the true objective. Bland's smallest-index
//! rule for both entering and leaving variables rules out cycling. The final
//! basis is re-solved with a factorization to recover accurate primal values
//! and the dual multipliers used for the KKT report.

use serde::{Deserialize, Serialize};

use super::linalg::solve_dense;
use crate::error::{dim_err, Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub a_ub: Matrix,
    pub b_ub: Vec<f64>,
}

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.c.len();
        if self.a_eq.cols() != n && self.a_eq.rows() > 0 {
            return dim_err("A_eq column count differs from objective length");
        }
        if self.a_ub.cols() != n && self.a_ub.rows() > 0 {
            return dim_err("A_ub column count differs from objective length");
        }
        if self.a_eq.rows() != self.b_eq.len() || self.a_ub.rows() != self.b_ub.len() {
            return dim_err("right-hand side length differs from row count");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Optimality certificate of an LP solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    /// Max violation of `A_eq x = b_eq` and `A_ub x ≤ b_ub`.
    pub primal_residual: f64,
    /// Max violation of `x ≥ 0`.
    pub bound_violation: f64,
    /// Max violation of dual feasibility (negative reduced cost or positive
    /// inequality multiplier).
    pub dual_residual: f64,
    /// Max of `|x_j · reduced_cost_j|` and `|y_i · slack_i|`.
    pub complementarity: f64,
    /// `|cᵀx − (b_eqᵀ y_eq + b_ubᵀ y_ub)|`.
    pub duality_gap: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal_residual
            .max(self.bound_violation)
            .max(self.dual_residual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows (free sign).
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality rows (non-positive for a minimization).
    pub y_ub: Vec<f64>,
    pub kkt: KktReport,
    pub pivots: usize,
}

const MAX_PIVOTS: usize = 200_000;

struct Tableau {
    /// Constraint rows; last entry is the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs; last entry is minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Original constraint index of each row (equality rows first).
    row_ids: Vec<usize>,
    /// Number of columns usable for entering (excludes the rhs).
    active_cols: usize,
    tol: f64,
    pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn run(&mut self) -> Result<PhaseEnd> {
        let rhs = self.rhs();
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Numerical("simplex pivot limit exceeded".into()));
            }
            // Bland: lowest-index improving column.
            let Some(enter) = (0..self.active_cols).find(|&j| self.obj[j] < -self.tol) else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > self.tol {
                    let ratio = row[rhs] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let closer = ratio < lratio - self.tol;
                            let tie = (ratio - lratio).abs() <= self.tol;
                            if closer || (tie && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(PhaseEnd::Unbounded),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Solves `lp`. `tol` is the pivoting and feasibility tolerance.
pub fn solve_lp(lp: &LpProblem, tol: f64) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.n_vars();
    let (m_eq, m_ub) = (lp.b_eq.len(), lp.b_ub.len());
    let m = m_eq + m_ub;

    // Column layout: [x (n) | slacks (m_ub) | artificials (n_art)].
    // Row signs are flipped so every right-hand side is non-negative.
    let mut sign = vec![1.0; m];
    let mut needs_art = vec![false; m];
    for i in 0..m_eq {
        if lp.b_eq[i] < 0.0 {
            sign[i] = -1.0;
        }
        needs_art[i] = true;
    }
    for i in 0..m_ub {
        if lp.b_ub[i] < 0.0 {
            sign[m_eq + i] = -1.0;
            needs_art[m_eq + i] = true;
        }
    }
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let n_struct = n + m_ub;
    let n_cols = n_struct + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = n_struct;
    for i in 0..m {
        let mut row = vec![0.0; n_cols + 1];
        let (coeffs, b) = if i < m_eq {
            (lp.a_eq.row(i), lp.b_eq[i])
        } else {
            (lp.a_ub.row(i - m_eq), lp.b_ub[i - m_eq])
        };
        for (v, a) in row.iter_mut().zip(coeffs) {
            *v = sign[i] * a;
        }
        if i >= m_eq {
            row[n + (i - m_eq)] = sign[i];
        }
        row[n_cols] = sign[i] * b;
        if needs_art[i] {
            row[art] = 1.0;
            basis.push(art);
            art += 1;
        } else {
            basis.push(n + (i - m_eq));
        }
        rows.push(row);
    }

    // Phase one: minimize the artificial sum.
    let mut obj = vec![0.0; n_cols + 1];
    for (row, &b) in rows.iter().zip(&basis) {
        if b >= n_struct {
            for (o, v) in obj.iter_mut().zip(row) {
                *o -= v;
            }
        }
    }
    for o in obj.iter_mut().take(n_cols).skip(n_struct) {
        *o = 0.0;
    }
    let mut tab = Tableau {
        rows,
        obj,
        basis,
        row_ids: (0..m).collect(),
        active_cols: n_cols,
        tol,
        pivots: 0,
    };
    if n_art > 0 {
        tab.run()?;
        let scale = 1.0
            + lp.b_eq
                .iter()
                .chain(&lp.b_ub)
                .fold(0.0f64, |a, b| a.max(b.abs()));
        if -tab.obj[n_cols] > tol * scale * m as f64 {
            return Ok(infeasible(n, m_eq, m_ub, tab.pivots));
        }
        // Drive zero-level artificials out of the basis.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= n_struct {
                match (0..n_struct).find(|&j| tab.rows[r][j].abs() > tol) {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        tab.row_ids.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }
    // Phase two on structural columns only.
    for row in tab.rows.iter_mut() {
        let rhs = row[n_cols];
        row.truncate(n_struct);
        row.push(rhs);
    }
    let mut obj = vec![0.0; n_struct + 1];
    obj[..n].copy_from_slice(&lp.c);
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        let cb = if b < n { lp.c[b] } else { 0.0 };
        if cb != 0.0 {
            for (o, v) in obj.iter_mut().zip(row) {
                *o -= cb * v;
            }
        }
    }
    tab.obj = obj;
    tab.active_cols = n_struct;
    match tab.run()? {
        PhaseEnd::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![],
                objective: f64::NEG_INFINITY,
                y_eq: vec![],
                y_ub: vec![],
                kkt: KktReport::default(),
                pivots: tab.pivots,
            })
        }
        PhaseEnd::Optimal => {}
    }

    finish(lp, &tab, n, m_eq, m_ub)
}

fn infeasible(n: usize, m_eq: usize, m_ub: usize, pivots: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective: f64::INFINITY,
        y_eq: vec![0.0; m_eq],
        y_ub: vec![0.0; m_ub],
        kkt: KktReport::default(),
        pivots,
    }
}

fn finish(lp: &LpProblem, tab: &Tableau, n: usize, m_eq: usize, m_ub: usize) -> Result<LpSolution> {
    let n_struct = n + m_ub;
    let rhs = n_struct;
    let rank = tab.rows.len();
    let kept = &tab.row_ids;

    // Standard-form column j restricted to the kept rows (original signs).
    let column = |j: usize| -> Vec<f64> {
        kept.iter()
            .map(|&i| {
                if j < n {
                    if i < m_eq {
                        lp.a_eq.get(i, j)
                    } else {
                        lp.a_ub.get(i - m_eq, j)
                    }
                } else if i >= m_eq && j - n == i - m_eq {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let b_kept: Vec<f64> = kept
        .iter()
        .map(|&i| {
            if i < m_eq {
                lp.b_eq[i]
            } else {
                lp.b_ub[i - m_eq]
            }
        })
        .collect();

    let mut std_x = vec![0.0; n_struct];
    let mut y_kept = vec![0.0; rank];
    let basis_cols: Vec<Vec<f64>> = tab.basis.iter().map(|&j| column(j)).collect();
    let b_mat = Matrix::from_fn(rank, rank, |r, c| basis_cols[c][r]);
    match solve_dense(&b_mat, &b_kept) {
        Some(xb) => {
            for (&j, v) in tab.basis.iter().zip(xb) {
                std_x[j] = v.max(0.0);
            }
            let cb: Vec<f64> = tab
                .basis
                .iter()
                .map(|&j| if j < n { lp.c[j] } else { 0.0 })
                .collect();
            if let Some(y) = solve_dense(&b_mat.transpose(), &cb) {
                y_kept = y;
            }
        }
        None => {
            for (r, &j) in tab.basis.iter().enumerate() {
                std_x[j] = tab.rows[r][rhs].max(0.0);
            }
        }
    }

    let x = std_x[..n].to_vec();
    let mut y_eq = vec![0.0; m_eq];
    let mut y_ub = vec![0.0; m_ub];
    for (&i, &y) in kept.iter().zip(&y_kept) {
        if i < m_eq {
            y_eq[i] = y;
        } else {
            y_ub[i - m_eq] = y;
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    let kkt = kkt_report(lp, &x, &y_eq, &y_ub);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        y_eq,
        y_ub,
        kkt,
        pivots: tab.pivots,
    })
}

/// KKT residuals of a primal-dual pair.
pub fn kkt_report(lp: &LpProblem, x: &[f64], y_eq: &[f64], y_ub: &[f64]) -> KktReport {
    let n = lp.n_vars();
    let mut rep = KktReport::default();
    let mut reduced = lp.c.clone();
    for (i, &y) in y_eq.iter().enumerate() {
        let row = lp.a_eq.row(i);
        let ax: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        rep.primal_residual = rep.primal_residual.max((ax - lp.b_eq[i]).abs());
        for j in 0..n {
            reduced[j] -= row[j] * y;
        }
    }
    for (i, &y) in y_ub.iter().enumerate() {
        let row = lp.a_ub.row(i);
        let ax: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        let slack = lp.b_ub[i] - ax;
        rep.primal_residual = rep.primal_residual.max((-slack).max(0.0));
        rep.dual_residual = rep.dual_residual.max(y.max(0.0));
        rep.complementarity = rep.complementarity.max((y * slack).abs());
        for j in 0..n {
            reduced[j] -= row[j] * y;
        }
    }
    for j in 0..n {
        rep.bound_violation = rep.bound_violation.max((-x[j]).max(0.0));
        rep.dual_residual = rep.dual_residual.max((-reduced[j]).max(0.0));
        rep.complementarity = rep.complementarity.max((x[j] * reduced[j]).abs());
    }
    let primal: f64 = lp.c.iter().zip(x).map(|(a, b)| a * b).sum();
    let dual: f64 = lp.b_eq.iter().zip(y_eq).map(|(a, b)| a * b).sum::<f64>()
        + lp.b_ub.iter().zip(y_ub).map(|(a, b)| a * b).sum::<f64>();
    rep.duality_gap = (primal - dual).abs();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(
        c: Vec<f64>,
        eq: &[Vec<f64>],
        b_eq: Vec<f64>,
        ub: &[Vec<f64>],
        b_ub: Vec<f64>,
    ) -> LpProblem {
        let n = c.len();
        let a_eq = if eq.is_empty() {
            Matrix::zeros(0, n)
        } else {
            Matrix::from_rows(eq).unwrap()
        };
        let a_ub = if ub.is_empty() {
            Matrix::zeros(0, n)
        } else {
            Matrix::from_rows(ub).unwrap()
        };
        LpProblem {
            c,
            a_eq,
            b_eq,
            a_ub,
            b_ub,
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → (2, 6), 36
        let p = lp(
            vec![-3.0, -5.0],
            &[],
            vec![],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            vec![4.0, 12.0, 18.0],
        );
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!(s.kkt.duality_gap < 1e-9 && s.kkt.max_residual() < 1e-9);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y s.t. x + y = 2, −x ≤ −0.5 (x ≥ 0.5)
        let p = lp(
            vec![1.0, 2.0],
            &[vec![1.0, 1.0]],
            vec![2.0],
            &[vec![-1.0, 0.0]],
            vec![-0.5],
        );
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!(s.kkt.duality_gap < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let p = lp(vec![1.0], &[vec![1.0]], vec![3.0], &[vec![1.0]], vec![1.0]);
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Infeasible);
        let p = lp(vec![-1.0, 0.0], &[], vec![], &[vec![0.0, 1.0]], vec![1.0]);
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equality_rows_are_dropped() {
        let p = lp(
            vec![1.0, 1.0],
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
            &[],
            vec![],
        );
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!(s.kkt.duality_gap < 1e-9, "{:?}", s.kkt);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale) under Dantzig's rule.
        let p = lp(
            vec![-0.75, 150.0, -0.02, 6.0],
            &[],
            vec![],
            &[
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![0.0, 0.0, 1.0],
        );
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
