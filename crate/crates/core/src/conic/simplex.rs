//! Dense two-phase simplex for `max cᵀx s.t. Ax = b, x ≥ 0`.
//!
//! Bland's rule is used throughout, so the method terminates on degenerate
//! problems. This solver is independent of the interior-point code and
//! serves as its exact counterpart on scalar programs.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: DVector<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// rows 0..m are constraints, row m is the objective (reduced costs)
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.t.ncols();
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..=self.m {
            if i != row {
                let f = self.t[(i, col)];
                if f != 0.0 {
                    for j in 0..width {
                        let v = self.t[(row, j)];
                        self.t[(i, j)] -= f * v;
                    }
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations on columns `0..allowed`; returns false when
    /// the objective is unbounded.
    fn run(&mut self, allowed: usize) -> bool {
        let rhs = self.t.ncols() - 1;
        loop {
            // Bland: lowest index with negative reduced cost (we minimise −c)
            let Some(col) = (0..allowed).find(|&j| self.t[(self.m, j)] < -PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..self.m {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)] / a;
                    match best {
                        Some((r, bi)) if ratio > r + 1e-14 || (ratio >= r - 1e-14 && self.basis[i] > self.basis[bi]) => {}
                        _ => best = Some((ratio, i)),
                    }
                }
            }
            match best {
                Some((_, row)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

pub fn maximize(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> LpOutcome {
    let (m, n) = a.shape();
    // columns: n originals, m artificials, rhs
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = sign * b[i];
    }
    // phase 1: minimise the sum of artificials
    for i in 0..m {
        for j in 0..n {
            t[(m, j)] -= t[(i, j)];
        }
        t[(m, n + m)] -= t[(i, n + m)];
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), m };
    tab.run(n + m);
    let infeas = -tab.t[(m, n + m)];
    let scale = 1.0 + b.amax();
    if infeas > 1e-9 * scale {
        return LpOutcome::Infeasible;
    }
    // drive remaining artificials out of the basis where possible
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[(i, j)].abs() > PIVOT_TOL) {
                tab.pivot(i, j);
            }
        }
    }
    // phase 2 objective row: reduced costs of −c
    for j in 0..=n + m {
        tab.t[(m, j)] = 0.0;
    }
    for j in 0..n {
        tab.t[(m, j)] = -c[j];
    }
    for i in 0..m {
        let bj = tab.basis[i];
        if bj < n {
            let f = tab.t[(m, bj)];
            if f != 0.0 {
                for j in 0..=n + m {
                    let v = tab.t[(i, j)];
                    tab.t[(m, j)] -= f * v;
                }
            }
        }
    }
    if !tab.run(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = DVector::zeros(n);
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[(i, n + m)];
        }
    }
    LpOutcome::Optimal { value: c.dot(&x), x }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_max() {
        // max x + 2y s.t. x + y + s = 4, x + 3y + t = 6
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 0.0, 1.0, 3.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![4.0, 6.0]);
        let c = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0]);
        match maximize(&a, &b, &c) {
            LpOutcome::Optimal { value, x } => {
                assert!((value - 5.0).abs() < 1e-12);
                assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let c = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(maximize(&a, &b, &c), LpOutcome::Infeasible);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![1.0]);
        assert_eq!(maximize(&a, &b, &c), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0, -1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, -0.25]);
        let c = DVector::from_vec(vec![0.0, 1.0, 3.0]);
        match maximize(&a, &b, &c) {
            LpOutcome::Optimal { value, .. } => assert!((value - 2.25).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
