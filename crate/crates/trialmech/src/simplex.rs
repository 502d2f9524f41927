//! Dense two-phase simplex for the small LPs behind the benchmarks.
//!
//! Problems here have at most a few hundred rows and columns, so a dense
//! tableau with Bland's pivoting rule (no cycling, fully deterministic) is
//! the right tool: no external dependency, and identical pivots on every
//! run. Maximizes `c . x` subject to equality and `>=` rows with `x >= 0`.

use crate::error::Error;

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;

/// One linear constraint row.
#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub kind: RowKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Ge,
}

impl Row {
    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs, kind: RowKind::Eq }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs, kind: RowKind::Ge }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    n_structural: usize,
    n_total: usize,
    n_rows: usize,
    /// `n_rows + 1` rows by `n_total + 1` columns; last row is the objective,
    /// last column the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    artificial_start: usize,
}

impl Tableau {
    fn build(objective: &[f64], rows: &[Row]) -> Result<Self, Error> {
        let n_structural = objective.len();
        let n_rows = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.coeffs.len() != n_structural {
                return Err(Error::Solver(format!(
                    "row {i} has {} coefficients, expected {n_structural}",
                    row.coeffs.len()
                )));
            }
        }

        // Layout: structural | surplus (one per Ge row) | artificial (one per row).
        let n_surplus = rows.iter().filter(|r| r.kind == RowKind::Ge).count();
        let artificial_start = n_structural + n_surplus;
        let n_total = artificial_start + n_rows;
        let width = n_total + 1;

        let mut t = vec![0.0; (n_rows + 1) * width];
        let mut basis = vec![0; n_rows];
        let mut surplus_idx = n_structural;
        for (i, row) in rows.iter().enumerate() {
            // Flip signs so every rhs is nonnegative, which lets the
            // artificial variable of each row start basic.
            let flip = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, c) in row.coeffs.iter().enumerate() {
                t[i * width + j] = flip * c;
            }
            if row.kind == RowKind::Ge {
                t[i * width + surplus_idx] = -flip;
                surplus_idx += 1;
            }
            t[i * width + artificial_start + i] = 1.0;
            t[i * width + n_total] = flip * row.rhs;
            basis[i] = artificial_start + i;
        }

        Ok(Self { n_structural, n_total, n_rows, t, basis, artificial_start })
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.n_total + 1) + c]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.t[r * (self.n_total + 1) + c] = v;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.n_total + 1;
        let pivot = self.at(row, col);
        for c in 0..width {
            self.t[row * width + c] /= pivot;
        }
        for r in 0..=self.n_rows {
            if r == row {
                continue;
            }
            let factor = self.at(r, col);
            if factor == 0.0 {
                continue;
            }
            for c in 0..width {
                let v = self.at(r, c) - factor * self.at(row, c);
                self.set(r, c, v);
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering variable is the lowest-index column with a
    /// positive reduced cost; leaving variable is the lowest-index basic
    /// variable among minimum-ratio rows.
    fn optimize(&mut self, allowed: usize) -> Result<(), Error> {
        loop {
            let obj_row = self.n_rows;
            let mut entering = None;
            for c in 0..allowed {
                if self.at(obj_row, c) > PIVOT_TOL {
                    entering = Some(c);
                    break;
                }
            }
            let Some(col) = entering else { return Ok(()) };

            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.n_rows {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let ratio = self.at(r, self.n_total) / a;
                    let better = match leaving {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - PIVOT_TOL
                                || (ratio < lratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leaving = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(Error::Solver("unbounded program".into()));
            };
            self.pivot(row, col);
        }
    }

    fn set_objective(&mut self, coeffs: &[f64]) {
        let obj_row = self.n_rows;
        let width = self.n_total + 1;
        for c in 0..width {
            self.t[obj_row * width + c] = 0.0;
        }
        for (c, v) in coeffs.iter().enumerate() {
            self.t[obj_row * width + c] = *v;
        }
        // Price out the current basis so reduced costs are consistent.
        for r in 0..self.n_rows {
            let factor = self.at(obj_row, self.basis[r]);
            if factor == 0.0 {
                continue;
            }
            for c in 0..width {
                let v = self.at(obj_row, c) - factor * self.at(r, c);
                self.set(obj_row, c, v);
            }
        }
    }
}

/// Maximizes `objective . x` over `rows` with `x >= 0`.
///
/// Returns `Error::Solver` when the program is infeasible or unbounded;
/// callers construct programs that are feasible by design, so a failure
/// indicates a modelling bug.
pub fn maximize(objective: &[f64], rows: &[Row]) -> Result<Solution, Error> {
    let mut tab = Tableau::build(objective, rows)?;

    // Phase 1: drive the artificial variables to zero.
    let phase1: Vec<f64> = (0..tab.n_total)
        .map(|c| if c >= tab.artificial_start { -1.0 } else { 0.0 })
        .collect();
    tab.set_objective(&phase1);
    tab.optimize(tab.n_total)?;
    // The objective-row rhs cell carries the negated objective value, which
    // for phase 1 is the total artificial infeasibility.
    let infeasibility = tab.at(tab.n_rows, tab.n_total);
    if infeasibility > FEAS_TOL {
        return Err(Error::Solver(format!(
            "infeasible program (phase-1 residual {infeasibility:.3e})"
        )));
    }
    // Pivot any artificial variable still basic (at value zero) out of the
    // basis; a row with no eligible column is redundant and harmless.
    for r in 0..tab.n_rows {
        if tab.basis[r] >= tab.artificial_start {
            if let Some(col) = (0..tab.artificial_start).find(|c| tab.at(r, *c).abs() > PIVOT_TOL)
            {
                tab.pivot(r, col);
            }
        }
    }

    // Phase 2: the real objective, artificial columns locked out.
    let mut phase2 = vec![0.0; tab.n_total];
    phase2[..tab.n_structural].copy_from_slice(objective);
    tab.set_objective(&phase2);
    tab.optimize(tab.artificial_start)?;

    let mut x = vec![0.0; tab.n_structural];
    for (r, b) in tab.basis.iter().enumerate() {
        if *b < tab.n_structural {
            x[*b] = tab.at(r, tab.n_total);
        }
    }
    let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(Solution { x, objective: objective_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_textbook_lp() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 (as >= with flips)
        // optimum (2, 6) -> 36
        let rows = vec![
            Row::ge(vec![-1.0, 0.0], -4.0),
            Row::ge(vec![0.0, -2.0], -12.0),
            Row::ge(vec![-3.0, -2.0], -18.0),
        ];
        let sol = maximize(&[3.0, 5.0], &rows).unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn handles_equalities() {
        // max x + y st x + y = 1, x >= 0.25
        let rows = vec![
            Row::eq(vec![1.0, 1.0], 1.0),
            Row::ge(vec![1.0, 0.0], 0.25),
        ];
        let sol = maximize(&[1.0, 1.0], &rows).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let rows = vec![
            Row::eq(vec![1.0], 1.0),
            Row::ge(vec![1.0], 2.0),
        ];
        assert!(matches!(maximize(&[1.0], &rows), Err(Error::Solver(_))));
    }

    #[test]
    fn detects_unbounded() {
        let rows = vec![Row::ge(vec![1.0], 1.0)];
        assert!(matches!(maximize(&[1.0], &rows), Err(Error::Solver(_))));
    }

    #[test]
    fn degenerate_vertices_terminate() {
        // Multiple redundant constraints through the optimum.
        let rows = vec![
            Row::ge(vec![-1.0, -1.0], -1.0),
            Row::ge(vec![-1.0, -1.0], -1.0),
            Row::ge(vec![-2.0, -2.0], -2.0),
            Row::ge(vec![-1.0, 0.0], -1.0),
        ];
        let sol = maximize(&[1.0, 2.0], &rows).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // max -x st x >= 3 written with a negative-rhs flip: -x >= -5
        let rows = vec![Row::ge(vec![1.0], 3.0), Row::ge(vec![-1.0], -5.0)];
        let sol = maximize(&[-1.0], &rows).unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
    }
}
