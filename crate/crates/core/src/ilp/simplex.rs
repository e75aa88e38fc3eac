//! Dense bounded-variable primal simplex over exact rationals.
//!
//! Structural variables live in `[0, 1]`, fixed variables are substituted
//! out, slack variables are unbounded above. Phase I minimizes the sum of
//! artificials; afterwards artificials get an upper bound of zero so they
//! can never re-enter at a positive level. Bland's rule prevents cycling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{BinaryProgram, RowKind, SolverError};

/// Continuous relaxation of a binary program.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRelaxation {
    pub feasible: bool,
    /// Optimal value, a lower bound on the binary optimum.
    pub value: Option<BigRational>,
    /// Optimal point over all variables (fixed ones included).
    pub point: Option<Vec<BigRational>>,
}

/// Solves the relaxation with every variable in `[0, 1]`.
pub fn lp_relax(program: &BinaryProgram) -> Result<LpRelaxation, SolverError> {
    program.validate()?;
    let objective: Vec<BigInt> = program.objective().iter().map(|&c| BigInt::from(c)).collect();
    Ok(match relax(program, &objective, program.fixings())? {
        Some((value, point)) => LpRelaxation {
            feasible: true,
            value: Some(value),
            point: Some(point),
        },
        None => LpRelaxation {
            feasible: false,
            value: None,
            point: None,
        },
    })
}

struct Tableau {
    rows: Vec<Vec<BigRational>>,
    /// Values of the basic variables.
    values: Vec<BigRational>,
    basis: Vec<usize>,
    upper: Vec<Option<BigRational>>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
}

impl Tableau {
    fn reduced_costs(&self, costs: &[BigRational]) -> Vec<BigRational> {
        let mut d = costs.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, tij) in d.iter_mut().zip(row) {
                if !tij.is_zero() {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [BigRational]) {
        let piv = self.rows[r][j].clone();
        if !piv.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &piv;
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        let nz: Vec<usize> = (0..pivot_row.len()).filter(|&k| !pivot_row[k].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j].clone();
            if f.is_zero() {
                continue;
            }
            for &k in &nz {
                row[k] -= &f * &pivot_row[k];
            }
        }
        let f = d[j].clone();
        if !f.is_zero() {
            for &k in &nz {
                d[k] -= &f * &pivot_row[k];
            }
        }
    }

    /// Runs primal simplex iterations for the given costs until optimal.
    fn optimize(&mut self, costs: &[BigRational]) -> Result<(), SolverError> {
        let mut d = self.reduced_costs(costs);
        let ncols = costs.len();
        loop {
            // Bland: smallest eligible index enters
            let entering = (0..ncols).find(|&j| {
                if self.is_basic[j] {
                    return false;
                }
                if matches!(&self.upper[j], Some(u) if u.is_zero()) {
                    return false;
                }
                if self.at_upper[j] {
                    d[j].is_positive()
                } else {
                    d[j].is_negative()
                }
            });
            let Some(j) = entering else {
                return Ok(());
            };
            let increasing = !self.at_upper[j];

            // ratio test; `None` leaving means a bound flip of the entering variable
            let mut step: Option<BigRational> = self.upper[j].clone();
            let mut leaving: Option<(usize, bool)> = None;
            for i in 0..self.rows.len() {
                let tij = &self.rows[i][j];
                if tij.is_zero() {
                    continue;
                }
                // change of basic var i per unit step
                let delta = if increasing { -tij.clone() } else { tij.clone() };
                let (limit, to_upper) = if delta.is_negative() {
                    (&self.values[i] / -&delta, false)
                } else {
                    match &self.upper[self.basis[i]] {
                        Some(u) => ((u - &self.values[i]) / &delta, true),
                        None => continue,
                    }
                };
                let take = match &step {
                    None => true,
                    Some(s) => {
                        limit < *s
                            || (limit == *s
                                && leaving.is_some_and(|(li, _)| self.basis[i] < self.basis[li]))
                    }
                };
                if take {
                    step = Some(limit);
                    leaving = Some((i, to_upper));
                }
            }
            let Some(t) = step else {
                return Err(SolverError::Unbounded);
            };

            for i in 0..self.rows.len() {
                let tij = &self.rows[i][j];
                if tij.is_zero() {
                    continue;
                }
                let change = tij * &t;
                if increasing {
                    self.values[i] -= change;
                } else {
                    self.values[i] += change;
                }
            }
            match leaving {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let entering_value = if increasing {
                        t
                    } else {
                        self.upper[j].clone().expect("decreasing var has a bound") - t
                    };
                    let old = self.basis[r];
                    self.is_basic[old] = false;
                    self.at_upper[old] = to_upper;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.basis[r] = j;
                    self.values[r] = entering_value;
                    self.pivot(r, j, &mut d);
                }
            }
        }
    }

    fn value_of(&self, col: usize) -> BigRational {
        if let Some(r) = self.basis.iter().position(|&b| b == col) {
            self.values[r].clone()
        } else if self.at_upper[col] {
            self.upper[col].clone().expect("at upper bound")
        } else {
            BigRational::zero()
        }
    }
}

/// Minimizes `objective · v` over the relaxation with `fixings` applied.
/// Returns `None` when infeasible.
pub(crate) fn relax(
    program: &BinaryProgram,
    objective: &[BigInt],
    fixings: &[Option<bool>],
) -> Result<Option<(BigRational, Vec<BigRational>)>, SolverError> {
    if program.has_conflicting_fixings() {
        return Ok(None);
    }
    let n = program.variables();
    let free: Vec<usize> = (0..n).filter(|&k| fixings[k].is_none()).collect();
    let fixed_value = |k: usize| i64::from(fixings[k] == Some(true));

    // reduced rows over free variables, rhs moved to non-negative
    struct Reduced {
        coeffs: Vec<i64>,
        slack: i64,
        rhs: i64,
    }
    let mut reduced = Vec::new();
    for row in program.rows() {
        let mut rhs = row.rhs;
        for (k, f) in fixings.iter().enumerate() {
            if f.is_some() {
                rhs -= row.coefficients[k] * fixed_value(k);
            }
        }
        let coeffs: Vec<i64> = free.iter().map(|&k| row.coefficients[k]).collect();
        if coeffs.iter().all(|&c| c == 0) {
            let ok = match row.kind {
                RowKind::Ge => 0 >= rhs,
                RowKind::Le => 0 <= rhs,
                RowKind::Eq => rhs == 0,
            };
            if !ok {
                return Ok(None);
            }
            continue;
        }
        let slack = match row.kind {
            RowKind::Ge => -1,
            RowKind::Le => 1,
            RowKind::Eq => 0,
        };
        // negating a homogeneous >= row turns its slack into a basic column
        if rhs < 0 || (rhs == 0 && slack == -1) {
            reduced.push(Reduced {
                coeffs: coeffs.iter().map(|c| -c).collect(),
                slack: -slack,
                rhs: -rhs,
            });
        } else {
            reduced.push(Reduced { coeffs, slack, rhs });
        }
    }

    let nf = free.len();
    let slack_rows: Vec<usize> = (0..reduced.len()).filter(|&i| reduced[i].slack != 0).collect();
    let art_rows: Vec<usize> = (0..reduced.len()).filter(|&i| reduced[i].slack != 1).collect();
    let ns = slack_rows.len();
    let na = art_rows.len();
    let ncols = nf + ns + na;

    let mut rows = Vec::with_capacity(reduced.len());
    let mut basis = vec![0usize; reduced.len()];
    let mut values = Vec::with_capacity(reduced.len());
    for (i, r) in reduced.iter().enumerate() {
        let mut row = vec![BigRational::zero(); ncols];
        for (c, v) in r.coeffs.iter().enumerate() {
            if *v != 0 {
                row[c] = BigRational::from_integer(BigInt::from(*v));
            }
        }
        if let Some(s) = slack_rows.iter().position(|&x| x == i) {
            row[nf + s] = BigRational::from_integer(BigInt::from(r.slack));
            if r.slack == 1 {
                basis[i] = nf + s;
            }
        }
        if let Some(a) = art_rows.iter().position(|&x| x == i) {
            row[nf + ns + a] = BigRational::one();
            basis[i] = nf + ns + a;
        }
        rows.push(row);
        values.push(BigRational::from_integer(BigInt::from(r.rhs)));
    }
    let mut upper = vec![None; ncols];
    for u in upper.iter_mut().take(nf) {
        *u = Some(BigRational::one());
    }
    let mut is_basic = vec![false; ncols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        rows,
        values,
        basis,
        upper,
        at_upper: vec![false; ncols],
        is_basic,
    };

    if na > 0 {
        let mut costs = vec![BigRational::zero(); ncols];
        for c in costs.iter_mut().skip(nf + ns) {
            *c = BigRational::one();
        }
        tab.optimize(&costs)?;
        let infeasibility: BigRational = (nf + ns..ncols).map(|c| tab.value_of(c)).sum();
        if infeasibility.is_positive() {
            return Ok(None);
        }
        for c in nf + ns..ncols {
            tab.upper[c] = Some(BigRational::zero());
        }
    }

    let mut costs = vec![BigRational::zero(); ncols];
    for (c, &k) in free.iter().enumerate() {
        costs[c] = BigRational::from_integer(objective[k].clone());
    }
    tab.optimize(&costs)?;

    let mut point = vec![BigRational::zero(); n];
    for k in 0..n {
        if fixings[k] == Some(true) {
            point[k] = BigRational::one();
        }
    }
    for (c, &k) in free.iter().enumerate() {
        point[k] = tab.value_of(c);
    }
    let value: BigRational = point
        .iter()
        .zip(objective)
        .map(|(v, c)| v * BigRational::from_integer(c.clone()))
        .sum();
    Ok(Some((value, point)))
}
