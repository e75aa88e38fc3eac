use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::simplex::relax;
use super::{BinaryProgram, BinarySolver, Solution, SolverError};

/// Depth-first branch-and-bound with exact LP bounds, branching on the
/// most fractional variable.
///
/// Ties between equal-objective optima are resolved by solving against
/// `2^n · c + Σ_j 2^(n-1-j) v_j`. Because `c · v` is integral and the
/// perturbation is below `2^n`, the perturbed optimum is unique: the
/// lexicographically smallest among the true optima.
#[derive(Clone, Copy, Debug, Default)]
pub struct BranchAndBound;

struct Node {
    fixings: Vec<Option<bool>>,
    bound: BigRational,
    point: Vec<BigRational>,
}

fn ceil(q: &BigRational) -> BigInt {
    let (quot, rem) = q.numer().div_mod_floor(q.denom());
    if rem.is_zero() {
        quot
    } else {
        quot + 1
    }
}

impl BranchAndBound {
    fn node(
        program: &BinaryProgram,
        objective: &[BigInt],
        fixings: Vec<Option<bool>>,
    ) -> Result<Option<Node>, SolverError> {
        Ok(relax(program, objective, &fixings)?.map(|(bound, point)| Node {
            fixings,
            bound,
            point,
        }))
    }
}

impl BinarySolver for BranchAndBound {
    fn solve(&self, program: &BinaryProgram) -> Result<Solution, SolverError> {
        program.validate()?;
        if program.has_conflicting_fixings() {
            return Ok(Solution::infeasible());
        }
        let n = program.variables();
        let scale = BigInt::one() << n;
        let objective: Vec<BigInt> = program
            .objective()
            .iter()
            .enumerate()
            .map(|(j, &c)| &scale * BigInt::from(c) + (BigInt::one() << (n - 1 - j)))
            .collect();

        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut incumbent: Option<(BigInt, Vec<bool>)> = None;
        let mut stack = Vec::new();
        if let Some(root) = Self::node(program, &objective, program.fixings().to_vec())? {
            stack.push(root);
        }
        while let Some(node) = stack.pop() {
            let lower = ceil(&node.bound);
            if incumbent.as_ref().is_some_and(|(best, _)| lower >= *best) {
                continue;
            }
            // most fractional: closest to 1/2, smallest index on ties
            let mut branch: Option<(usize, BigRational)> = None;
            for (j, v) in node.point.iter().enumerate() {
                if v.is_integer() {
                    continue;
                }
                let dist = (v - &half).abs();
                if branch.as_ref().is_none_or(|(_, d)| dist < *d) {
                    branch = Some((j, dist));
                }
            }
            match branch {
                None => {
                    let assignment: Vec<bool> = node.point.iter().map(|v| v.is_one()).collect();
                    let ints: Vec<i64> = assignment.iter().map(|&b| i64::from(b)).collect();
                    if !program.is_feasible(&ints) {
                        return Err(SolverError::Dimension(
                            "integral relaxation point violates a row".into(),
                        ));
                    }
                    // integral points: perturbed value equals the bound exactly
                    incumbent = Some((lower, assignment));
                }
                Some((j, _)) => {
                    let mut children = Vec::with_capacity(2);
                    for value in [false, true] {
                        let mut fixings = node.fixings.clone();
                        fixings[j] = Some(value);
                        if let Some(child) = Self::node(program, &objective, fixings)? {
                            children.push(child);
                        }
                    }
                    // explore the better bound first: push it last
                    children.sort_by(|a, b| b.bound.cmp(&a.bound));
                    stack.extend(children);
                }
            }
        }
        Ok(match incumbent {
            Some((_, assignment)) => Solution::optimal(program, assignment),
            None => Solution::infeasible(),
        })
    }
}
