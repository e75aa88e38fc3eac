use super::{better, BinaryProgram, BinarySolver, Solution, SolverError};

/// Exhaustive enumeration of all assignments of the free variables.
#[derive(Clone, Copy, Debug)]
pub struct BruteForce {
    /// Largest number of free variables enumerated.
    pub budget: usize,
}

impl Default for BruteForce {
    fn default() -> Self {
        BruteForce { budget: 25 }
    }
}

impl BinarySolver for BruteForce {
    fn solve(&self, program: &BinaryProgram) -> Result<Solution, SolverError> {
        program.validate()?;
        if program.has_conflicting_fixings() {
            return Ok(Solution::infeasible());
        }
        let free: Vec<usize> = (0..program.variables())
            .filter(|&k| program.fixings()[k].is_none())
            .collect();
        if free.len() > self.budget {
            return Err(SolverError::BudgetExceeded {
                free: free.len(),
                budget: self.budget,
            });
        }
        let mut assignment: Vec<i64> = program
            .fixings()
            .iter()
            .map(|f| i64::from(*f == Some(true)))
            .collect();
        let mut best: Option<(i64, Vec<bool>)> = None;
        for mask in 0u64..(1u64 << free.len()) {
            for (bit, &k) in free.iter().enumerate() {
                assignment[k] = ((mask >> bit) & 1) as i64;
            }
            if !program.rows().iter().all(|r| r.holds(&assignment)) {
                continue;
            }
            let value = program.objective_value(&assignment);
            let bools: Vec<bool> = assignment.iter().map(|&v| v == 1).collect();
            if best
                .as_ref()
                .is_none_or(|(bv, ba)| better((value, &bools), (*bv, ba)))
            {
                best = Some((value, bools));
            }
        }
        Ok(match best {
            Some((_, a)) => Solution::optimal(program, a),
            None => Solution::infeasible(),
        })
    }
}
