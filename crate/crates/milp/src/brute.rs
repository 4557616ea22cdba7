use crate::problem::{MixedIntegerProgram, Solution, Status};
use crate::simplex::{solve_validated, LpOptions};
use crate::MilpError;

/// Largest binary count [`brute_force_milp`] accepts.
pub const BRUTE_FORCE_MAX_BINARIES: usize = 20;

/// Exact MILP optimum by solving the LP of every one of the `2^k` binary
/// fixings. Ties keep the fixing with the smallest mask.
pub fn brute_force_milp(mip: &MixedIntegerProgram) -> Result<Solution, MilpError> {
    mip.validate()?;
    let k = mip.binary_vars.len();
    if k > BRUTE_FORCE_MAX_BINARIES {
        return Err(MilpError::Capacity { max: BRUTE_FORCE_MAX_BINARIES, got: k });
    }
    let opts = LpOptions::default();
    let mut best = Solution::infeasible(mip.lp.num_vars());
    let mut bounds = mip.lp.bounds.clone();
    for mask in 0u32..(1u32 << k) {
        for (bit, &j) in mip.binary_vars.iter().enumerate() {
            let v = f64::from((mask >> bit) & 1);
            bounds[j] = (v, v);
        }
        let sol = solve_validated(&mip.lp, &bounds, &opts)?;
        match sol.status {
            Status::Unbounded => return Ok(sol),
            Status::Infeasible => {}
            Status::Optimal => {
                if best.status != Status::Optimal || sol.objective < best.objective {
                    best = sol;
                }
            }
        }
    }
    Ok(best)
}
