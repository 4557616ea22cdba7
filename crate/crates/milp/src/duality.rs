use crate::problem::{LinearProgram, Relation};

/// Checks that `duals` is dual feasible for `lp` and returns the dual
/// objective, or `None` when a sign condition fails by more than `tol`.
///
/// With row duals `y`, reduced costs `d = c - Aᵀy` must be non-negative on
/// columns without a finite upper bound and non-positive on columns without
/// a finite lower bound; rows follow the same rule through their slacks.
pub fn dual_objective(lp: &LinearProgram, duals: &[f64], tol: f64) -> Option<f64> {
    if duals.len() != lp.num_constraints() {
        return None;
    }
    let mut reduced = lp.objective.clone();
    let mut value = 0.0;
    for (row, &y) in lp.constraints.iter().zip(duals) {
        for &(j, a) in &row.coeffs {
            reduced[j] -= a * y;
        }
        // Slack column with zero cost has reduced cost -y.
        let slack_ok = match row.relation {
            Relation::Le => y <= tol,
            Relation::Ge => y >= -tol,
            Relation::Eq => true,
        };
        if !slack_ok {
            return None;
        }
        value += row.rhs * y;
    }
    for (&d, &(lo, hi)) in reduced.iter().zip(&lp.bounds) {
        if d > tol {
            if !lo.is_finite() {
                return None;
            }
            value += d * lo;
        } else if d < -tol {
            if !hi.is_finite() {
                return None;
            }
            value += d * hi;
        } else if lo.is_finite() || hi.is_finite() {
            let at = if lo.is_finite() { lo } else { hi };
            value += d * at;
        }
    }
    Some(value)
}
