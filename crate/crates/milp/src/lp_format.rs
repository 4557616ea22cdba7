//! Writer for the CPLEX LP text format, for cross-checking with external
//! solvers.

use std::fmt::Write as _;

use crate::problem::{MixedIntegerProgram, Relation};

fn sanitize(name: &str, j: usize) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    if clean.is_empty() || clean.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("x{j}_{clean}")
    } else {
        clean
    }
}

fn term(out: &mut String, first: &mut bool, coeff: f64, var: &str) {
    if coeff == 0.0 {
        return;
    }
    if *first {
        let _ = write!(out, " {coeff} {var}");
    } else if coeff < 0.0 {
        let _ = write!(out, " - {} {var}", -coeff);
    } else {
        let _ = write!(out, " + {coeff} {var}");
    }
    *first = false;
}

pub fn write_lp_format(mip: &MixedIntegerProgram) -> String {
    let lp = &mip.lp;
    let names: Vec<String> = lp.names.iter().enumerate().map(|(j, n)| sanitize(n, j)).collect();
    let mut out = String::from("\\ generated by gridsched-milp\nMinimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        term(&mut out, &mut first, c, &names[j]);
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        let mut first = true;
        for &(j, a) in &row.coeffs {
            term(&mut out, &mut first, a, &names[j]);
        }
        if first {
            out.push_str(" 0 x0_dummy");
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let name = &names[j];
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if lo == hi => {
                let _ = writeln!(out, " {name} = {lo}");
            }
            (true, true) => {
                let _ = writeln!(out, " {lo} <= {name} <= {hi}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {hi}");
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {lo}");
            }
        }
    }
    if !mip.binary_vars.is_empty() {
        out.push_str("Binaries\n");
        for &j in &mip.binary_vars {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}
