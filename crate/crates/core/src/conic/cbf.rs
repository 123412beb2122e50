//! Text dump in the Conic Benchmark Format (version 3).

use super::std_form::quadratic_epigraph;
use super::{Affine, Cone, ConeProgram};
use std::fmt::Write;

/// Serializes a program; a sum-of-squares objective becomes an extra
/// epigraph variable with a rotated cone.
pub fn to_cbf(program: &ConeProgram) -> String {
    let has_quad = !program.quadratic.is_empty();
    let n = program.num_vars + usize::from(has_quad);
    let mut out = String::new();
    let _ = writeln!(out, "VER\n3\n\nOBJSENSE\nMIN\n\nVAR\n{n} 1\nF {n}\n");

    let mut scalar: Vec<(&'static str, Vec<Affine>)> = Vec::new();
    let mut psd: Vec<(usize, &[Affine])> = Vec::new();
    for c in &program.constraints {
        match c.cone {
            Cone::Zero => scalar.push(("L=", c.exprs.clone())),
            Cone::Nonneg => scalar.push(("L+", c.exprs.clone())),
            Cone::Soc => scalar.push(("Q", c.exprs.clone())),
            Cone::RotatedSoc => scalar.push(("QR", c.exprs.clone())),
            // the format orders the exponential cone as (z, y, x)
            Cone::Exp => scalar.push(("EXP", vec![c.exprs[2].clone(), c.exprs[1].clone(), c.exprs[0].clone()])),
            Cone::Psd(k) => psd.push((k, &c.exprs)),
        }
    }
    if has_quad {
        scalar.push(("QR", quadratic_epigraph(program, program.num_vars)));
    }

    if !psd.is_empty() {
        let _ = writeln!(out, "PSDCON\n{}", psd.len());
        for (k, _) in &psd {
            let _ = writeln!(out, "{k}");
        }
        out.push('\n');
    }

    let rows: usize = scalar.iter().map(|(_, e)| e.len()).sum();
    if rows > 0 {
        let _ = writeln!(out, "CON\n{rows} {}", scalar.len());
        for (name, e) in &scalar {
            let _ = writeln!(out, "{name} {}", e.len());
        }
        out.push('\n');
    }

    let mut obj = program.objective.compressed();
    if has_quad {
        obj.push(program.num_vars, 1.0);
    }
    let obj_terms: Vec<_> = obj.terms.iter().filter(|t| t.1 != 0.0).collect();
    if !obj_terms.is_empty() {
        let _ = writeln!(out, "OBJACOORD\n{}", obj_terms.len());
        for (i, v) in obj_terms {
            let _ = writeln!(out, "{i} {v:e}");
        }
        out.push('\n');
    }
    if obj.constant != 0.0 {
        let _ = writeln!(out, "OBJBCOORD\n{:e}\n", obj.constant);
    }

    let mut hcoord = Vec::new();
    let mut dcoord = Vec::new();
    for (ci, (k, exprs)) in psd.iter().enumerate() {
        let mut idx = 0;
        for j in 0..*k {
            for i in j..*k {
                let e = exprs[idx].compressed();
                for &(var, v) in &e.terms {
                    if v != 0.0 {
                        hcoord.push(format!("{ci} {var} {i} {j} {v:e}"));
                    }
                }
                if e.constant != 0.0 {
                    dcoord.push(format!("{ci} {i} {j} {:e}", e.constant));
                }
                idx += 1;
            }
        }
    }
    for (name, lines) in [("HCOORD", &hcoord), ("DCOORD", &dcoord)] {
        if !lines.is_empty() {
            let _ = writeln!(out, "{name}\n{}", lines.len());
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            out.push('\n');
        }
    }

    let mut acoord = Vec::new();
    let mut bcoord = Vec::new();
    let mut row = 0;
    for (_, exprs) in &scalar {
        for e in exprs {
            let e = e.compressed();
            for &(var, v) in &e.terms {
                if v != 0.0 {
                    acoord.push(format!("{row} {var} {v:e}"));
                }
            }
            if e.constant != 0.0 {
                bcoord.push(format!("{row} {:e}", e.constant));
            }
            row += 1;
        }
    }
    for (name, lines) in [("ACOORD", &acoord), ("BCOORD", &bcoord)] {
        if !lines.is_empty() {
            let _ = writeln!(out, "{name}\n{}", lines.len());
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_lists_every_section() {
        let mut p = ConeProgram::new();
        let x = p.new_vars(2);
        p.minimize(Affine::var(x));
        p.add_square(Affine::var(x + 1) - 1.0);
        p.add_nonneg(Affine::var(x) + 1.0);
        p.add_psd_with(2, |i, j| if i == j { Affine::constant(1.0) } else { Affine::var(x + 1) });
        let s = to_cbf(&p);
        for key in ["VER", "VAR\n3 1", "PSDCON\n1\n2", "CON\n4 2", "L+ 1", "QR 3", "HCOORD", "DCOORD\n2", "ACOORD"] {
            assert!(s.contains(key), "missing {key}:\n{s}");
        }
    }
}
