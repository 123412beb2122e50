use super::std_form::rsoc_as_soc;
use super::{Affine, Cone, ConeProgram, ConeSolution, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::*,
};
use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

fn csc(m: usize, n: usize, cols: &[BTreeMap<usize, f64>]) -> CscMatrix<f64> {
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in cols {
        for (&r, &v) in col {
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

pub(crate) fn solve(program: &ConeProgram, settings: &SolverSettings) -> Result<ConeSolution> {
    let n = program.num_vars;

    // sum (a'x + c)^2 = x' (sum a a') x + 2 sum c a'x + const
    let mut p_cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut q = vec![0.0; n];
    for &(i, v) in &program.objective.terms {
        q[i] += v;
    }
    for e in &program.quadratic {
        let e = e.compressed();
        for &(i, vi) in &e.terms {
            q[i] += 2.0 * e.constant * vi;
            for &(j, vj) in &e.terms {
                if i <= j {
                    *p_cols[j].entry(i).or_default() += 2.0 * vi * vj;
                }
            }
        }
    }

    let mut rows: Vec<Affine> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    for con in &program.constraints {
        match con.cone {
            Cone::Zero => {
                cones.push(ZeroConeT(con.exprs.len()));
                rows.extend(con.exprs.iter().cloned());
            }
            Cone::Nonneg => {
                cones.push(NonnegativeConeT(con.exprs.len()));
                rows.extend(con.exprs.iter().cloned());
            }
            Cone::Soc => {
                cones.push(SecondOrderConeT(con.exprs.len()));
                rows.extend(con.exprs.iter().cloned());
            }
            Cone::RotatedSoc => {
                cones.push(SecondOrderConeT(con.exprs.len()));
                rows.extend(rsoc_as_soc(&con.exprs));
            }
            Cone::Exp => {
                cones.push(ExponentialConeT());
                rows.extend(con.exprs.iter().cloned());
            }
            Cone::Psd(k) => {
                // lower (i, j) of ours is upper (j, i) of the solver's triangle
                let mut tri = vec![Affine::zero(); k * (k + 1) / 2];
                let mut idx = 0;
                for j in 0..k {
                    for i in j..k {
                        let s = if i == j { 1.0 } else { SQRT_2 };
                        tri[i * (i + 1) / 2 + j] = con.exprs[idx].scaled(s);
                        idx += 1;
                    }
                }
                cones.push(PSDTriangleConeT(k));
                rows.extend(tri);
            }
        }
    }

    let m = rows.len();
    let mut a_cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut b = vec![0.0; m];
    for (r, e) in rows.iter().enumerate() {
        for &(i, v) in &e.terms {
            *a_cols[i].entry(r).or_default() -= v;
        }
        b[r] = e.constant;
    }
    let pm = csc(n, n, &p_cols);
    let am = csc(m, n, &a_cols);

    let tol = settings.tol;
    let cs = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter.max(200) as u32)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .build()
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&pm, &q, &am, &b, &cones, cs)
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let relaxed = 1e3 * tol.max(1e-12);
    let (status, reduced) = match sol.status {
        SolverStatus::Solved => (SolveStatus::Optimal, false),
        SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            (SolveStatus::Infeasible, false)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            (SolveStatus::Unbounded, false)
        }
        SolverStatus::MaxIterations | SolverStatus::InsufficientProgress
            if sol.r_prim <= relaxed && sol.r_dual <= relaxed =>
        {
            (SolveStatus::Optimal, true)
        }
        _ => (SolveStatus::NumericalFailure, false),
    };
    let x = sol.x.clone();
    let objective = program.eval_objective(&x);
    Ok(ConeSolution {
        status,
        objective,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        gap: (sol.obj_val - sol.obj_val_dual).abs(),
        iterations: sol.iterations as usize,
        reduced_accuracy: reduced,
        x,
    })
}
