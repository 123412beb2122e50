use super::ipm::{IpmResult, IpmStatus};
use super::{Affine, Cone, ConeProgram, ConeSolution, SolveStatus};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BlockKind {
    Lp,
    Soc,
    Psd(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub kind: BlockKind,
    pub offset: usize,
    pub dim: usize,
}

/// `min c'x  s.t.  A x = b,  G x + s = h,  s in K` with K a product of one
/// orthant block, second-order cones and PSD cones (svec coordinates).
pub(crate) struct StdForm {
    pub n: usize,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub blocks: Vec<Block>,
}

pub(crate) fn rsoc_as_soc(exprs: &[Affine]) -> Vec<Affine> {
    let (u, w) = (&exprs[0], &exprs[1]);
    let mut t = u.scaled(FRAC_1_SQRT_2);
    t.add_scaled(w, FRAC_1_SQRT_2);
    let mut d = u.scaled(FRAC_1_SQRT_2);
    d.add_scaled(w, -FRAC_1_SQRT_2);
    let mut out = vec![t, d];
    out.extend(exprs[2..].iter().cloned());
    out
}

/// Expressions of the quadratic epigraph cone `t >= sum e_k^2`.
pub(crate) fn quadratic_epigraph(program: &ConeProgram, t: usize) -> Vec<Affine> {
    let mut exprs = vec![Affine::var(t), Affine::constant(0.5)];
    exprs.extend(program.quadratic.iter().cloned());
    exprs
}

impl StdForm {
    pub fn from_program(p: &ConeProgram) -> StdForm {
        let has_quad = !p.quadratic.is_empty();
        let n = p.num_vars + usize::from(has_quad);
        let mut c = DVector::zeros(n);
        for &(i, v) in &p.objective.terms {
            c[i] += v;
        }
        let mut eq_rows: Vec<&Affine> = Vec::new();
        let mut lp_rows: Vec<Affine> = Vec::new();
        let mut socs: Vec<Vec<Affine>> = Vec::new();
        let mut psds: Vec<(usize, Vec<Affine>)> = Vec::new();
        for con in &p.constraints {
            match con.cone {
                Cone::Zero => eq_rows.extend(con.exprs.iter()),
                Cone::Nonneg => lp_rows.extend(con.exprs.iter().cloned()),
                Cone::Soc => socs.push(con.exprs.clone()),
                Cone::RotatedSoc => socs.push(rsoc_as_soc(&con.exprs)),
                Cone::Psd(k) => {
                    let mut v = Vec::with_capacity(con.exprs.len());
                    let mut idx = 0;
                    for j in 0..k {
                        for i in j..k {
                            let s = if i == j { 1.0 } else { SQRT_2 };
                            v.push(con.exprs[idx].scaled(s));
                            idx += 1;
                        }
                    }
                    psds.push((k, v));
                }
                Cone::Exp => unreachable!("exponential cones are routed to another backend"),
            }
        }
        if has_quad {
            let t = p.num_vars;
            c[t] = 1.0;
            socs.push(rsoc_as_soc(&quadratic_epigraph(p, t)));
        }

        let pe = eq_rows.len();
        let mut a = DMatrix::zeros(pe, n);
        let mut b = DVector::zeros(pe);
        for (r, e) in eq_rows.iter().enumerate() {
            for &(i, v) in &e.terms {
                a[(r, i)] += v;
            }
            b[r] = -e.constant;
        }

        let m = lp_rows.len()
            + socs.iter().map(Vec::len).sum::<usize>()
            + psds.iter().map(|(_, v)| v.len()).sum::<usize>();
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        let mut blocks = Vec::new();
        let mut row = 0;
        let mut put = |exprs: &[Affine], row: &mut usize| {
            for e in exprs {
                for &(i, v) in &e.terms {
                    g[(*row, i)] -= v;
                }
                h[*row] = e.constant;
                *row += 1;
            }
        };
        if !lp_rows.is_empty() {
            blocks.push(Block { kind: BlockKind::Lp, offset: 0, dim: lp_rows.len() });
            put(&lp_rows, &mut row);
        }
        for s in &socs {
            blocks.push(Block { kind: BlockKind::Soc, offset: row, dim: s.len() });
            put(s, &mut row);
        }
        for (k, v) in &psds {
            blocks.push(Block { kind: BlockKind::Psd(*k), offset: row, dim: v.len() });
            put(v, &mut row);
        }
        StdForm { n, c, a, b, g, h, blocks }
    }

    pub fn finish(&self, program: &ConeProgram, res: IpmResult) -> ConeSolution {
        let x: Vec<f64> = res.x.iter().take(program.num_vars).copied().collect();
        let status = match res.status {
            IpmStatus::Optimal | IpmStatus::ReducedAccuracy => SolveStatus::Optimal,
            IpmStatus::PrimalInfeasible => SolveStatus::Infeasible,
            IpmStatus::DualInfeasible => SolveStatus::Unbounded,
            IpmStatus::Failed => SolveStatus::NumericalFailure,
        };
        let objective = program.eval_objective(&x);
        ConeSolution {
            status,
            x,
            objective,
            primal_residual: res.pres,
            dual_residual: res.dres,
            gap: res.gap,
            iterations: res.iterations,
            reduced_accuracy: res.status == IpmStatus::ReducedAccuracy,
        }
    }
}
