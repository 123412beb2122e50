//! Convex conic programs and the solvers behind them.
//!
//! A [`ConeProgram`] minimizes a linear (plus optional sum-of-squares)
//! objective over affine maps constrained to products of cones. Programs made
//! of orthant, second-order and PSD cones are solved by the embedded
//! interior-point method in [`ipm`]; exponential cones go to Clarabel.

mod cbf;
mod clarabel_backend;
pub mod expr;
mod ipm;
mod std_form;

pub use cbf::to_cbf;
pub use expr::{cdot, realify, Affine, CAffine};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Cone an affine image is constrained to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// Every entry equals zero.
    Zero,
    /// Every entry is nonnegative.
    Nonneg,
    /// `e[0] >= ||e[1..]||`.
    Soc,
    /// `2 e[0] e[1] >= ||e[2..]||^2` with `e[0], e[1] >= 0`.
    RotatedSoc,
    /// `(x, y, z)` with `y exp(x / y) <= z`, `y > 0`.
    Exp,
    /// Real symmetric PSD matrix of the given order; entries are the lower
    /// triangle in column-major order.
    Psd(usize),
}

#[derive(Clone, Debug)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub exprs: Vec<Affine>,
}

/// Minimize `objective(x) + sum_k quadratic[k](x)^2` subject to every
/// constraint.
#[derive(Clone, Debug, Default)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Affine,
    pub quadratic: Vec<Affine>,
    pub constraints: Vec<ConeConstraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    /// Embedded IPM when the program has no exponential cones, else Clarabel.
    #[default]
    Auto,
    Embedded,
    Clarabel,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub backend: Backend,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-8, max_iter: 100, backend: Backend::Auto }
    }
}

#[derive(Clone, Debug)]
pub struct ConeSolution {
    pub status: SolveStatus,
    /// Primal assignment for the program's variables.
    pub x: Vec<f64>,
    /// Objective value at `x`, including constants and quadratic terms.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Set when the solve stopped at a relaxed tolerance (1e3 x `tol`).
    pub reduced_accuracy: bool,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Allocates `n` consecutive variables and returns the first index.
    pub fn new_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        first
    }

    pub fn minimize(&mut self, objective: Affine) {
        self.objective = objective;
    }

    pub fn maximize(&mut self, objective: Affine) {
        self.objective = -objective;
    }

    /// Adds `e(x)^2` to the objective.
    pub fn add_square(&mut self, e: Affine) {
        self.quadratic.push(e);
    }

    pub fn add(&mut self, cone: Cone, exprs: Vec<Affine>) {
        self.constraints.push(ConeConstraint { cone, exprs });
    }

    pub fn add_eq(&mut self, e: Affine) {
        self.add(Cone::Zero, vec![e]);
    }

    /// `e(x) >= 0`.
    pub fn add_nonneg(&mut self, e: Affine) {
        self.add(Cone::Nonneg, vec![e]);
    }

    /// `lhs(x) <= rhs(x)`.
    pub fn add_le(&mut self, lhs: Affine, rhs: Affine) {
        self.add_nonneg(rhs - lhs);
    }

    /// `t(x) >= ||v(x)||`.
    pub fn add_soc(&mut self, t: Affine, v: Vec<Affine>) {
        let mut exprs = Vec::with_capacity(v.len() + 1);
        exprs.push(t);
        exprs.extend(v);
        self.add(Cone::Soc, exprs);
    }

    /// `2 u(x) w(x) >= ||v(x)||^2`, `u, w >= 0`.
    pub fn add_rsoc(&mut self, u: Affine, w: Affine, v: Vec<Affine>) {
        let mut exprs = Vec::with_capacity(v.len() + 2);
        exprs.push(u);
        exprs.push(w);
        exprs.extend(v);
        self.add(Cone::RotatedSoc, exprs);
    }

    /// `||v(x)||^2 <= s(x)`.
    pub fn add_sq_norm_le(&mut self, v: Vec<Affine>, s: Affine) {
        self.add_rsoc(s * 0.5, Affine::constant(1.0), v);
    }

    /// `y exp(x / y) <= z`.
    pub fn add_exp(&mut self, x: Affine, y: Affine, z: Affine) {
        self.add(Cone::Exp, vec![x, y, z]);
    }

    /// Symmetric matrix of order `n` given by `entry(i, j)` for `i >= j`.
    pub fn add_psd_with(&mut self, n: usize, mut entry: impl FnMut(usize, usize) -> Affine) {
        let mut exprs = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in j..n {
                exprs.push(entry(i, j));
            }
        }
        self.add(Cone::Psd(n), exprs);
    }

    pub fn has_exp(&self) -> bool {
        self.constraints.iter().any(|c| c.cone == Cone::Exp)
    }

    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        self.objective.eval(x) + self.quadratic.iter().map(|q| q.eval(x).powi(2)).sum::<f64>()
    }

    /// Checks dimensions and variable indices.
    pub fn check(&self) -> Result<()> {
        let check_expr = |e: &Affine| -> Result<()> {
            match e.max_var() {
                Some(i) if i >= self.num_vars => {
                    Err(Error::Dimension(format!("variable {i} out of range {}", self.num_vars)))
                }
                _ => Ok(()),
            }
        };
        check_expr(&self.objective)?;
        for q in &self.quadratic {
            check_expr(q)?;
        }
        for c in &self.constraints {
            let k = c.exprs.len();
            let ok = match c.cone {
                Cone::Zero | Cone::Nonneg => k >= 1,
                Cone::Soc => k >= 1,
                Cone::RotatedSoc => k >= 2,
                Cone::Exp => k == 3,
                Cone::Psd(n) => n >= 1 && k == n * (n + 1) / 2,
            };
            if !ok {
                return Err(Error::Dimension(format!("{:?} constraint with {k} entries", c.cone)));
            }
            for e in &c.exprs {
                check_expr(e)?;
            }
        }
        Ok(())
    }
}

/// Assembles the symmetric matrix of a PSD constraint from lower-triangle values.
pub fn psd_matrix(n: usize, lower: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            m[(i, j)] = lower[k];
            m[(j, i)] = lower[k];
            k += 1;
        }
    }
    m
}

/// Violation of a single point against a cone (0 when inside).
pub fn cone_violation(cone: Cone, v: &[f64]) -> f64 {
    match cone {
        Cone::Zero => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        Cone::Nonneg => v.iter().fold(0.0, |m, x| m.max(-x)),
        Cone::Soc => {
            let n = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            (n - v[0]).max(0.0)
        }
        Cone::RotatedSoc => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let t = (v[0] + v[1]) * s;
            let d = (v[0] - v[1]) * s;
            let n = (d * d + v[2..].iter().map(|x| x * x).sum::<f64>()).sqrt();
            (n - t).max(0.0)
        }
        Cone::Exp => {
            let (x, y, z) = (v[0], v[1], v[2]);
            if y > 0.0 {
                (y * (x / y).exp() - z).max(0.0)
            } else {
                // closure: y = 0 requires x <= 0, z >= 0
                (-y).max(0.0) + x.max(0.0) + (-z).max(0.0)
            }
        }
        Cone::Psd(n) => {
            let m = psd_matrix(n, v);
            let min = SymmetricEigen::new(m).eigenvalues.min();
            (-min).max(0.0)
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// Violation per constraint, in program order.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    /// Index of the most violated constraint.
    pub worst: Option<usize>,
}

impl ResidualReport {
    pub fn violated(&self, tol: f64) -> Vec<usize> {
        self.violations.iter().enumerate().filter(|(_, v)| **v > tol).map(|(i, _)| i).collect()
    }
}

/// Per-constraint violation magnitudes of an assignment.
pub fn validate(program: &ConeProgram, x: &[f64]) -> ResidualReport {
    let violations: Vec<f64> = program
        .constraints
        .iter()
        .map(|c| {
            let v: Vec<f64> = c.exprs.iter().map(|e| e.eval(x)).collect();
            cone_violation(c.cone, &v)
        })
        .collect();
    let mut worst = None;
    let mut max_violation = 0.0;
    for (i, &v) in violations.iter().enumerate() {
        if v > max_violation {
            max_violation = v;
            worst = Some(i);
        }
    }
    ResidualReport { violations, max_violation, worst }
}

/// Solves with default settings at the given tolerance.
pub fn solve(program: &ConeProgram, tol: f64) -> Result<ConeSolution> {
    solve_with(program, &SolverSettings { tol, ..SolverSettings::default() })
}

pub fn solve_with(program: &ConeProgram, settings: &SolverSettings) -> Result<ConeSolution> {
    program.check()?;
    let backend = match settings.backend {
        Backend::Auto if program.has_exp() => Backend::Clarabel,
        Backend::Auto => Backend::Embedded,
        b => b,
    };
    match backend {
        Backend::Embedded => {
            if program.has_exp() {
                return Err(Error::Backend("embedded solver has no exponential cone".into()));
            }
            let sf = std_form::StdForm::from_program(program);
            let res = ipm::solve(&sf, settings.tol, settings.max_iter);
            Ok(sf.finish(program, res))
        }
        _ => clarabel_backend::solve(program, settings),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_is_attained() {
        let mut p = ConeProgram::new();
        let x = p.new_var();
        p.minimize(Affine::var(x));
        p.add_nonneg(Affine::var(x) - 3.0);
        let s = solve(&p, 1e-8).unwrap();
        assert!(s.is_optimal());
        assert!((s.x[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn log_objective_via_exponential_cone() {
        // min -t  s.t.  t <= ln x, x <= 2
        let mut p = ConeProgram::new();
        let x = p.new_var();
        let t = p.new_var();
        p.minimize(-Affine::var(t));
        p.add_exp(Affine::var(t), Affine::constant(1.0), Affine::var(x));
        p.add_le(Affine::var(x), Affine::constant(2.0));
        let s = solve(&p, 1e-8).unwrap();
        assert!(s.is_optimal());
        assert!((s.x[x] - 2.0).abs() < 1e-6);
        assert!((s.objective + 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn psd_violation_is_negative_min_eigenvalue() {
        // [[1, 2], [2, 1]] has eigenvalues 3 and -1.
        let v = [1.0, 2.0, 1.0];
        assert!((cone_violation(Cone::Psd(2), &v) - 1.0).abs() < 1e-12);
        assert_eq!(cone_violation(Cone::Psd(2), &[2.0, 1.0, 2.0]), 0.0);
    }

    #[test]
    fn violated_constraint_is_flagged() {
        let mut p = ConeProgram::new();
        let x = p.new_var();
        p.add_nonneg(Affine::var(x));
        p.add_soc(Affine::constant(1.0), vec![Affine::var(x)]);
        let r = validate(&p, &[2.0]);
        assert_eq!(r.violated(1e-9), vec![1]);
        assert!((r.max_violation - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotated_cone_violation() {
        // 2 * 1 * 2 = 4 >= ||(2)||^2 = 4: on the boundary
        assert!(cone_violation(Cone::RotatedSoc, &[1.0, 2.0, 2.0]) < 1e-12);
        assert!(cone_violation(Cone::RotatedSoc, &[1.0, 1.0, 2.0]) > 0.1);
    }
}
