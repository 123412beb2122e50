//! Concave minorants and convex majorants of the efficiency and rate terms
//! around an expansion point, and the convex subproblems assembled from them.
//!
//! Notation follows the model: `g` and `pi` bound `eta_D` and `eta_R` from
//! below, `upsilon` bounds `R_R` and `rho` bounds `R_M` from below, and
//! `varsigma` bounds `R_D` from above.

use crate::conic::{realify, Affine, CAffine, ConeProgram, ConeSolution};
use crate::error::{Error, Result};
use crate::linalg::{hpd_inverse, hpd_solve, psd_sqrt, row_dot, row_times, CMat, CVec, C64};
use crate::model::{BeamDesign, DelayMode, Instance};
use crate::vars::DesignVars;

/// Lower limit imposed on every linearized denominator.
pub const DELTA_MIN: f64 = 1e-9;

/// Inputs of the four elementary bounds. The returned pair is the two sides
/// of the inequality as written: `L1` is `lhs <= rhs`, the others are
/// `lhs >= rhs`.
#[derive(Clone, Debug)]
pub enum LemmaQuery {
    /// `ln(1 + x) <= ln(1 + x0) + (x - x0) / (1 + x0)`.
    L1 { x: f64, x0: f64 },
    /// `ln(1 + 1/(xy))` against its tangent plane.
    L2 { x: f64, y: f64, x0: f64, y0: f64 },
    /// `ln(1 + x) / y` against its minorant in `1/x` and `y`.
    L3 { x: f64, y: f64, x0: f64, y0: f64 },
    /// `||x||^2 >= 2 Re(x0^H x) - ||x0||^2`.
    L4 { x: CVec, x0: CVec },
}

fn positive(vals: &[f64]) -> Result<()> {
    if vals.iter().all(|&v| v > 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("lemma arguments must be positive, got {vals:?}")))
    }
}

pub fn lemma_bounds(q: &LemmaQuery) -> Result<(f64, f64)> {
    match *q {
        LemmaQuery::L1 { x, x0 } => {
            positive(&[x, x0])?;
            Ok((x.ln_1p(), x0.ln_1p() + (x - x0) / (1.0 + x0)))
        }
        LemmaQuery::L2 { x, y, x0, y0 } => {
            positive(&[x, y, x0, y0])?;
            let z0 = 1.0 / (x0 * y0);
            Ok(((1.0 / (x * y)).ln_1p(), z0.ln_1p() + z0 / (1.0 + z0) * (2.0 - x / x0 - y / y0)))
        }
        LemmaQuery::L3 { x, y, x0, y0 } => {
            positive(&[x, y, x0, y0])?;
            let l = x0.ln_1p();
            let rhs = 2.0 * l / y0 + x0 / (y0 * (1.0 + x0)) - x0 * x0 / (y0 * (1.0 + x0)) / x - l / (y0 * y0) * y;
            Ok((x.ln_1p() / y, rhs))
        }
        LemmaQuery::L4 { ref x, ref x0 } => {
            if x.len() != x0.len() {
                return Err(Error::Dimension("lemma vectors differ in length".into()));
            }
            Ok((x.norm_squared(), 2.0 * x0.dotc(x).re - x0.norm_squared()))
        }
    }
}

/// Both sides of the log-det minorant: `ln(1 + x^H Y^-1 x)` and its bound
/// built at `(x0, Y0)`.
pub fn lemma5_bounds(x: &CVec, y: &CMat, x0: &CVec, y0: &CMat) -> Result<(f64, f64)> {
    let n = x.len();
    if y.shape() != (n, n) || x0.len() != n || y0.shape() != (n, n) {
        return Err(Error::Dimension("lemma 5 shapes".into()));
    }
    let lhs = x.dotc(&hpd_solve(y, x)?).re.ln_1p();
    let y0_inv = hpd_inverse(y0)?;
    let s0 = x0.dotc(&(&y0_inv * x0)).re;
    let m = &y0_inv - hpd_inverse(&(y0 + x0 * x0.adjoint()))?;
    let lin = 2.0 * x0.dotc(&(&y0_inv * x)).re;
    let tr = (m.adjoint() * (x * x.adjoint() + y)).trace().re;
    Ok((lhs, s0.ln_1p() - s0 + lin - tr))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionPoint {
    pub g: CMat,
    pub v: CVec,
}

impl ExpansionPoint {
    pub fn new(g: CMat, v: CVec) -> Self {
        ExpansionPoint { g, v }
    }

    pub fn from_design(d: &BeamDesign) -> Self {
        ExpansionPoint { g: d.g.clone(), v: d.v.clone() }
    }
}

/// Coefficients of the `ln(1 + x) / y` minorant: `lambda - sigma / x - mu y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracCoeffs {
    pub lambda: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl FracCoeffs {
    pub fn new(gamma: f64, q: f64) -> Self {
        let l = gamma.ln_1p();
        FracCoeffs {
            lambda: 2.0 * l / q + gamma / (q * (1.0 + gamma)),
            sigma: gamma * gamma / (q * (1.0 + gamma)),
            mu: l / (q * q),
        }
    }

    fn value(&self, inv_x: f64, y: f64) -> f64 {
        self.lambda - self.sigma * inv_x - self.mu * y
    }
}

/// Everything the surrogates need from the expansion point.
#[derive(Clone, Debug)]
pub struct SurrogateCoeffs {
    pub mode: DelayMode,
    pub point: ExpansionPoint,
    /// `Q` at the point.
    pub q_l: f64,
    /// SINR at D for the active delay mode.
    pub gamma_d: f64,
    /// `lambda, sigma, mu` (barred in NPD).
    pub d_frac: FracCoeffs,
    pub gamma_r: f64,
    /// `theta, epsilon, phi`.
    pub r_frac: FracCoeffs,
    pub gamma_m: f64,
    pub j_r_l: f64,
    /// `h_RT v_l`.
    pub hrt_v_l: C64,
    /// `h_DT v_l`.
    pub hdt_v_l: C64,
    /// `h_DT V0 G_l h_TS`.
    pub relay_d_l: C64,
    /// Row `h_DT V0 G_l`.
    pub adt_g_l: CVec,
    /// `h_DS + h_DT V0 G_l h_TS`.
    pub h_bar_l: C64,
    /// `Phi_l^-1 A_l`.
    pub phi_inv_a: CVec,
    /// `Phi_l^-1 - (Phi_l + P_S A_l A_l^H)^-1`.
    pub m: CMat,
    pub m_sqrt: CMat,
}

pub fn build_coeffs(point: &ExpansionPoint, inst: &Instance) -> Result<SurrogateCoeffs> {
    let (g, v) = (&point.g, &point.v);
    let q_l = inst.energy_consumption(g, v)?;
    let p = &inst.params;
    let ch = &inst.channels;
    let gamma_d = inst.sinr_d(g, v);
    let gamma_r = inst.sinr_r(g, v);
    let hrt_v_l = row_dot(&ch.h_rt, v);
    if gamma_r <= 0.0 && p.r_th > 0.0 {
        return Err(Error::SurrogateDomain("h_RT v is zero at the expansion point".into()));
    }
    let phi = inst.phi(g, v);
    let a = inst.a_vec(g);
    let phi_inv_a = hpd_solve(&phi, &a)?;
    let gamma_m = (p.p_s * a.dotc(&phi_inv_a).re).max(0.0);
    let outer = &a * a.adjoint() * C64::from(p.p_s);
    let m = hpd_inverse(&phi)? - hpd_inverse(&(&phi + outer))?;
    let m = (&m + m.adjoint()) * C64::from(0.5);
    let m_sqrt = psd_sqrt(&m);
    let co = SurrogateCoeffs {
        mode: p.delay_mode,
        point: point.clone(),
        q_l,
        gamma_d,
        d_frac: FracCoeffs::new(gamma_d, q_l),
        gamma_r,
        r_frac: FracCoeffs::new(gamma_r, q_l),
        gamma_m,
        j_r_l: inst.j_r(g),
        hrt_v_l,
        hdt_v_l: row_dot(&ch.h_dt, v),
        relay_d_l: inst.relay_gain_d(g),
        adt_g_l: row_times(&inst.a_dt, g),
        h_bar_l: inst.h_bar_ds(g),
        phi_inv_a,
        m,
        m_sqrt,
    };
    let scalars = [co.gamma_d, co.gamma_r, co.gamma_m, co.q_l, co.j_r_l];
    if scalars.iter().any(|x| !x.is_finite()) {
        return Err(Error::SurrogateDomain(format!("non-finite coefficient in {scalars:?}")));
    }
    Ok(co)
}

/// Values of the five surrogates at a design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateValues {
    pub g: f64,
    pub pi: f64,
    pub upsilon: f64,
    pub rho: f64,
    pub varsigma: f64,
}

/// Objective maximized by a subproblem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// `alpha_D g + alpha_R pi`.
    Nee,
    /// Minorant of `alpha_D R_D + alpha_R R_R`.
    WeightedSumRate,
    /// Minorant of `alpha_D R_D + alpha_R R_R - lambda Q`.
    Dinkelbach { lambda: f64 },
}

fn re_inner(x0: C64, x: C64) -> f64 {
    (x0.conj() * x).re
}

impl SurrogateCoeffs {
    fn delta_r(&self, inst: &Instance, v: &CVec) -> f64 {
        2.0 * re_inner(self.hrt_v_l, row_dot(&inst.channels.h_rt, v)) - self.hrt_v_l.norm_sqr()
    }

    fn delta_bar_ds(&self, inst: &Instance, g: &CMat) -> f64 {
        2.0 * re_inner(self.h_bar_l, inst.h_bar_ds(g)) - self.h_bar_l.norm_sqr()
    }

    /// Linearized interference-plus-noise in the denominator of `chi`.
    fn chi_den(&self, inst: &Instance, g: &CMat, v: &CVec) -> f64 {
        let p = &inst.params;
        let adt_g = row_times(&inst.a_dt, g);
        let d_dt = 2.0 * self.adt_g_l.dotc(&adt_g).re - self.adt_g_l.norm_squared();
        let d_d = 2.0 * re_inner(self.hdt_v_l, row_dot(&inst.channels.h_dt, v)) - self.hdt_v_l.norm_sqr();
        let base = p.sigma2_t * d_dt + d_d + p.sigma2_d;
        match self.mode {
            DelayMode::Nnpd => {
                let d_ds = 2.0 * re_inner(self.relay_d_l, inst.relay_gain_d(g)) - self.relay_d_l.norm_sqr();
                p.p_s * d_ds + base
            }
            DelayMode::Npd => base,
        }
    }

    /// Upper bound on `1/SINR_D` used by `g`, or `None` when the `g`
    /// fraction carries no weight.
    fn inv_sinr_d(&self, inst: &Instance, g: &CMat, v: &CVec) -> Result<Option<f64>> {
        if self.d_frac.sigma <= 0.0 {
            return Ok(None);
        }
        let p = &inst.params;
        match self.mode {
            DelayMode::Nnpd => Ok(Some(inst.j_d(g, v) / (p.p_s * inst.channels.h_ds.norm_sqr()))),
            DelayMode::Npd => {
                let d = self.delta_bar_ds(inst, g);
                if d <= 0.0 {
                    return Err(Error::SurrogateDomain(format!("linearized |h_DS|^2 is {d:.3e}")));
                }
                Ok(Some(inst.j_d(g, v) / (p.p_s * d)))
            }
        }
    }

    fn inv_sinr_r(&self, inst: &Instance, g: &CMat, v: &CVec) -> Result<Option<f64>> {
        if self.gamma_r <= 0.0 {
            return Ok(None);
        }
        let d = self.delta_r(inst, v);
        if d <= 0.0 {
            return Err(Error::SurrogateDomain(format!("delta_R is {d:.3e}")));
        }
        Ok(Some(inst.j_r(g) / d))
    }

    fn objective_value(&self, inst: &Instance, objective: Objective, g: &CMat, v: &CVec) -> Result<f64> {
        let p = &inst.params;
        let q = inst.energy_consumption(g, v)?;
        let (qc, y) = match objective {
            Objective::Nee => (self.q_l, q),
            _ => (1.0, 1.0),
        };
        let fd = FracCoeffs::new(self.gamma_d, qc);
        let fr = FracCoeffs::new(self.gamma_r, qc);
        let gd = fd.value(self.inv_sinr_d(inst, g, v)?.unwrap_or(0.0), y);
        let gr = fr.value(self.inv_sinr_r(inst, g, v)?.unwrap_or(0.0), y);
        let mut val = p.alpha_d * gd + p.alpha_r * gr;
        if let Objective::Dinkelbach { lambda } = objective {
            val -= lambda * q;
        }
        Ok(val)
    }
}

pub fn eval_surrogates(co: &SurrogateCoeffs, inst: &Instance, g: &CMat, v: &CVec) -> Result<SurrogateValues> {
    let q = inst.energy_consumption(g, v)?;
    let gv = co.d_frac.value(co.inv_sinr_d(inst, g, v)?.unwrap_or(0.0), q);
    let pi = co.r_frac.value(co.inv_sinr_r(inst, g, v)?.unwrap_or(0.0), q);
    let (upsilon, rho, varsigma) = constraint_values(co, inst, g, v)?;
    Ok(SurrogateValues { g: gv, pi, upsilon, rho, varsigma })
}

/// `(upsilon, rho, varsigma)`, the surrogates entering the constraints.
pub fn constraint_values(co: &SurrogateCoeffs, inst: &Instance, g: &CMat, v: &CVec) -> Result<(f64, f64, f64)> {
    let p = &inst.params;
    let upsilon = match co.inv_sinr_r(inst, g, v)? {
        Some(_) => {
            let k = co.gamma_r / (1.0 + co.gamma_r);
            let d = co.delta_r(inst, v);
            co.gamma_r.ln_1p() + k * (2.0 - inst.j_r(g) / co.j_r_l - co.hrt_v_l.norm_sqr() / d)
        }
        None => 0.0,
    };
    let a = inst.a_vec(g);
    let outer = &a * a.adjoint() * C64::from(p.p_s) + inst.phi(g, v);
    let rho = co.gamma_m.ln_1p() - co.gamma_m + 2.0 * p.p_s * co.phi_inv_a.dotc(&a).re
        - (&co.m * outer).trace().re;
    let den = co.chi_den(inst, g, v);
    if den <= 0.0 {
        return Err(Error::SurrogateDomain(format!("denominator of chi is {den:.3e}")));
    }
    let num = match co.mode {
        DelayMode::Nnpd => p.p_s * inst.channels.h_ds.norm_sqr(),
        DelayMode::Npd => p.p_s * inst.h_bar_ds(g).norm_sqr(),
    };
    let varsigma = co.gamma_d.ln_1p() + (num / den - co.gamma_d) / (1.0 + co.gamma_d);
    Ok((upsilon, rho, varsigma))
}

/// Surrogate value of `objective` at a design (what the subproblem maximizes).
pub fn surrogate_objective(
    co: &SurrogateCoeffs,
    inst: &Instance,
    objective: Objective,
    g: &CMat,
    v: &CVec,
) -> Result<f64> {
    co.objective_value(inst, objective, g, v)
}

/// A convex subproblem over `(G, v)` plus epigraph variables.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub program: ConeProgram,
    pub vars: DesignVars,
    /// Index of `t` in the feasibility program.
    pub t: Option<usize>,
}

impl Subproblem {
    pub fn design(&self, x: &[f64]) -> (CMat, CVec) {
        self.vars.extract(x)
    }

    /// Value of the maximized objective at a solution.
    pub fn value(&self, sol: &ConeSolution) -> f64 {
        -sol.objective
    }

    /// Pins the precoder to a given value.
    pub fn fix_precoder(&mut self, v: &CVec) {
        for (e, z) in self.vars.v.iter().zip(v.iter()) {
            self.program.add_eq(e.re.clone() - z.re);
            self.program.add_eq(e.im.clone() - z.im);
        }
    }
}

/// `Re(x0^H e)` for a constant `x0`.
fn lin_re(x0: C64, e: &CAffine) -> Affine {
    let mut out = e.re.scaled(x0.re);
    out.add_scaled(&e.im, x0.im);
    out
}

/// `2 Re(x0^H e) - ||x0||^2` over matching entries.
fn linearize(x0: &[C64], e: &[CAffine]) -> Affine {
    let mut out = Affine::constant(-x0.iter().map(|z| z.norm_sqr()).sum::<f64>());
    for (z, ex) in x0.iter().zip(e) {
        out.add_scaled(&lin_re(*z, ex), 2.0);
    }
    out
}

fn scaled_all(v: Vec<Affine>, s: f64) -> Vec<Affine> {
    v.into_iter().map(|a| a.scaled(s)).collect()
}

struct Enc<'a> {
    inst: &'a Instance,
    co: &'a SurrogateCoeffs,
    dv: DesignVars,
    p: ConeProgram,
}

impl<'a> Enc<'a> {
    fn new(inst: &'a Instance, co: &'a SurrogateCoeffs) -> Self {
        let mut p = ConeProgram::new();
        let dv = DesignVars::alloc(&mut p, inst.dims);
        Enc { inst, co, dv, p }
    }

    fn relay(&self, a: &CVec) -> CAffine {
        self.dv.bilinear(a, &self.inst.channels.h_ts)
    }

    /// Squared terms of `J_R(G)` without its constant.
    fn jr_terms(&self) -> Vec<Affine> {
        let par = &self.inst.params;
        let mut c = vec![self.relay(&self.inst.a_rt).scale_real(par.p_s.sqrt())];
        c.extend(self.dv.row_g(&self.inst.a_rt).into_iter().map(|e| e.scale_real(par.sigma2_t.sqrt())));
        realify(&c)
    }

    fn jr_const(&self) -> f64 {
        let par = &self.inst.params;
        par.p_s * self.inst.channels.h_rs.norm_sqr() + par.sigma2_r
    }

    /// Squared terms of `J_D` for the active mode, without `sigma_D^2`.
    fn jd_terms(&self) -> Vec<Affine> {
        let par = &self.inst.params;
        let mut c = Vec::new();
        if self.co.mode == DelayMode::Nnpd {
            c.push(self.relay(&self.inst.a_dt).scale_real(par.p_s.sqrt()));
        }
        c.extend(self.dv.row_g(&self.inst.a_dt).into_iter().map(|e| e.scale_real(par.sigma2_t.sqrt())));
        c.push(self.dv.row_v(&self.inst.channels.h_dt));
        realify(&c)
    }

    fn h_bar(&self) -> CAffine {
        self.relay(&self.inst.a_dt) + self.inst.channels.h_ds
    }

    fn delta_r(&self) -> Affine {
        linearize(&[self.co.hrt_v_l], &[self.dv.row_v(&self.inst.channels.h_rt)])
    }

    fn guarded(&mut self, d: Affine) -> Affine {
        self.p.add_nonneg(d.clone() - DELTA_MIN);
        d
    }

    fn chi_den(&self) -> Affine {
        let par = &self.inst.params;
        let ch = &self.inst.channels;
        let co = self.co;
        let adt_g = self.dv.row_g(&self.inst.a_dt);
        let mut den = linearize(co.adt_g_l.as_slice(), &adt_g).scaled(par.sigma2_t);
        den += &linearize(&[co.hdt_v_l], &[self.dv.row_v(&ch.h_dt)]);
        den = den + par.sigma2_d;
        if co.mode == DelayMode::Nnpd {
            den += &linearize(&[co.relay_d_l], &[self.relay(&self.inst.a_dt)]).scaled(par.p_s);
        }
        den
    }

    /// `rho - varsigma >= t`.
    fn monitor_constraint(&mut self, t: Affine) {
        let inst = self.inst;
        let par = &inst.params;
        let co = self.co;
        let ch = &inst.channels;
        let b = &inst.b_mt;
        let s = &co.m_sqrt;
        let sb = s * b;
        let sh = s * &ch.h_mt;
        let mut c: Vec<CAffine> = (0..sb.nrows())
            .map(|r| self.dv.bilinear(&sb.row(r).transpose(), &ch.h_ts).scale_real(par.p_s.sqrt()))
            .collect();
        for row in self.dv.mat_g(&sb) {
            c.extend(row.into_iter().map(|e| e.scale_real(par.sigma2_t.sqrt())));
        }
        c.extend(self.dv.mat_v(&sh));
        let squares = realify(&c);

        let mut rhs = Affine::constant(co.gamma_m.ln_1p() - co.gamma_m - par.sigma2_m * co.m.trace().re);
        for r in 0..b.nrows() {
            let a_r = self.dv.bilinear(&b.row(r).transpose(), &ch.h_ts);
            rhs.add_scaled(&lin_re(co.phi_inv_a[r], &a_r), 2.0 * par.p_s);
        }

        let den = self.chi_den();
        let den = self.guarded(den);
        let tau = Affine::var(self.p.new_var());
        let num = match co.mode {
            DelayMode::Nnpd => vec![Affine::constant(par.p_s.sqrt() * ch.h_ds.norm())],
            DelayMode::Npd => realify(&[self.h_bar().scale_real(par.p_s.sqrt())]),
        };
        self.p.add_rsoc(tau.clone(), den * 0.5, num);
        let k = 1.0 / (1.0 + co.gamma_d);
        rhs = rhs - (co.gamma_d.ln_1p() - co.gamma_d * k);
        rhs.add_scaled(&tau, -k);
        rhs.add_scaled(&t, -1.0);
        self.p.add_sq_norm_le(squares, rhs);
    }

    /// `upsilon - R_th >= t`.
    fn rate_constraint(&mut self, t: Affine, delta_r: Option<Affine>) -> Result<()> {
        let co = self.co;
        let r_th = self.inst.params.r_th;
        let Some(delta_r) = delta_r else {
            if r_th > 0.0 {
                return Err(Error::SurrogateDomain("h_RT v is zero at the expansion point".into()));
            }
            // upsilon is identically zero here
            if !t.is_constant() {
                self.p.add_le(t, Affine::constant(-r_th));
            }
            return Ok(());
        };
        let k = co.gamma_r / (1.0 + co.gamma_r);
        let tau = Affine::var(self.p.new_var());
        self.p.add_rsoc(tau.clone(), delta_r * 0.5, vec![Affine::constant(1.0)]);
        let w = k / co.j_r_l;
        let squares = scaled_all(self.jr_terms(), w.sqrt());
        let mut rhs = Affine::constant(co.gamma_r.ln_1p() + 2.0 * k - w * self.jr_const() - r_th);
        rhs.add_scaled(&tau, -k * co.hrt_v_l.norm_sqr());
        rhs.add_scaled(&t, -1.0);
        self.p.add_sq_norm_le(squares, rhs);
        Ok(())
    }

    fn power_constraint(&mut self) {
        let terms = self.dv.power_terms(self.inst);
        self.p.add_soc(Affine::constant(self.inst.params.p_max.sqrt()), terms);
    }

    /// Shared `delta_R >= DELTA_MIN` when the secondary link is active.
    fn delta_r_guarded(&mut self) -> Option<Affine> {
        if self.co.gamma_r > 0.0 {
            let d = self.delta_r();
            Some(self.guarded(d))
        } else {
            None
        }
    }

    fn objective(&mut self, objective: Objective, delta_r: Option<&Affine>) {
        let inst = self.inst;
        let par = &inst.params;
        let co = self.co;
        let (qc, q_var) = match objective {
            Objective::Nee => (co.q_l, true),
            _ => (1.0, false),
        };
        let fd = FracCoeffs::new(co.gamma_d, qc);
        let fr = FracCoeffs::new(co.gamma_r, qc);
        let mut gain = Affine::constant(par.alpha_d * fd.lambda + par.alpha_r * fr.lambda);
        let mut squares: Vec<Affine> = Vec::new();

        if par.alpha_d > 0.0 && fd.sigma > 0.0 {
            match co.mode {
                DelayMode::Nnpd => {
                    let w = par.alpha_d * fd.sigma / (par.p_s * inst.channels.h_ds.norm_sqr());
                    squares.extend(scaled_all(self.jd_terms(), w.sqrt()));
                    gain = gain - w * par.sigma2_d;
                }
                DelayMode::Npd => {
                    let mut terms = self.jd_terms();
                    terms.push(Affine::constant(par.sigma2_d.sqrt()));
                    let d = linearize(&[co.h_bar_l], &[self.h_bar()]);
                    let d = self.guarded(d);
                    let tau = Affine::var(self.p.new_var());
                    self.p.add_rsoc(tau.clone(), d * (0.5 * par.p_s), terms);
                    gain.add_scaled(&tau, -par.alpha_d * fd.sigma);
                }
            }
        }
        if let (true, Some(d)) = (par.alpha_r > 0.0 && fr.sigma > 0.0, delta_r) {
            let mut terms = self.jr_terms();
            terms.push(Affine::constant(self.jr_const().sqrt()));
            let tau = Affine::var(self.p.new_var());
            self.p.add_rsoc(tau.clone(), d.scaled(0.5), terms);
            gain.add_scaled(&tau, -par.alpha_r * fr.sigma);
        }

        let q_mu = par.alpha_d * fd.mu + par.alpha_r * fr.mu;
        let mut q_weight = if q_var { q_mu } else { 0.0 };
        if !q_var {
            gain = gain - q_mu;
        }
        if let Objective::Dinkelbach { lambda } = objective {
            q_weight += lambda;
        }
        if q_weight > 0.0 {
            gain = gain - q_weight * inst.static_power();
            squares.extend(scaled_all(self.dv.power_terms(inst), (q_weight / par.xi).sqrt()));
        }
        self.p.maximize(gain);
        for s in squares {
            self.p.add_square(s);
        }
    }

    fn finish(self, t: Option<usize>) -> Subproblem {
        Subproblem { program: self.p, vars: self.dv, t }
    }
}

/// Minorant maximization at the expansion point for the NEE objective.
pub fn build_subproblem(co: &SurrogateCoeffs, inst: &Instance) -> Result<Subproblem> {
    build_subproblem_for(co, inst, Objective::Nee)
}

pub fn build_subproblem_for(co: &SurrogateCoeffs, inst: &Instance, objective: Objective) -> Result<Subproblem> {
    let mut e = Enc::new(inst, co);
    let delta_r = e.delta_r_guarded();
    e.objective(objective, delta_r.as_ref());
    e.monitor_constraint(Affine::zero());
    e.rate_constraint(Affine::zero(), delta_r)?;
    e.power_constraint();
    Ok(e.finish(None))
}

/// Maximizes the smaller of the two surrogate constraint slacks under the
/// power budget.
pub fn build_feasibility_subproblem(co: &SurrogateCoeffs, inst: &Instance) -> Result<Subproblem> {
    let mut e = Enc::new(inst, co);
    let t = e.p.new_var();
    let delta_r = e.delta_r_guarded();
    e.monitor_constraint(Affine::var(t));
    e.rate_constraint(Affine::var(t), delta_r)?;
    e.power_constraint();
    e.p.maximize(Affine::var(t));
    Ok(e.finish(Some(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_coeffs_are_tangent() {
        for &(g, q) in &[(0.3, 0.5), (5.0, 2.0), (1e-3, 0.31)] {
            let f = FracCoeffs::new(g, q);
            assert!((f.value(1.0 / g, q) - g.ln_1p() / q).abs() < 1e-12);
            assert!(f.sigma > 0.0 && f.mu > 0.0);
        }
    }

    #[test]
    fn lemma_examples() {
        let (l, r) = lemma_bounds(&LemmaQuery::L1 { x: 2.0, x0: 2.0 }).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15 && (r - 3f64.ln()).abs() < 1e-15);
        let (l, r) = lemma_bounds(&LemmaQuery::L1 { x: 1.0, x0: 2.0 }).unwrap();
        assert!((l - 0.6931).abs() < 1e-4 && (r - 0.7653).abs() < 1e-4 && l <= r);
        let (l, r) = lemma_bounds(&LemmaQuery::L3 { x: 1.0, y: 1.0, x0: 1.0, y0: 1.0 }).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15 && (r - 2f64.ln()).abs() < 1e-15);
        assert!(lemma_bounds(&LemmaQuery::L2 { x: -1.0, y: 1.0, x0: 1.0, y0: 1.0 }).is_err());
    }
}
