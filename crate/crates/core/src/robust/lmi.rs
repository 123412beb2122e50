//! Sign-definiteness LMIs of the semi-infinite MSE constraints.
//!
//! Each family asks `||phi + sum_i Omega_i delta_i||^2 <= beta` for every
//! `||delta_i|| <= eps_i`, where `phi` stacks the weighted MSE terms at the
//! estimated channels. With one multiplier `l_i >= 0` per direction this
//! holds if
//!
//! ```text
//! [ beta - sum l_i   phi^H   0            ]
//! [ phi              I       eps Omega    ]  >= 0
//! [ 0                (eps Omega)^H  diag(l_i I) ]
//! ```
//!
//! Entries are affine in whichever block of variables is free; the others
//! enter as constants.

use super::{Family, Mult, SlackSet, UncertaintyModel, WmmseState};
use crate::conic::{cdot, Affine, CAffine, ConeProgram};
use crate::linalg::{min_eigenvalue, CMat, CVec, C64};
use crate::model::{DelayMode, Instance};
use crate::vars::DesignVars;

/// One perturbation direction with its radius and multiplier.
#[derive(Clone, Debug)]
pub struct Direction {
    pub mult: Mult,
    pub radius: f64,
    pub multiplier: Affine,
    /// `len(phi) x dim(delta)` coefficients.
    pub omega: Vec<Vec<CAffine>>,
}

impl Direction {
    pub fn dim(&self) -> usize {
        self.omega.first().map_or(0, |r| r.len())
    }
}

#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub family: Family,
    /// `beta_X`, or `t_S` for the power family.
    pub budget: Affine,
    pub phi: Vec<CAffine>,
    pub directions: Vec<Direction>,
}

impl LmiBlock {
    /// Order of the complex matrix.
    pub fn size(&self) -> usize {
        1 + self.phi.len() + self.directions.iter().map(Direction::dim).sum::<usize>()
    }

    /// Full Hermitian matrix as affine entries, row-major. Zero-radius
    /// directions are dropped when `prune` is set (their multiplier is then
    /// implicitly zero).
    pub fn entries(&self, prune: bool) -> (usize, Vec<CAffine>) {
        let dirs: Vec<&Direction> = self.directions.iter().filter(|d| !prune || d.radius > 0.0).collect();
        let p = self.phi.len();
        let n = 1 + p + dirs.iter().map(|d| d.dim()).sum::<usize>();
        let mut m = vec![CAffine::zero(); n * n];
        let mut corner = self.budget.clone();
        for d in &dirs {
            corner = corner - d.multiplier.clone();
        }
        m[0] = CAffine::real(corner);
        for (r, f) in self.phi.iter().enumerate() {
            m[(1 + r) * n] = f.clone();
            m[1 + r] = f.conj();
            m[(1 + r) * n + 1 + r] = CAffine::constant(C64::new(1.0, 0.0));
        }
        let mut off = 1 + p;
        for d in &dirs {
            for c in 0..d.dim() {
                let q = off + c;
                m[q * n + q] = CAffine::real(d.multiplier.clone());
                for r in 0..p {
                    let w = d.omega[r][c].scale_real(d.radius);
                    // row 1 + r, column q holds eps Omega; its mirror the conjugate
                    m[q * n + 1 + r] = w.conj();
                    m[(1 + r) * n + q] = w;
                }
            }
            off += d.dim();
        }
        (n, m)
    }

    /// Adds the realified block `[Re, -Im; Im, Re]` as a PSD constraint.
    pub fn add_to(&self, prog: &mut ConeProgram) {
        let (n, m) = self.entries(true);
        prog.add_psd_with(2 * n, |i, j| {
            let (a, b) = (i % n, j % n);
            let e = &m[a * n + b];
            if (i < n) == (j < n) {
                e.re.compressed()
            } else {
                e.im.compressed()
            }
        });
    }

    pub fn eval_matrix(&self, x: &[f64]) -> CMat {
        let (n, m) = self.entries(false);
        CMat::from_fn(n, n, |i, j| m[i * n + j].eval(x))
    }

    pub fn min_eig(&self, x: &[f64]) -> f64 {
        min_eigenvalue(&self.eval_matrix(x))
    }

    pub fn phi_norm_sq(&self, x: &[f64]) -> f64 {
        self.phi.iter().map(|f| f.eval(x).norm_sqr()).sum()
    }
}

fn mul(a: &CAffine, b: &CAffine) -> CAffine {
    a.times(b)
}

fn dot(a: &[CAffine], b: &[CAffine]) -> CAffine {
    debug_assert_eq!(a.len(), b.len());
    let mut out = CAffine::zero();
    for (x, y) in a.iter().zip(b) {
        out = out + mul(x, y);
    }
    out.compress();
    out
}

/// `M x` for a constant matrix.
fn lin(m: &CMat, x: &[CAffine]) -> Vec<CAffine> {
    (0..m.nrows())
        .map(|r| {
            let row: CVec = m.row(r).transpose();
            cdot(row.as_slice(), x)
        })
        .collect()
}

fn cst(z: C64) -> CAffine {
    CAffine::constant(z)
}

fn zeros(p: usize, k: usize) -> Vec<Vec<CAffine>> {
    vec![vec![CAffine::zero(); k]; p]
}

/// Values of the AO blocks, each either constant or a program variable.
#[derive(Clone, Debug)]
pub(crate) struct Sym {
    pub e_d: Affine,
    pub e_r: Affine,
    pub e_m: Affine,
    pub e_t: Affine,
    pub e_dd: Affine,
    pub d_d: CAffine,
    pub d_r: CAffine,
    pub d_m: CAffine,
    pub d_vec: Vec<CAffine>,
    pub u: Vec<CAffine>,
    pub dv: DesignVars,
}

impl Sym {
    pub fn fixed(st: &WmmseState, g: &CMat, v: &CVec, u: &CVec) -> Sym {
        Sym {
            e_d: Affine::constant(st.e.d),
            e_r: Affine::constant(st.e.r),
            e_m: Affine::constant(st.e.m),
            e_t: Affine::constant(st.e.t),
            e_dd: Affine::constant(st.e.dd),
            d_d: cst(st.d_d),
            d_r: cst(st.d_r),
            d_m: cst(st.d_m),
            d_vec: st.d_vec.iter().map(|&z| cst(z)).collect(),
            u: u.iter().map(|&z| cst(z)).collect(),
            dv: DesignVars::fixed(g, v),
        }
    }

    fn col(&self, j: usize) -> Vec<CAffine> {
        let nr = self.dv.dims.n_r;
        (0..self.dv.dims.n_g()).map(|i| self.dv.g[i * nr + j].clone()).collect()
    }

    /// Columns of `V0 G`, each of length `N_T`.
    fn v0g_cols(&self, inst: &Instance) -> Vec<Vec<CAffine>> {
        (0..inst.dims.n_r).map(|j| lin(&inst.zf.v0, &self.col(j))).collect()
    }
}

/// Builds the LMI of one family. `budget` is `beta_X` (or `t_S`) and
/// `mult` maps each multiplier name to its expression.
pub(crate) fn family_block(
    fam: Family,
    sym: &Sym,
    inst: &Instance,
    unc: &UncertaintyModel,
    guard: bool,
    budget: Affine,
    mult: &dyn Fn(Mult) -> Affine,
) -> LmiBlock {
    let p = &inst.params;
    let nr = inst.dims.n_r;
    let nt = inst.dims.n_t;
    let ps = p.p_s.sqrt();
    let st = p.sigma2_t.sqrt();
    let ch = &inst.channels;
    let dv = &sym.dv;
    let npd = inst.mode() == DelayMode::Npd;
    let dir = |m: Mult, radius: f64, omega: Vec<Vec<CAffine>>| Direction { mult: m, radius, multiplier: mult(m), omega };
    let mut dirs = Vec::new();
    let phi: Vec<CAffine>;
    match fam {
        Family::R => {
            let e = CAffine::real(sym.e_r.clone());
            let ed = mul(&e, &sym.d_r);
            let ag = dv.row_g(&inst.a_rt);
            let agh = dv.bilinear(&inst.a_rt, &ch.h_ts);
            let mut f = vec![mul(&ed, &dv.row_v(&ch.h_rt)) - e.clone(), mul(&ed, &agh).scale_real(ps)];
            f.extend(ag.iter().map(|x| mul(&ed, x).scale_real(st)));
            f.push(ed.scale(ch.h_rs * ps));
            f.push(ed.scale_real(p.sigma2_r.sqrt()));
            let mut om_ts = zeros(f.len(), nr);
            for j in 0..nr {
                om_ts[1][j] = mul(&ed, &ag[j]).scale_real(ps);
            }
            let mut om_rs = zeros(f.len(), 1);
            om_rs[2 + nr][0] = ed.scale_real(ps);
            dirs.push(dir(Mult::MuTs, unc.eps_ts, om_ts));
            dirs.push(dir(Mult::MuRs, unc.eps_rs, om_rs));
            phi = f;
        }
        Family::M => {
            let e = CAffine::real(sym.e_m.clone());
            let em = mul(&e, &sym.d_m);
            let ubar: Vec<CAffine> = sym.u.iter().map(CAffine::conj).collect();
            let ub = lin(&inst.b_mt.transpose(), &ubar);
            let ubg: Vec<CAffine> = (0..nr).map(|j| dot(&ub, &sym.col(j))).collect();
            let ua = cdot(ch.h_ts.as_slice(), &ubg);
            let uh = lin(&ch.h_mt.transpose(), &ubar);
            let uhv = dot(&uh, &dv.v);
            let mut f = vec![mul(&em, &ua).scale_real(ps) - e.clone()];
            f.extend(ubg.iter().map(|x| mul(&em, x).scale_real(st)));
            f.push(mul(&em, &uhv));
            f.extend(sym.u.iter().map(|x| mul(&em, x).scale_real(p.sigma2_m.sqrt())));
            let mut om = zeros(f.len(), nr);
            for j in 0..nr {
                om[0][j] = mul(&em, &ubg[j]).scale_real(ps);
            }
            dirs.push(dir(Mult::SigmaTs, unc.eps_ts, om));
            phi = f;
        }
        Family::S => {
            let f: Vec<CAffine> = dv.g_times(&ch.h_ts).iter().map(|x| x.scale_real(ps)).collect();
            let ng = inst.dims.n_g();
            let mut om = zeros(ng, nr);
            for i in 0..ng {
                for j in 0..nr {
                    om[i][j] = dv.g[i * nr + j].scale_real(ps);
                }
            }
            dirs.push(dir(Mult::TauTs, unc.eps_ts, om));
            phi = f;
        }
        Family::D | Family::T => {
            let is_t = fam == Family::T;
            let e = CAffine::real(if is_t { sym.e_t.clone() } else { sym.e_d.clone() });
            // scale applied to every non-leading row
            let (w, s) = if is_t { (e.clone(), 1.0 / p.sigma2_d.sqrt()) } else { (mul(&e, &sym.d_d), 1.0) };
            let ag = dv.row_g(&inst.a_dt);
            let agh = dv.bilinear(&inst.a_dt, &ch.h_ts);
            let hv = dv.row_v(&ch.h_dt);
            let mut f = Vec::new();
            let (r_ds, r_relay);
            if is_t {
                f.push(e.clone());
                if npd {
                    f.push(mul(&w, &(agh.clone() + ch.h_ds)).scale_real(ps * s));
                    r_ds = 1;
                } else {
                    f.push(mul(&w, &agh).scale_real(ps * s));
                    r_ds = 3 + nr;
                }
                r_relay = 1;
            } else if npd {
                f.push(mul(&w, &(agh.clone() + ch.h_ds)).scale_real(ps) - e.clone());
                r_ds = 0;
                r_relay = 0;
            } else {
                f.push(w.scale(ch.h_ds * ps) - e.clone());
                f.push(mul(&w, &agh).scale_real(ps));
                r_ds = 0;
                r_relay = 1;
            }
            let r_noise = f.len();
            f.extend(ag.iter().map(|x| mul(&w, x).scale_real(st * s)));
            let r_jam = f.len();
            f.push(mul(&w, &hv).scale_real(s));
            if !is_t {
                f.push(w.scale_real(p.sigma2_d.sqrt()));
            } else if !npd {
                f.push(w.scale(ch.h_ds * (ps * s)));
            }
            let np = f.len();
            let mut om_ds = zeros(np, 1);
            om_ds[r_ds][0] = w.scale_real(ps * s);
            let v0gh = lin(&inst.zf.v0, &dv.g_times(&ch.h_ts));
            let cols = sym.v0g_cols(inst);
            let mut om_dt = zeros(np, nt);
            for c in 0..nt {
                om_dt[r_relay][c] = mul(&w, &v0gh[c]).scale_real(ps * s);
                for j in 0..nr {
                    om_dt[r_noise + j][c] = mul(&w, &cols[j][c]).scale_real(st * s);
                }
                om_dt[r_jam][c] = mul(&w, &dv.v[c]).scale_real(s);
            }
            let mut om_ts = zeros(np, nr);
            for j in 0..nr {
                om_ts[r_relay][j] = mul(&w, &ag[j]).scale_real(ps * s);
            }
            let mut om_x = zeros(np, dv.g.len());
            for (k, gk) in dv.g.iter().enumerate() {
                om_x[r_relay][k] = mul(&w, gk).scale_real(ps * s);
            }
            let x_radius = unc.eps_dt * unc.eps_ts;
            if is_t {
                dirs.push(dir(Mult::EtaDt, unc.eps_dt, om_dt));
                dirs.push(dir(Mult::EtaTs, unc.eps_ts, om_ts));
                dirs.push(dir(Mult::EtaDs, unc.eps_ds, om_ds));
                if guard {
                    dirs.push(dir(Mult::GuardT, x_radius, om_x));
                }
            } else {
                dirs.push(dir(Mult::LambdaDs, unc.eps_ds, om_ds));
                dirs.push(dir(Mult::LambdaDt, unc.eps_dt, om_dt));
                dirs.push(dir(Mult::LambdaTs, unc.eps_ts, om_ts));
                if guard {
                    dirs.push(dir(Mult::GuardD, x_radius, om_x));
                }
            }
            phi = f;
        }
        Family::Dd => {
            let e = CAffine::real(sym.e_dd.clone());
            let w: Vec<CAffine> = sym.d_vec.iter().map(|d| mul(&e, d)).collect();
            let ag = dv.row_g(&inst.a_dt);
            let hv = dv.row_v(&ch.h_dt);
            let mut b = Vec::new();
            if !npd {
                b.push(dv.bilinear(&inst.a_dt, &ch.h_ts).scale_real(ps));
            }
            b.extend(ag.iter().map(|x| x.scale_real(st)));
            b.push(hv);
            let mut f = vec![dot(&w, &b) - e.clone()];
            f.extend(w.iter().map(|x| x.scale_real(p.sigma2_d.sqrt())));
            let np = f.len();
            let off = usize::from(!npd);
            let cols = sym.v0g_cols(inst);
            let v0gh = lin(&inst.zf.v0, &dv.g_times(&ch.h_ts));
            let mut om_dt = zeros(np, nt);
            for c in 0..nt {
                let mut t = CAffine::zero();
                if !npd {
                    t = t + mul(&w[0], &v0gh[c]).scale_real(ps);
                }
                for j in 0..nr {
                    t = t + mul(&w[off + j], &cols[j][c]).scale_real(st);
                }
                t = t + mul(&w[off + nr], &dv.v[c]);
                t.compress();
                om_dt[0][c] = t;
            }
            dirs.push(dir(Mult::NuDt, unc.eps_dt, om_dt));
            if !npd {
                let mut om_ts = zeros(np, nr);
                for j in 0..nr {
                    om_ts[0][j] = mul(&w[0], &ag[j]).scale_real(ps);
                }
                dirs.push(dir(Mult::NuTs, unc.eps_ts, om_ts));
                if guard {
                    let mut om_x = zeros(np, dv.g.len());
                    for (k, gk) in dv.g.iter().enumerate() {
                        om_x[0][k] = mul(&w[0], gk).scale_real(ps);
                    }
                    dirs.push(dir(Mult::GuardDd, unc.eps_dt * unc.eps_ts, om_x));
                }
            }
            phi = f;
        }
    }
    LmiBlock { family: fam, budget, phi, directions: dirs }
}

/// All six LMI families at fixed numeric values (for inspection and
/// certification).
#[allow(clippy::too_many_arguments)]
pub fn build_lmis(
    inst: &Instance,
    unc: &UncertaintyModel,
    g: &CMat,
    v: &CVec,
    u: &CVec,
    st: &WmmseState,
    slacks: &SlackSet,
    t_s: f64,
    guard: bool,
) -> crate::Result<Vec<LmiBlock>> {
    st.validate(inst.mode(), inst.dims.n_r)?;
    if g.shape() != (inst.dims.n_g(), inst.dims.n_r) || v.len() != inst.dims.n_t || u.len() != inst.dims.n_m {
        return Err(crate::Error::Dimension("design shapes do not match the instance".into()));
    }
    let sym = Sym::fixed(st, g, v, u);
    let m = |k: Mult| Affine::constant(slacks.get(k));
    Ok(Family::ALL
        .iter()
        .map(|&f| {
            let budget = if f == Family::S { t_s } else { st.beta.get(f) };
            family_block(f, &sym, inst, unc, guard, Affine::constant(budget), &m)
        })
        .collect())
}
