//! Variational (WMMSE) forms of the rates and the MSEs they are built from.

use super::{d_vec_len, Family, WmmseState};
use crate::error::{Error, Result};
use crate::linalg::{c, hpd_solve, row_dot, row_times, CMat, CVec, C64};
use crate::model::{DelayMode, Instance};

/// Inputs of the two variational identities.
#[derive(Clone, Debug)]
pub enum WmmseKind {
    /// `ln(1 + B^H R^-1 B) = max_{S > 0, D} ln S - S M(D) + 1` with
    /// `M(D) = |D B - 1|^2 + D R D^H` and `D` a row.
    Lemma6 { b: CVec, r: CMat },
    /// `-ln T = max_{S > 0} ln S - S T + 1`.
    Lemma7 { t: f64 },
}

/// MMSE row equalizer `B^H (B B^H + R)^-1`, stored without conjugation so
/// that `D B = sum_i d_i b_i`, and the MSE it attains.
pub(crate) fn lemma6_equalizer(b: &CVec, r: &CMat) -> Result<(CVec, f64)> {
    let k = b * b.adjoint() + r;
    let y = hpd_solve(&k, b)?;
    let d = y.map(|x| x.conj());
    Ok((d.clone(), lemma6_mse(&d, b, r)))
}

pub(crate) fn lemma6_mse(d: &CVec, b: &CVec, r: &CMat) -> f64 {
    let e = row_dot(d, b) - c(1.0, 0.0);
    let dc = d.map(|x| x.conj());
    e.norm_sqr() + (d.transpose() * r * dc)[(0, 0)].re
}

/// Returns the closed-form rate and the variational objective evaluated at
/// its analytic maximizer (MMSE equalizer, `S = 1 / M`).
pub fn wmmse_identities(kind: &WmmseKind) -> Result<(f64, f64)> {
    match kind {
        WmmseKind::Lemma6 { b, r } => {
            if r.nrows() != b.len() || r.ncols() != b.len() {
                return Err(Error::Dimension("R must be square with the length of B".into()));
            }
            let rinv_b = hpd_solve(r, b).map_err(|_| Error::Domain("R must be positive definite".into()))?;
            let rate = b.dotc(&rinv_b).re.max(0.0).ln_1p();
            let (_, m) = lemma6_equalizer(b, r)?;
            let s = 1.0 / m;
            Ok((rate, s.ln() - s * m + 1.0))
        }
        WmmseKind::Lemma7 { t } => {
            if !(*t > 0.0) {
                return Err(Error::Domain(format!("Lemma 7 needs T > 0, got {t}")));
            }
            let s = 1.0 / t;
            Ok((-t.ln(), s.ln() - s * t + 1.0))
        }
    }
}

/// Components of the interference at D that pass through the relay and the
/// jamming precoder: `[sqrt(P_S) h_DT W h_TS, sigma_T (h_DT W)^T, h_DT v]`.
/// The first entry is absent for NPD, where it adds to the useful signal.
pub fn suspicious_signal_vector(inst: &Instance, g: &CMat, v: &CVec) -> CVec {
    let p = &inst.params;
    let ag = row_times(&inst.a_dt, g);
    let hv = row_dot(&inst.channels.h_dt, v);
    let mut out = Vec::with_capacity(d_vec_len(inst.mode(), inst.dims.n_r));
    if inst.mode() == DelayMode::Nnpd {
        out.push(inst.relay_gain_d(g) * p.p_s.sqrt());
    }
    out.extend(ag.iter().map(|x| x * p.sigma2_t.sqrt()));
    out.push(hv);
    CVec::from_vec(out)
}

/// `R_D = R_D1 - R_D2` with `R_D1 = ln M_t` (recovered through Lemma 7)
/// and `R_D2 = ln(J_D / sigma_D^2)` (through Lemma 6).
pub fn rate_split(inst: &Instance, g: &CMat, v: &CVec) -> Result<(f64, f64)> {
    let p = &inst.params;
    let m_t = (inst.j_d(g, v) + inst.signal_d(g)) / p.sigma2_d;
    let (_, neg_r1) = wmmse_identities(&WmmseKind::Lemma7 { t: m_t })?;
    let b = suspicious_signal_vector(inst, g, v);
    let r = CMat::identity(b.len(), b.len()) * c(p.sigma2_d, 0.0);
    let (_, r2) = wmmse_identities(&WmmseKind::Lemma6 { b, r })?;
    Ok((-neg_r1, r2))
}

/// `u^H A` (without `sqrt(P_S)`) and the interference-plus-noise along `u`.
pub(crate) fn monitor_parts(inst: &Instance, g: &CMat, v: &CVec, u: &CVec) -> (C64, f64) {
    let p = &inst.params;
    let ua = u.dotc(&inst.a_vec(g));
    let uh_hw = (&inst.b_mt * g).adjoint() * u;
    let uh_hv = u.dotc(&(&inst.channels.h_mt * v));
    (ua, p.sigma2_t * uh_hw.norm_squared() + uh_hv.norm_sqr() + p.sigma2_m * u.norm_squared())
}

fn suspicious_gain(inst: &Instance, g: &CMat) -> C64 {
    match inst.mode() {
        DelayMode::Nnpd => inst.channels.h_ds,
        DelayMode::Npd => inst.h_bar_ds(g),
    }
}

/// Zero-radius MMSE equalizers `(D_D, D_R, D_M, D_d)` on the instance's
/// channels.
pub fn mmse_equalizers(inst: &Instance, g: &CMat, v: &CVec, u: &CVec) -> Result<(C64, C64, C64, CVec)> {
    let p = &inst.params;
    let bd = suspicious_gain(inst, g) * p.p_s.sqrt();
    let d_d = bd.conj() / (bd.norm_sqr() + inst.j_d(g, v));
    let br = row_dot(&inst.channels.h_rt, v);
    let d_r = br.conj() / (br.norm_sqr() + inst.j_r(g));
    let (ua, jm) = monitor_parts(inst, g, v, u);
    let bm = ua * p.p_s.sqrt();
    let d_m = bm.conj() / (bm.norm_sqr() + jm);
    let b = suspicious_signal_vector(inst, g, v);
    let r = CMat::identity(b.len(), b.len()) * c(p.sigma2_d, 0.0);
    let (d_vec, _) = lemma6_equalizer(&b, &r)?;
    Ok((d_d, d_r, d_m, d_vec))
}

/// MSE of a family on the instance's channels, before weighting by `E^2`.
/// For the power family this is `P_S ||G h_TS||^2`.
pub fn family_mse(inst: &Instance, fam: Family, g: &CMat, v: &CVec, u: &CVec, st: &WmmseState) -> f64 {
    let p = &inst.params;
    let one = c(1.0, 0.0);
    match fam {
        Family::R => {
            let br = row_dot(&inst.channels.h_rt, v);
            (st.d_r * br - one).norm_sqr() + st.d_r.norm_sqr() * inst.j_r(g)
        }
        Family::M => {
            let (ua, jm) = monitor_parts(inst, g, v, u);
            (st.d_m * ua * p.p_s.sqrt() - one).norm_sqr() + st.d_m.norm_sqr() * jm
        }
        Family::S => p.p_s * (g * &inst.channels.h_ts).norm_squared(),
        Family::D => {
            let bd = suspicious_gain(inst, g) * p.p_s.sqrt();
            (st.d_d * bd - one).norm_sqr() + st.d_d.norm_sqr() * inst.j_d(g, v)
        }
        Family::T => (inst.j_d(g, v) + inst.signal_d(g)) / p.sigma2_d,
        Family::Dd => {
            let b = suspicious_signal_vector(inst, g, v);
            (row_dot(&st.d_vec, &b) - one).norm_sqr() + p.sigma2_d * st.d_vec.norm_squared()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lemma6_reaches_ln2() {
        let b = CVec::from_element(1, c(1.0, 0.0));
        let r = CMat::identity(1, 1);
        let (rate, var) = wmmse_identities(&WmmseKind::Lemma6 { b: b.clone(), r: r.clone() }).unwrap();
        assert!((rate - 2f64.ln()).abs() < 1e-14);
        assert!((var - 2f64.ln()).abs() < 1e-14);
        let (d, m) = lemma6_equalizer(&b, &r).unwrap();
        assert!((d[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lemma7_domain() {
        assert!(wmmse_identities(&WmmseKind::Lemma7 { t: 0.0 }).is_err());
        let (a, b) = wmmse_identities(&WmmseKind::Lemma7 { t: 1.0 }).unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(b, 0.0);
    }
}
