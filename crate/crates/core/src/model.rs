//! Physical-layer model: channels, transmit power, achievable rates, the
//! zero-forcing null space, the monitor's receiver and the NEE objective.
//!
//! The relay matrix is parametrized as `W = V0 G` with `V0` an orthonormal
//! basis of the kernel of the self-interference channel, so every quantity
//! below is written in terms of `G`.

use crate::error::{Error, Result};
use crate::linalg::{hpd_solve, right_kernel, row_dot, row_times, CMat, CVec, C64};
use serde::{Deserialize, Serialize};

/// Processing delay regime at the relay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayMode {
    /// Forwarded copy arrives a symbol late and acts as interference at D.
    Nnpd,
    /// Forwarded copy adds coherently to the direct path at D.
    Npd,
}

impl DelayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DelayMode::Nnpd => "nnpd",
            DelayMode::Npd => "npd",
        }
    }
}

impl std::str::FromStr for DelayMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nnpd" => Ok(DelayMode::Nnpd),
            "npd" => Ok(DelayMode::Npd),
            _ => Err(Error::InvalidParams(format!("unknown delay mode {s:?}"))),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// Powers and noise levels are in watts, rates in nats/s/Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub p_s: f64,
    pub sigma2_t: f64,
    pub sigma2_d: f64,
    pub sigma2_r: f64,
    pub sigma2_m: f64,
    pub p_max: f64,
    pub r_th: f64,
    pub alpha_d: f64,
    pub alpha_r: f64,
    /// Power amplifier efficiency in (0, 1].
    pub xi: f64,
    /// Dissipation per transmit antenna.
    pub p_a: f64,
    /// Dissipation per receive antenna.
    pub p_r_ant: f64,
    /// Static circuit power.
    pub p_c: f64,
    pub delay_mode: DelayMode,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            p_s: dbm_to_watts(10.0),
            sigma2_t: 1e-3,
            sigma2_d: 1e-3,
            sigma2_r: 1e-3,
            sigma2_m: 1e-3,
            p_max: dbm_to_watts(25.0),
            r_th: 0.5,
            alpha_d: 1.0,
            alpha_r: 1.0,
            xi: 0.4,
            p_a: 0.04,
            p_r_ant: 0.02,
            p_c: 0.05,
            delay_mode: DelayMode::Nnpd,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_s", self.p_s),
            ("sigma2_t", self.sigma2_t),
            ("sigma2_d", self.sigma2_d),
            ("sigma2_r", self.sigma2_r),
            ("sigma2_m", self.sigma2_m),
            ("p_max", self.p_max),
            ("p_a", self.p_a),
            ("p_r_ant", self.p_r_ant),
            ("p_c", self.p_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::InvalidParams(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        if self.alpha_d < 0.0 || self.alpha_r < 0.0 || self.alpha_d + self.alpha_r == 0.0 {
            return Err(Error::InvalidParams("weights must be nonnegative and not both zero".into()));
        }
        if self.r_th < 0.0 {
            return Err(Error::InvalidParams("rate threshold must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: DelayMode) -> SystemParams {
        SystemParams { delay_mode: mode, ..self.clone() }
    }
}

/// Channels of the network. Row vectors (`h_dt`, `h_rt`) are stored as
/// columns holding the row entries; they are never conjugated implicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h_ds: C64,
    pub h_rs: C64,
    /// S to T, length N_R.
    pub h_ts: CVec,
    /// T to D, length N_T.
    pub h_dt: CVec,
    /// T to R, length N_T.
    pub h_rt: CVec,
    /// T to M, N_M x N_T.
    pub h_mt: CMat,
    /// Self-interference, N_R x N_T.
    pub h_tt: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dims {
    pub n_t: usize,
    pub n_r: usize,
    pub n_m: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims { n_t: 5, n_r: 3, n_m: 4 }
    }
}

impl Dims {
    /// Rows of `G`.
    pub fn n_g(&self) -> usize {
        self.n_t - self.n_r
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 || self.n_m == 0 || self.n_t <= self.n_r {
            return Err(Error::Dimension(format!("need N_T > N_R >= 1 and N_M >= 1, got {self:?}")));
        }
        Ok(())
    }
}

impl ChannelSet {
    pub fn dims(&self) -> Dims {
        Dims { n_t: self.h_dt.len(), n_r: self.h_ts.len(), n_m: self.h_mt.nrows() }
    }

    pub fn check(&self) -> Result<Dims> {
        let d = self.dims();
        let ok = self.h_rt.len() == d.n_t
            && self.h_mt.ncols() == d.n_t
            && self.h_tt.shape() == (d.n_r, d.n_t)
            && d.n_m >= 1
            && d.n_r >= 1;
        if !ok {
            return Err(Error::Dimension("inconsistent channel dimensions".into()));
        }
        if d.n_t <= d.n_r {
            return Err(Error::Dimension(format!("need N_T > N_R, got {} and {}", d.n_t, d.n_r)));
        }
        Ok(d)
    }
}

/// Semi-unitary basis of the kernel of `H_TT`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZfBasis {
    pub v0: CMat,
}

/// Decision variables: relay factor `G`, secondary precoder `v`, and the
/// monitor's combiner `u` when it has been computed.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamDesign {
    pub g: CMat,
    pub v: CVec,
    pub u: Option<CVec>,
}

impl BeamDesign {
    pub fn zeros(d: Dims) -> BeamDesign {
        BeamDesign { g: CMat::zeros(d.n_g(), d.n_r), v: CVec::zeros(d.n_t), u: None }
    }
}

pub fn zf_nullspace(h_tt: &CMat) -> Result<ZfBasis> {
    Ok(ZfBasis { v0: right_kernel(h_tt, 1e-12)? })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeeBreakdown {
    pub eta: f64,
    pub eta_d: f64,
    pub eta_r: f64,
    pub rate_d: f64,
    pub rate_r: f64,
    pub power: f64,
    pub q: f64,
}

/// Signed slacks of the constraints; nonnegative means satisfied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityReport {
    /// R_M - R_D.
    pub monitor: f64,
    /// R_R - R_th.
    pub rate: f64,
    /// P_max - P_T.
    pub power: f64,
    /// -||H_TT W||_F.
    pub zf: f64,
    /// -| ||u|| - 1 |.
    pub unit_norm: f64,
}

impl FeasibilityReport {
    pub fn min_slack(&self) -> f64 {
        self.monitor.min(self.rate).min(self.power).min(self.zf).min(self.unit_norm)
    }

    pub fn violations(&self, tol: f64) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (name, s) in [
            ("monitor", self.monitor),
            ("rate", self.rate),
            ("power", self.power),
            ("zf", self.zf),
            ("unit_norm", self.unit_norm),
        ] {
            if s < -tol {
                v.push(name);
            }
        }
        v
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.violations(tol).is_empty()
    }
}

/// A channel realization with its parameters and null-space basis, plus
/// cached products with `V0`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub channels: ChannelSet,
    pub params: SystemParams,
    pub zf: ZfBasis,
    pub dims: Dims,
    /// `h_DT V0`.
    pub a_dt: CVec,
    /// `h_RT V0`.
    pub a_rt: CVec,
    /// `H_MT V0`.
    pub b_mt: CMat,
}

impl Instance {
    pub fn new(channels: ChannelSet, params: SystemParams) -> Result<Instance> {
        channels.check()?;
        let zf = zf_nullspace(&channels.h_tt)?;
        Instance::with_basis(channels, params, zf)
    }

    /// Uses a precomputed basis (e.g. when only the suspicious-link
    /// channels change).
    pub fn with_basis(channels: ChannelSet, params: SystemParams, zf: ZfBasis) -> Result<Instance> {
        params.validate()?;
        let dims = channels.check()?;
        if zf.v0.shape() != (dims.n_t, dims.n_g()) {
            return Err(Error::Dimension("null-space basis has the wrong shape".into()));
        }
        let a_dt = row_times(&channels.h_dt, &zf.v0);
        let a_rt = row_times(&channels.h_rt, &zf.v0);
        let b_mt = &channels.h_mt * &zf.v0;
        Ok(Instance { channels, params, zf, dims, a_dt, a_rt, b_mt })
    }

    pub fn with_channels(&self, channels: ChannelSet) -> Result<Instance> {
        Instance::with_basis(channels, self.params.clone(), self.zf.clone())
    }

    pub fn with_params(&self, params: SystemParams) -> Result<Instance> {
        Instance::with_basis(self.channels.clone(), params, self.zf.clone())
    }

    pub fn mode(&self) -> DelayMode {
        self.params.delay_mode
    }

    fn check_design(&self, g: &CMat, v: &CVec) -> Result<()> {
        if g.shape() != (self.dims.n_g(), self.dims.n_r) || v.len() != self.dims.n_t {
            return Err(Error::Dimension(format!(
                "design shapes G {:?}, v {} do not match {:?}",
                g.shape(),
                v.len(),
                self.dims
            )));
        }
        Ok(())
    }

    pub fn relay_matrix(&self, g: &CMat) -> CMat {
        &self.zf.v0 * g
    }

    /// `P_T = P_S ||G h_TS||^2 + sigma_T^2 ||G||_F^2 + ||v||^2`.
    pub fn transmit_power(&self, g: &CMat, v: &CVec) -> Result<f64> {
        self.check_design(g, v)?;
        let p = &self.params;
        Ok(p.p_s * (g * &self.channels.h_ts).norm_squared() + p.sigma2_t * g.norm_squared() + v.norm_squared())
    }

    /// `h_DT W h_TS`.
    pub fn relay_gain_d(&self, g: &CMat) -> C64 {
        row_dot(&self.a_dt, &(g * &self.channels.h_ts))
    }

    /// `h_DS + h_DT W h_TS`.
    pub fn h_bar_ds(&self, g: &CMat) -> C64 {
        self.channels.h_ds + self.relay_gain_d(g)
    }

    /// Interference-plus-noise at D for the active delay mode.
    pub fn j_d(&self, g: &CMat, v: &CVec) -> f64 {
        let p = &self.params;
        let fwd_noise = p.sigma2_t * row_times(&self.a_dt, g).norm_squared();
        let jam = row_dot(&self.channels.h_dt, v).norm_sqr();
        let base = fwd_noise + jam + p.sigma2_d;
        match p.delay_mode {
            DelayMode::Nnpd => p.p_s * self.relay_gain_d(g).norm_sqr() + base,
            DelayMode::Npd => base,
        }
    }

    /// Useful signal power at D (numerator of the SINR).
    pub fn signal_d(&self, g: &CMat) -> f64 {
        let p = &self.params;
        match p.delay_mode {
            DelayMode::Nnpd => p.p_s * self.channels.h_ds.norm_sqr(),
            DelayMode::Npd => p.p_s * self.h_bar_ds(g).norm_sqr(),
        }
    }

    pub fn sinr_d(&self, g: &CMat, v: &CVec) -> f64 {
        self.signal_d(g) / self.j_d(g, v)
    }

    pub fn rate_suspicious(&self, g: &CMat, v: &CVec) -> Result<f64> {
        self.check_design(g, v)?;
        Ok(self.sinr_d(g, v).ln_1p())
    }

    /// Interference-plus-noise at R.
    pub fn j_r(&self, g: &CMat) -> f64 {
        let p = &self.params;
        let fwd = row_dot(&self.a_rt, &(g * &self.channels.h_ts));
        p.p_s * fwd.norm_sqr()
            + p.sigma2_t * row_times(&self.a_rt, g).norm_squared()
            + p.p_s * self.channels.h_rs.norm_sqr()
            + p.sigma2_r
    }

    pub fn sinr_r(&self, g: &CMat, v: &CVec) -> f64 {
        row_dot(&self.channels.h_rt, v).norm_sqr() / self.j_r(g)
    }

    pub fn rate_secondary(&self, g: &CMat, v: &CVec) -> Result<f64> {
        self.check_design(g, v)?;
        Ok(self.sinr_r(g, v).ln_1p())
    }

    /// `A = H_MT W h_TS`.
    pub fn a_vec(&self, g: &CMat) -> CVec {
        &self.b_mt * (g * &self.channels.h_ts)
    }

    /// Interference-plus-noise covariance at M.
    pub fn phi(&self, g: &CMat, v: &CVec) -> CMat {
        let p = &self.params;
        let hw = &self.b_mt * g;
        let hv = &self.channels.h_mt * v;
        let n = self.dims.n_m;
        &hw * hw.adjoint() * C64::from(p.sigma2_t) + &hv * hv.adjoint() + CMat::identity(n, n) * C64::from(p.sigma2_m)
    }

    pub fn rate_monitor(&self, g: &CMat, v: &CVec, u: &CVec) -> Result<f64> {
        self.check_design(g, v)?;
        if u.len() != self.dims.n_m {
            return Err(Error::Dimension("combiner length differs from N_M".into()));
        }
        let nu = u.norm_squared();
        if !(nu > 0.0) {
            return Err(Error::Domain("zero receiver combiner".into()));
        }
        let p = &self.params;
        let sig = p.p_s * u.dotc(&self.a_vec(g)).norm_sqr();
        let uh_hw = (&self.b_mt * g).adjoint() * u;
        let uh_hv = u.dotc(&(&self.channels.h_mt * v));
        let j_m = p.sigma2_t * uh_hw.norm_squared() + uh_hv.norm_sqr() + p.sigma2_m * nu;
        Ok((sig / j_m).ln_1p())
    }

    /// Unit-norm SINR-maximizing combiner `Phi^-1 A / ||Phi^-1 A||`.
    pub fn optimal_receiver(&self, g: &CMat, v: &CVec) -> Result<CVec> {
        self.check_design(g, v)?;
        let a = self.a_vec(g);
        if a.norm() <= 1e-12 {
            return Err(Error::ZeroSignal);
        }
        let x = hpd_solve(&self.phi(g, v), &a)?;
        let n = x.norm();
        Ok(x / C64::from(n))
    }

    /// `P_S A^H Phi^-1 A`.
    pub fn sinr_m(&self, g: &CMat, v: &CVec) -> f64 {
        let a = self.a_vec(g);
        if a.norm() == 0.0 {
            return 0.0;
        }
        match hpd_solve(&self.phi(g, v), &a) {
            Ok(x) => self.params.p_s * a.dotc(&x).re.max(0.0),
            Err(_) => 0.0,
        }
    }

    pub fn rate_monitor_opt(&self, g: &CMat, v: &CVec) -> Result<f64> {
        self.check_design(g, v)?;
        Ok(self.sinr_m(g, v).ln_1p())
    }

    pub fn static_power(&self) -> f64 {
        let p = &self.params;
        self.dims.n_t as f64 * p.p_a + self.dims.n_r as f64 * p.p_r_ant + p.p_c
    }

    /// `Q = P_T / xi + N_T P_A + N_R P_R + P_C`.
    pub fn energy_consumption(&self, g: &CMat, v: &CVec) -> Result<f64> {
        Ok(self.transmit_power(g, v)? / self.params.xi + self.static_power())
    }

    pub fn nee(&self, g: &CMat, v: &CVec) -> Result<NeeBreakdown> {
        let rate_d = self.rate_suspicious(g, v)?;
        let rate_r = self.rate_secondary(g, v)?;
        let power = self.transmit_power(g, v)?;
        let q = power / self.params.xi + self.static_power();
        let eta_d = rate_d / q;
        let eta_r = rate_r / q;
        let eta = (self.params.alpha_d * rate_d + self.params.alpha_r * rate_r) / q;
        Ok(NeeBreakdown { eta, eta_d, eta_r, rate_d, rate_r, power, q })
    }

    /// Slacks of the constraints. With `u = None` the optimal combiner is
    /// implied (closed-form monitor rate, unit norm).
    pub fn check_feasible(&self, g: &CMat, v: &CVec, u: Option<&CVec>) -> Result<FeasibilityReport> {
        let r_d = self.rate_suspicious(g, v)?;
        let r_r = self.rate_secondary(g, v)?;
        let (r_m, unit) = match u {
            Some(u) => (self.rate_monitor(g, v, u)?, -(u.norm() - 1.0).abs()),
            None => (self.rate_monitor_opt(g, v)?, 0.0),
        };
        let w = self.relay_matrix(g);
        let zf = -(&self.channels.h_tt * w).norm();
        Ok(FeasibilityReport {
            monitor: r_m - r_d,
            rate: r_r - self.params.r_th,
            power: self.params.p_max - self.transmit_power(g, v)?,
            zf,
            unit_norm: unit,
        })
    }

    pub fn check_design_feasible(&self, d: &BeamDesign) -> Result<FeasibilityReport> {
        self.check_feasible(&d.g, &d.v, d.u.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn simple() -> Instance {
        let mut h_tt = CMat::zeros(3, 5);
        for i in 0..3 {
            h_tt[(i, i)] = c(1.0, 0.0);
        }
        let ch = ChannelSet {
            h_ds: c(1.0, 0.0),
            h_rs: c(0.2, 0.1),
            h_ts: CVec::from_fn(3, |i, _| c(0.5 + i as f64 * 0.1, -0.2)),
            h_dt: CVec::from_fn(5, |i, _| c(0.3, 0.1 * i as f64)),
            h_rt: CVec::from_fn(5, |i, _| c(0.4 - 0.1 * i as f64, 0.2)),
            h_mt: CMat::from_fn(4, 5, |i, j| c(((i + 2 * j) % 3) as f64 * 0.4, 0.1 * i as f64)),
            h_tt,
        };
        Instance::new(ch, SystemParams::default()).unwrap()
    }

    #[test]
    fn zero_design_rate_and_energy() {
        let inst = simple();
        let z = BeamDesign::zeros(inst.dims);
        for mode in [DelayMode::Nnpd, DelayMode::Npd] {
            let i2 = inst.with_params(inst.params.with_mode(mode)).unwrap();
            let r = i2.rate_suspicious(&z.g, &z.v).unwrap();
            assert!((r - 11f64.ln()).abs() < 1e-12);
        }
        let q = inst.energy_consumption(&z.g, &z.v).unwrap();
        assert!((q - 0.31).abs() < 1e-12);
        let e = inst.nee(&z.g, &z.v).unwrap();
        assert!((e.eta - 11f64.ln() / 0.31).abs() < 1e-9);
        assert!((e.eta - 7.735).abs() < 1e-3);
    }

    #[test]
    fn zero_relay_has_no_monitor_signal() {
        let inst = simple();
        let z = BeamDesign::zeros(inst.dims);
        assert_eq!(inst.rate_monitor_opt(&z.g, &z.v).unwrap(), 0.0);
        assert!(matches!(inst.optimal_receiver(&z.g, &z.v), Err(Error::ZeroSignal)));
    }

    #[test]
    fn matched_precoder_rate() {
        let mut inst = simple();
        inst.channels.h_rs = c(0.0, 0.0);
        let inst = inst.with_channels(inst.channels.clone()).unwrap();
        let g = CMat::zeros(2, 3);
        let hr = &inst.channels.h_rt;
        let v = hr.map(|x| x.conj()) / C64::from(hr.norm());
        let p = &inst.params;
        let want = (hr.norm_squared() / p.sigma2_r).ln_1p();
        assert!((inst.rate_secondary(&g, &v).unwrap() - want).abs() < 1e-12);
        assert!((inst.transmit_power(&g, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_design_is_flagged_infeasible() {
        let inst = simple();
        let z = BeamDesign::zeros(inst.dims);
        let r = inst.check_feasible(&z.g, &z.v, None).unwrap();
        assert!(r.violations(1e-9).contains(&"monitor"));
        assert!(r.violations(1e-9).contains(&"rate"));
    }
}
