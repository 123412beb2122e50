use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surveil_core::linalg::{c, hpd_inverse, psd_sqrt, CMat, CVec, C64};
use surveil_core::model::{zf_nullspace, DelayMode, Dims, Instance, SystemParams};
use surveil_core::scenario::{cn_mat, cn_vec, generate_channels, Topology};

fn instance(seed: u64, mode: DelayMode) -> Instance {
    let ch = generate_channels(&Topology::default(), Dims::default(), seed);
    Instance::new(ch, SystemParams::default().with_mode(mode)).unwrap()
}

fn random_design(inst: &Instance, seed: u64, scale: f64) -> (CMat, CVec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = inst.dims;
    (cn_mat(&mut rng, d.n_g(), d.n_r, scale), cn_vec(&mut rng, d.n_t, scale * 0.1))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Rates and power from the unreduced formulas with explicit `W = V0 G`.
struct Unreduced {
    p_t: f64,
    r_d: f64,
    r_r: f64,
    r_m: f64,
}

fn unreduced(inst: &Instance, g: &CMat, v: &CVec) -> Unreduced {
    let ch = &inst.channels;
    let p = &inst.params;
    let w = &inst.zf.v0 * g;
    let hdt = ch.h_dt.transpose();
    let hrt = ch.h_rt.transpose();
    let p_t = p.p_s * (&w * &ch.h_ts).norm_squared() + p.sigma2_t * w.norm_squared() + v.norm_squared();
    let dwh = (&hdt * &w * &ch.h_ts)[(0, 0)];
    let dw = (&hdt * &w).norm_squared();
    let dv = (&hdt * v)[(0, 0)].norm_sqr();
    let r_d = match p.delay_mode {
        DelayMode::Nnpd => {
            let j = p.p_s * dwh.norm_sqr() + p.sigma2_t * dw + dv + p.sigma2_d;
            (p.p_s * ch.h_ds.norm_sqr() / j).ln_1p()
        }
        DelayMode::Npd => {
            let j = p.sigma2_t * dw + dv + p.sigma2_d;
            (p.p_s * (ch.h_ds + dwh).norm_sqr() / j).ln_1p()
        }
    };
    let rwh = (&hrt * &w * &ch.h_ts)[(0, 0)];
    let j_r = p.p_s * rwh.norm_sqr() + p.sigma2_t * (&hrt * &w).norm_squared() + p.p_s * ch.h_rs.norm_sqr() + p.sigma2_r;
    let r_r = ((&hrt * v)[(0, 0)].norm_sqr() / j_r).ln_1p();
    let hw = &ch.h_mt * &w;
    let hv = &ch.h_mt * v;
    let nm = inst.dims.n_m;
    let phi = &hw * hw.adjoint() * C64::from(p.sigma2_t) + &hv * hv.adjoint() + CMat::identity(nm, nm) * C64::from(p.sigma2_m);
    let a = &hw * &ch.h_ts;
    let r_m = (p.p_s * (a.adjoint() * hpd_inverse(&phi).unwrap() * &a)[(0, 0)].re).ln_1p();
    Unreduced { p_t, r_d, r_r, r_m }
}

#[test]
fn null_space_of_random_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let h = cn_mat(&mut rng, 3, 5, 1.0);
        let zf = zf_nullspace(&h).unwrap();
        assert!((&h * &zf.v0).norm() <= 1e-10 * h.norm());
        assert!((zf.v0.adjoint() * &zf.v0 - CMat::identity(2, 2)).norm() < 1e-10);
    }
}

#[test]
fn reduced_formulas_match_explicit_relay_matrix() {
    for seed in 0..30 {
        for mode in [DelayMode::Nnpd, DelayMode::Npd] {
            let inst = instance(seed, mode);
            let (g, v) = random_design(&inst, 100 + seed, 0.3);
            let o = unreduced(&inst, &g, &v);
            assert!(rel(inst.transmit_power(&g, &v).unwrap(), o.p_t) < 1e-10);
            assert!(rel(inst.rate_suspicious(&g, &v).unwrap(), o.r_d) < 1e-10);
            assert!(rel(inst.rate_secondary(&g, &v).unwrap(), o.r_r) < 1e-10);
            assert!(rel(inst.rate_monitor_opt(&g, &v).unwrap(), o.r_m) < 1e-10);
            let q = inst.energy_consumption(&g, &v).unwrap();
            assert!(rel(q, o.p_t / inst.params.xi + inst.static_power()) < 1e-12);
            let w = inst.relay_matrix(&g);
            assert!((&inst.channels.h_tt * &w).norm() <= 1e-10 * inst.channels.h_tt.norm() * w.norm());
        }
    }
}

#[test]
fn optimal_receiver_beats_random_combiners() {
    let inst = instance(9, DelayMode::Nnpd);
    let (g, v) = random_design(&inst, 1, 0.3);
    let u = inst.optimal_receiver(&g, &v).unwrap();
    assert!((u.norm() - 1.0).abs() < 1e-12);
    let best = inst.rate_monitor(&g, &v, &u).unwrap();
    assert!((best - inst.rate_monitor_opt(&g, &v).unwrap()).abs() < 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let r = cn_vec(&mut rng, inst.dims.n_m, 1.0);
        let r = &r / C64::from(r.norm());
        assert!(inst.rate_monitor(&g, &v, &r).unwrap() <= best + 1e-9);
    }
}

/// Principal generalized eigenvector of the pencil `(P_S A A^H, Phi)`.
#[test]
fn optimal_receiver_is_principal_generalized_eigenvector() {
    for seed in 0..10 {
        let inst = instance(seed, DelayMode::Npd);
        let (g, v) = random_design(&inst, 50 + seed, 0.5);
        let a = inst.a_vec(&g);
        let phi = inst.phi(&g, &v);
        let s = psd_sqrt(&hpd_inverse(&phi).unwrap());
        let m = &s * (&a * a.adjoint()) * C64::from(inst.params.p_s) * &s;
        let eig = SymmetricEigen::new((&m + m.adjoint()) * c(0.5, 0.0));
        let k = eig.eigenvalues.imax();
        let y = eig.eigenvectors.column(k).into_owned();
        let ue = &s * y;
        let ue = &ue / C64::from(ue.norm());
        let u = inst.optimal_receiver(&g, &v).unwrap();
        assert!((u.dotc(&ue).norm() - 1.0).abs() < 1e-9);
        assert!(rel(eig.eigenvalues[k], inst.sinr_m(&g, &v)) < 1e-9);
    }
}

#[test]
fn spoofing_raises_and_jamming_lowers_suspicious_rate() {
    let inst = instance(4, DelayMode::Npd);
    let d = inst.dims;
    let z = (CMat::zeros(d.n_g(), d.n_r), CVec::zeros(d.n_t));
    let base = inst.rate_suspicious(&z.0, &z.1).unwrap();
    // rank-one G aligned so that h_DT V0 G h_TS = h_DS
    let a = inst.a_dt.map(|x| x.conj());
    let b = inst.channels.h_ts.map(|x| x.conj());
    let mut g = &a * b.transpose();
    let gain = inst.relay_gain_d(&g);
    g *= inst.channels.h_ds / gain;
    assert!((inst.relay_gain_d(&g) - inst.channels.h_ds).norm() < 1e-12);
    assert!(inst.rate_suspicious(&g, &z.1).unwrap() > base);

    let nn = instance(4, DelayMode::Nnpd);
    let jam = nn.channels.h_dt.map(|x| x.conj()) * C64::from(0.5);
    assert!(nn.rate_suspicious(&z.0, &jam).unwrap() < base);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monitor_rate_is_scale_invariant(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let inst = instance(seed, DelayMode::Nnpd);
        let (g, v) = random_design(&inst, seed + 1, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let u = cn_vec(&mut rng, inst.dims.n_m, 1.0);
        let a = inst.rate_monitor(&g, &v, &u).unwrap();
        let b = inst.rate_monitor(&g, &v, &(&u * c(re, im))).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn delay_modes_coincide_without_relay(seed in 0u64..1000) {
        let a = instance(seed, DelayMode::Nnpd);
        let b = instance(seed, DelayMode::Npd);
        let (_, v) = random_design(&a, seed, 0.4);
        let g = CMat::zeros(a.dims.n_g(), a.dims.n_r);
        prop_assert_eq!(a.rate_suspicious(&g, &v).unwrap(), b.rate_suspicious(&g, &v).unwrap());
    }

    #[test]
    fn rates_nonnegative_and_decomposition_holds(seed in 0u64..1000, scale in 0.0f64..2.0, npd in any::<bool>()) {
        let mode = if npd { DelayMode::Npd } else { DelayMode::Nnpd };
        let inst = instance(seed, mode);
        let (g, v) = random_design(&inst, seed + 7, scale);
        let e = inst.nee(&g, &v).unwrap();
        prop_assert!(e.rate_d >= 0.0 && e.rate_r >= 0.0);
        prop_assert!(inst.rate_monitor_opt(&g, &v).unwrap() >= 0.0);
        prop_assert!(e.q >= inst.static_power());
        let p = &inst.params;
        prop_assert!((e.eta - (p.alpha_d * e.eta_d + p.alpha_r * e.eta_r)).abs() <= 1e-12 * e.eta.max(1.0));
    }
}
