mod common;

use common::{instance, mini_instance};
use rand::SeedableRng;
use surveil_core::linalg::{c, CVec};
use surveil_core::model::{BeamDesign, DelayMode, Instance};
use surveil_core::pathfollow::{seed_point, solve_nee_perfect, solve_wsr, SolverConfig};
use surveil_core::robust::*;
use surveil_core::scenario::cn_mat;
use surveil_core::Error;

fn zero_start(inst: &Instance, seed: u64, e: f64, d_m_scale: f64) -> RobustPoint {
    let p = seed_point(inst, seed, false);
    let u = inst.optimal_receiver(&p.g, &p.v).unwrap();
    let (d_d, d_r, d_m, d_vec) = mmse_equalizers(inst, &p.g, &p.v, &u).unwrap();
    let state =
        WmmseState { e: PerFamily::splat(e), d_d, d_r, d_m: d_m * d_m_scale, d_vec, beta: PerFamily::splat(1.0) };
    RobustPoint { g: p.g, v: p.v, u, state, slacks: SlackSet::default(), t_s: 1.0 }
}

fn align(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm() / (a.norm() * b.norm())
}

#[test]
fn receiver_matches_the_sinr_optimal_combiner_at_zero_radii() {
    let cfg = RobustConfig::default();
    for mode in [DelayMode::Nnpd, DelayMode::Npd] {
        for seed in 0..5 {
            let inst = instance(seed, mode);
            let unc = UncertaintyModel::exact(&inst.channels);
            // a larger equalizer pulls the minimizer inside the unit ball
            let pt = zero_start(&inst, seed, 1.0, 2.0);
            let (u, d_m, beta, _) = receiver_subproblem(&inst, &unc, &pt, &cfg).unwrap();
            assert!((u.norm() - 1.0).abs() < 1e-12);
            assert!(align(&u, &pt.u) > 1.0 - 1e-6, "{mode:?} seed {seed}: {}", align(&u, &pt.u));
            let mut st = pt.state.clone();
            st.d_m = d_m;
            let mse = family_mse(&inst, Family::M, &pt.g, &pt.v, &u, &st);
            assert!((mse - beta).abs() <= 1e-6 * beta.max(1.0), "{mse} vs {beta}");
        }
    }
}

#[test]
fn receiver_follows_a_unitary_rotation_of_the_monitor_array() {
    let cfg = RobustConfig::default();
    let inst = instance(4, DelayMode::Nnpd);
    let unc = UncertaintyModel::relative(0.05, &inst.channels).unwrap();
    let pt = zero_start(&inst, 4, 1.0, 1.0);
    let (u, _, beta, _) = receiver_subproblem(&inst, &unc, &pt, &cfg).unwrap();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let q = cn_mat(&mut rng, inst.dims.n_m, inst.dims.n_m, 1.0).qr().q();
    let mut ch = inst.channels.clone();
    ch.h_mt = &q * &ch.h_mt;
    let rot = inst.with_channels(ch).unwrap();
    let unc_rot = UncertaintyModel::relative(0.05, &rot.channels).unwrap();
    let mut pt_rot = pt.clone();
    pt_rot.u = &q * &pt.u;
    let (u_rot, _, beta_rot, _) = receiver_subproblem(&rot, &unc_rot, &pt_rot, &cfg).unwrap();
    assert!((beta - beta_rot).abs() <= 1e-6 * beta.max(1.0), "{beta} vs {beta_rot}");
    assert!((&u_rot - &q * &u).norm() < 1e-4, "{}", (&u_rot - &q * &u).norm());
}

#[test]
fn monitor_budget_grows_with_the_relay_channel_radius() {
    let cfg = RobustConfig::default();
    for seed in 0..3 {
        let inst = instance(seed, DelayMode::Nnpd);
        let pt = zero_start(&inst, seed, 1.0, 1.0);
        let h = inst.channels.h_ts.norm();
        let betas: Vec<f64> = [0.0, 0.1, 0.5]
            .iter()
            .map(|&r| {
                let unc = UncertaintyModel::new([0.0, r * h, 0.0, 0.0], &inst.channels).unwrap();
                receiver_subproblem(&inst, &unc, &pt, &cfg).unwrap().2
            })
            .collect();
        assert!(betas.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{betas:?}");
        assert!(betas[2] > betas[0]);
    }
}

#[test]
fn exponential_cone_weights_agree_with_the_closed_form() {
    for (seed, mode) in [(0, DelayMode::Nnpd), (1, DelayMode::Npd)] {
        let inst = instance(seed, mode);
        let unc = UncertaintyModel::relative(0.05, &inst.channels).unwrap();
        let pt = zero_start(&inst, seed, 0.8, 1.0);
        let closed = e_step(&inst, &unc, &pt, &RobustConfig::default()).unwrap();
        let cone = e_step(&inst, &unc, &pt, &RobustConfig { e_step: EStepMode::ExpCone, ..Default::default() }).unwrap();
        for f in Family::WEIGHTED {
            let (a, b) = (closed.bound(f), cone.bound(f));
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{f:?}: {a} vs {b}");
            let (a, b) = (closed.state.e.get(f), cone.state.e.get(f));
            assert!((a - b).abs() <= 1e-4 * a, "{f:?}: E {a} vs {b}");
        }
    }
}

#[test]
fn block_steps_never_lower_the_objective() {
    let inst = instance(2, DelayMode::Npd);
    let unc = UncertaintyModel::relative(0.02, &inst.channels).unwrap();
    let cfg = RobustConfig { max_inner: 3, seed: 2, ..Default::default() };
    let (start, _) = robust_initial_point(&inst, &unc, &cfg).unwrap();
    for lambda in [0.0, 2.0] {
        let out = inner_ao_solve(&inst, &unc, lambda, &start, &cfg).unwrap();
        let tr = &out.trace;
        assert_eq!(tr.objective.len(), 1 + 4 * tr.sweeps);
        let scale = tr.objective[0].abs().max(1.0);
        assert!(tr.max_drop() <= 1e-7 * scale, "{:?}", tr.objective);
        assert!(out.point.coupling() >= -1e-6 && out.point.rate_margin(&inst) >= -1e-6);
        assert!(out.point.power(&inst) <= inst.params.p_max * (1.0 + 1e-6));
    }

    // each step in isolation
    let f = |p: &RobustPoint| p.objective(&inst, 1.0);
    let e = e_step(&inst, &unc, &start, &cfg).unwrap();
    assert!(f(&e) >= f(&start) - 1e-7);
    let d = d_step(&inst, &unc, &e, &cfg).unwrap();
    assert!(f(&d) >= f(&e) - 1e-7);
    let (g, val) = g_step(&inst, &unc, &d, GStepGoal::Objective { lambda: 1.0 }, &cfg).unwrap();
    assert!(f(&g) >= f(&d) - 1e-7 * f(&d).abs().max(1.0));
    assert!((val - f(&g)).abs() <= 1e-5 * val.abs().max(1.0));
}

#[test]
fn initial_point_is_feasible() {
    for (seed, mode) in [(0, DelayMode::Nnpd), (3, DelayMode::Npd)] {
        let inst = instance(seed, mode);
        let unc = UncertaintyModel::relative(0.05, &inst.channels).unwrap();
        let (pt, _) = robust_initial_point(&inst, &unc, &RobustConfig { seed, ..Default::default() }).unwrap();
        assert!(pt.coupling() >= -1e-7);
        assert!(pt.rate_margin(&inst) >= -1e-7);
        assert!(pt.power(&inst) <= inst.params.p_max * (1.0 + 1e-9), "{} vs {}", pt.power(&inst), inst.params.p_max);
        assert!(pt.slacks.all_nonneg(1e-9));
        assert!((pt.u.norm() - 1.0).abs() < 1e-9);
        pt.state.validate(mode, inst.dims.n_r).unwrap();
    }
}

#[test]
fn unreachable_monitor_is_reported_infeasible() {
    let inst = instance(0, DelayMode::Nnpd);
    let mut ch = inst.channels.clone();
    ch.h_mt *= c(1e-4, 0.0);
    let weak = inst.with_channels(ch).unwrap();
    let unc = UncertaintyModel::exact(&weak.channels);
    let cfg = RobustConfig { init_max_iters: 4, ..Default::default() };
    match robust_initial_point(&weak, &unc, &cfg) {
        Err(Error::Infeasible { iterations, best_t }) => {
            assert_eq!(iterations, 4);
            assert!(best_t < 0.0);
        }
        other => panic!("expected infeasibility, got {:?}", other.map(|(_, k)| k)),
    }
}

#[test]
fn config_and_radii_are_validated() {
    let inst = instance(0, DelayMode::Nnpd);
    let unc = UncertaintyModel::exact(&inst.channels);
    for bad in [
        RobustConfig { iota: 0.0, ..Default::default() },
        RobustConfig { max_inner: 0, ..Default::default() },
        RobustConfig { tol: -1.0, ..Default::default() },
    ] {
        assert!(matches!(solve_robust(&inst, &unc, &bad), Err(Error::InvalidParams(_))));
    }
    let other = instance(9, DelayMode::Nnpd);
    assert!(solve_robust(&other, &unc, &RobustConfig::default()).is_err());
}

#[test]
fn zero_radius_sampling_is_a_single_point_check() {
    let inst = instance(6, DelayMode::Npd);
    let unc = UncertaintyModel::exact(&inst.channels);
    let p = seed_point(&inst, 6, false);
    let design = BeamDesign { g: p.g, v: p.v, u: None };
    let rep = worst_case_check(&inst, &unc, &design, None, 50, 1).unwrap();
    let r = inst.check_design_feasible(&design).unwrap();
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    assert!(same(rep.min_monitor, r.monitor), "{} vs {}", rep.min_monitor, r.monitor);
    assert!(same(rep.min_rate, r.rate));
    assert!(same(rep.min_power, r.power));
    assert!(rep.max_family_excess.is_none());
}

#[test]
fn perfect_csi_design_breaks_under_estimation_error() {
    let inst = instance(0, DelayMode::Nnpd);
    let (design, _) = solve_nee_perfect(&inst, &SolverConfig::default()).unwrap();
    let unc = UncertaintyModel::relative(0.1, &inst.channels).unwrap();
    let rep = worst_case_check(&inst, &unc, &design, None, 2000, 3).unwrap();
    assert!(rep.violations > 0, "{rep:?}");
}

#[test]
fn zero_radius_sum_rate_matches_the_perfect_solver_on_miniatures() {
    for (seed, mode) in [(0, DelayMode::Nnpd), (1, DelayMode::Npd), (2, DelayMode::Nnpd)] {
        let inst = mini_instance(seed, mode);
        let unc = UncertaintyModel::exact(&inst.channels);
        let cfg = RobustConfig { seed, max_inner: 200, inner_tol: 1e-7, ..Default::default() };
        let (start, _) = robust_initial_point(&inst, &unc, &cfg).unwrap();
        let out = inner_ao_solve(&inst, &unc, 0.0, &start, &cfg).unwrap();
        let robust = out.point.numerator(&inst);
        let (d, _) = solve_wsr(&inst, &SolverConfig { seed, ..Default::default() }).unwrap();
        let nee = inst.nee(&d.g, &d.v).unwrap();
        let wsr = inst.params.alpha_d * nee.rate_d + inst.params.alpha_r * nee.rate_r;
        assert!((robust - wsr).abs() <= 5e-2 * wsr, "{mode:?} seed {seed}: {robust} vs {wsr}");
    }
}

#[test]
fn outer_loop_certifies_an_increasing_ratio() {
    let inst = instance(1, DelayMode::Nnpd);
    let unc = UncertaintyModel::relative(0.02, &inst.channels).unwrap();
    let sol = solve_robust(&inst, &unc, &RobustConfig { seed: 1, ..Default::default() }).unwrap();
    let lam = &sol.trace.lambda;
    assert!(sol.trace.converged, "{lam:?}");
    assert!(lam.len() <= 12, "{lam:?}");
    for w in lam.windows(2) {
        assert!(w[1] > w[0] || (w[1] - w[0]).abs() <= 1e-3, "{lam:?}");
    }
    for tr in &sol.trace.inner {
        assert!(tr.sweeps <= RobustConfig::default().max_inner);
    }
    // the certified ratio lower-bounds the nominal NEE
    let nominal = inst.nee(&sol.design.g, &sol.design.v).unwrap().eta;
    assert!(nominal >= sol.nee() - 1e-6, "{nominal} vs {}", sol.nee());
    let rep = worst_case_check(&inst, &unc, &sol.design, Some(&sol.point), 10_000, 11).unwrap();
    assert_eq!(rep.violations, 0, "{rep:?}");
    assert!(rep.certified(1e-6), "{rep:?}");
    let u: &CVec = sol.design.u.as_ref().unwrap();
    assert!((u.norm() - 1.0).abs() < 1e-9);
}
