use proptest::prelude::*;
use surveil_core::model::{dbm_to_watts, DelayMode, Dims};
use surveil_core::scenario::{generate_channels, Topology};
use surveil_harness::checks::channel_variance_check;
use surveil_harness::config::Grid;
use surveil_harness::record::{comparable_rows, csv_string, fmt_f64, sidecar_path};
use surveil_harness::{default_params, run_experiment, run_trial, write_outputs, DesignType, ExperimentConfig, ExperimentId};

fn small(id: ExperimentId, trials: usize) -> ExperimentConfig {
    ExperimentConfig { trials, ..ExperimentConfig::preset(id) }
}

#[test]
fn unit_distance_has_unit_variance() {
    let t = Topology::default();
    assert!((t.variance([0.0, 1.0], [0.0, 2.0]) - 1.0).abs() < 1e-15);
}

#[test]
fn source_to_relay_variance_matches_path_loss() {
    let t = Topology::default();
    let (emp, want) = channel_variance_check(&t, 100_000, 3);
    assert!((want - 1.25f64.powf(-1.5)).abs() < 1e-12);
    assert!((want - 0.7155).abs() < 1e-4);
    assert!((emp / want - 1.0).abs() < 0.02, "{emp} vs {want}");
}

#[test]
fn channels_are_deterministic_per_seed() {
    let t = Topology::default();
    let a = generate_channels(&t, Dims::default(), 42);
    assert_eq!(a, generate_channels(&t, Dims::default(), 42));
    assert_ne!(a, generate_channels(&t, Dims::default(), 43));
}

#[test]
fn defaults_match_the_simulation_setup() {
    let (p, t, d) = default_params();
    assert_eq!(d, Dims { n_t: 5, n_r: 3, n_m: 4 });
    assert!((p.p_s - 0.010).abs() < 1e-15);
    assert!((p.p_max - dbm_to_watts(25.0)).abs() < 1e-15);
    assert_eq!((p.alpha_d, p.alpha_r, p.r_th), (1.0, 1.0, 0.5));
    assert_eq!((p.xi, p.p_a, p.p_r_ant, p.p_c), (0.4, 0.04, 0.02, 0.05));
    for s in [p.sigma2_t, p.sigma2_d, p.sigma2_r, p.sigma2_m] {
        assert!((s - 1e-3).abs() < 1e-15);
    }
    let tm = ((t.t[0] - t.m[0]).powi(2) + (t.t[1] - t.m[1]).powi(2)).sqrt();
    assert!((tm - 1.0).abs() < 1e-15);
}

#[test]
fn one_record_per_point_trial_design_and_mode() {
    let cfg = ExperimentConfig {
        grid: Grid { p_max_dbm: Some(vec![20.0, 25.0]), r_th: Some(vec![0.5, 1.0]), ..Default::default() },
        designs: vec![DesignType::Nee, DesignType::Wsr],
        ..small(ExperimentId::Custom, 2)
    };
    let recs = run_experiment(&cfg).unwrap();
    assert_eq!(recs.len(), 4 * 2 * 2 * 2);
    for r in recs.iter().filter(|r| r.is_ok()) {
        let want = (r.point.alpha_d * r.rate_d.unwrap() + cfg.system_params().alpha_r * r.rate_r.unwrap()) / r.q.unwrap();
        assert!((r.nee.unwrap() - want).abs() <= 1e-9, "{r:?}");
        assert!(r.power.unwrap() <= r.point.p_max * (1.0 + 1e-6));
    }
}

#[test]
fn failures_are_recorded_not_fatal() {
    // 4 nats/Hz for R is out of reach at 1 mW
    let cfg = ExperimentConfig {
        grid: Grid { p_max_dbm: Some(vec![0.0]), ..Default::default() },
        params: surveil_harness::config::ParamOverrides { r_th: Some(4.0), ..Default::default() },
        ..small(ExperimentId::Custom, 2)
    };
    let recs = run_experiment(&cfg).unwrap();
    assert_eq!(recs.len(), 4);
    let status: Vec<&str> = recs.iter().map(|r| r.status.as_str()).collect();
    assert!(recs.iter().all(|r| r.status == "infeasible" && r.nee.is_none()), "{status:?}");
    let text = csv_string(&recs).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn nee_design_does_not_lose_efficiency_with_more_power() {
    let cfg = ExperimentConfig {
        grid: Grid { p_max_dbm: Some(vec![15.0, 20.0, 25.0]), ..Default::default() },
        designs: vec![DesignType::Nee],
        ..small(ExperimentId::Fig4, 3)
    };
    let recs = run_experiment(&cfg).unwrap();
    for trial in 0..3 {
        for mode in [DelayMode::Nnpd, DelayMode::Npd] {
            let nee: Vec<Option<f64>> = recs.iter().filter(|r| r.trial == trial && r.mode == mode).map(|r| r.nee).collect();
            assert_eq!(nee.len(), 3);
            for w in nee.windows(2) {
                if let (Some(a), Some(b)) = (w[0], w[1]) {
                    assert!(b >= a * (1.0 - 1e-9), "trial {trial} {mode:?}: {nee:?}");
                }
            }
        }
    }
}

#[test]
fn convergence_trace_is_monotone() {
    let recs = run_experiment(&ExperimentConfig { designs: vec![DesignType::Nee], ..small(ExperimentId::Fig3, 1) }).unwrap();
    for mode in [DelayMode::Nnpd, DelayMode::Npd] {
        let path: Vec<f64> =
            recs.iter().filter(|r| r.mode == mode && r.stage == Some("path")).map(|r| r.nee.unwrap()).collect();
        assert!(path.len() >= 2);
        assert!(path.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{path:?}");
        let summary = recs.iter().find(|r| r.mode == mode && r.stage.is_none()).unwrap();
        assert_eq!(summary.nee.unwrap(), *path.last().unwrap());
    }
}

#[test]
fn trials_do_not_depend_on_each_other() {
    let cfg = ExperimentConfig { designs: vec![DesignType::Nee], ..small(ExperimentId::Fig6, 3) };
    let all = run_experiment(&cfg).unwrap();
    let per = all.len() / 3;
    for i in [2, 0, 1] {
        let alone = run_trial(&cfg, i);
        let a = comparable_rows(&csv_string(&alone).unwrap()).unwrap();
        let b = comparable_rows(&csv_string(&all[i * per..(i + 1) * per]).unwrap()).unwrap();
        assert_eq!(a, b, "trial {i}");
    }
    let fewer = run_experiment(&ExperimentConfig { trials: 2, ..cfg.clone() }).unwrap();
    let a = comparable_rows(&csv_string(&fewer).unwrap()).unwrap();
    let b = comparable_rows(&csv_string(&all[..2 * per]).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn outputs_carry_a_sidecar() {
    let dir = std::env::temp_dir().join(format!("surveil-out-{}", std::process::id()));
    let path = dir.join("nested/fig6.csv");
    let cfg = ExperimentConfig { designs: vec![DesignType::Nee], modes: vec![DelayMode::Npd], ..small(ExperimentId::Fig6, 1) };
    let recs = run_experiment(&cfg).unwrap();
    write_outputs(&path, &recs, &cfg, 1.5).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("experiment,trial,seed,mode,design,"));
    assert_eq!(text.lines().count(), recs.len() + 1);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["records"], recs.len());
    assert_eq!(meta["config"]["experiment"], "fig6");
    let back: ExperimentConfig = serde_json::from_value(meta["config"].clone()).unwrap();
    assert_eq!(back, cfg);
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #[test]
    fn printed_floats_keep_twelve_digits(x in -1e12f64..1e12) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }

    #[test]
    fn grid_size_is_the_product_of_the_axes(a in 1usize..4, b in 1usize..4, c in 1usize..3) {
        let cfg = ExperimentConfig {
            grid: Grid {
                p_max_dbm: Some((0..a).map(|k| 10.0 + k as f64).collect()),
                alpha_d: Some((0..b).map(|k| 1.0 + k as f64).collect()),
                d_m: Some((0..c).map(|k| 1.5 + k as f64).collect()),
                ..Default::default()
            },
            ..ExperimentConfig::preset(ExperimentId::Custom)
        };
        prop_assert_eq!(cfg.grid_points().len(), a * b * c);
    }
}
