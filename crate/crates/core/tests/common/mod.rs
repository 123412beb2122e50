#![allow(dead_code)]

use surveil_core::linalg::{c, CMat, CVec};
use surveil_core::model::{DelayMode, Dims, Instance, SystemParams};
use surveil_core::scenario::{generate_channels, Topology};

pub fn instance(seed: u64, mode: DelayMode) -> Instance {
    let ch = generate_channels(&Topology::default(), Dims::default(), seed);
    Instance::new(ch, SystemParams::default().with_mode(mode)).unwrap()
}

pub const MINI: Dims = Dims { n_t: 3, n_r: 1, n_m: 1 };

/// Miniature instance with the secondary link switched off, so designs
/// reduce to `G` in C^2.
pub fn mini_instance(seed: u64, mode: DelayMode) -> Instance {
    let ch = generate_channels(&Topology::default(), MINI, seed);
    let params = SystemParams { alpha_r: 0.0, r_th: 0.0, ..SystemParams::default().with_mode(mode) };
    Instance::new(ch, params).unwrap()
}

pub fn mini_g(x: &[f64; 4]) -> CMat {
    CMat::from_column_slice(2, 1, &[c(x[0], x[1]), c(x[2], x[3])])
}

/// Maximizes `f` over the box `[-r, r]^4` by a dense grid followed by
/// successive zooms around the incumbent. `None` marks infeasible points.
pub fn grid_max(r: f64, coarse: usize, f: impl Fn(&[f64; 4]) -> Option<f64>) -> (f64, [f64; 4]) {
    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    let axis = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    };
    let scan = |centre: [f64; 4], half: f64, n: usize, best: &mut (f64, [f64; 4])| {
        let ax: Vec<Vec<f64>> = (0..4).map(|i| axis(n, centre[i] - half, centre[i] + half)).collect();
        for &a in &ax[0] {
            for &b in &ax[1] {
                for &cc in &ax[2] {
                    for &d in &ax[3] {
                        let x = [a, b, cc, d];
                        if let Some(val) = f(&x) {
                            if val > best.0 {
                                *best = (val, x);
                            }
                        }
                    }
                }
            }
        }
    };
    scan([0.0; 4], r, coarse, &mut best);
    let mut half = 2.0 * r / (coarse - 1) as f64;
    for _ in 0..12 {
        let centre = best.1;
        scan(centre, half, 9, &mut best);
        half *= 0.4;
    }
    best
}

pub fn zeros_v(n: usize) -> CVec {
    CVec::zeros(n)
}
