//! Node placement and seeded channel generation.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{ChannelSet, Dims};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Topology {
    pub s: Point,
    pub d: Point,
    pub t: Point,
    pub r: Point,
    pub m: Point,
    /// Gain at unit distance.
    pub d0: f64,
    pub alpha_pl: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology { s: [-0.5, 0.0], d: [0.5, 0.0], t: [0.0, 1.0], r: [0.0, 0.3], m: [0.0, 2.0], d0: 1.0, alpha_pl: 3.0 }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Topology {
    /// Per-entry variance `D0 d^-alpha` of the link between two nodes.
    pub fn variance(&self, a: Point, b: Point) -> f64 {
        self.d0 * dist(a, b).powf(-self.alpha_pl)
    }

    pub fn validate(&self) -> Result<()> {
        let links = [
            ("S-D", self.s, self.d),
            ("S-R", self.s, self.r),
            ("S-T", self.s, self.t),
            ("T-D", self.t, self.d),
            ("T-R", self.t, self.r),
            ("T-M", self.t, self.m),
        ];
        for (name, a, b) in links {
            if !(dist(a, b) > 0.0) {
                return Err(Error::InvalidParams(format!("{name} distance is zero")));
            }
        }
        if !(self.d0 > 0.0) {
            return Err(Error::InvalidParams("d0 must be positive".into()));
        }
        Ok(())
    }

    /// Variances of (DS, RS, TS, DT, RT, MT).
    pub fn link_variances(&self) -> [f64; 6] {
        [
            self.variance(self.d, self.s),
            self.variance(self.r, self.s),
            self.variance(self.t, self.s),
            self.variance(self.d, self.t),
            self.variance(self.r, self.t),
            self.variance(self.m, self.t),
        ]
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn cn_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVec {
    CVec::from_fn(n, |_, _| cn(rng, variance))
}

pub fn cn_mat<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, variance: f64) -> CMat {
    CMat::from_fn(m, n, |_, _| cn(rng, variance))
}

/// Draws one channel set from an existing generator. The self-interference
/// channel has unit variance.
pub fn sample_channels<R: Rng + ?Sized>(topo: &Topology, dims: Dims, rng: &mut R) -> ChannelSet {
    let [ds, rs, ts, dt, rt, mt] = topo.link_variances();
    ChannelSet {
        h_ds: cn(rng, ds),
        h_rs: cn(rng, rs),
        h_ts: cn_vec(rng, dims.n_r, ts),
        h_dt: cn_vec(rng, dims.n_t, dt),
        h_rt: cn_vec(rng, dims.n_t, rt),
        h_mt: cn_mat(rng, dims.n_m, dims.n_t, mt),
        h_tt: cn_mat(rng, dims.n_r, dims.n_t, 1.0),
    }
}

pub fn generate_channels(topo: &Topology, dims: Dims, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_channels(topo, dims, &mut rng)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for stream `index` of a master seed.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_distance_has_unit_variance() {
        let t = Topology::default();
        assert!((t.variance([0.0, 0.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((t.variance(t.s, t.d) - 1.0).abs() < 1e-15);
        let ts = t.variance(t.t, t.s);
        assert!((ts - 1.25f64.powf(-1.5)).abs() < 1e-12);
        assert!((ts - 0.7155).abs() < 1e-4);
    }

    #[test]
    fn same_seed_same_channels() {
        let t = Topology::default();
        let a = generate_channels(&t, Dims::default(), 42);
        let b = generate_channels(&t, Dims::default(), 42);
        assert_eq!(a, b);
        let c = generate_channels(&t, Dims::default(), 43);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_variance_matches_path_loss() {
        let t = Topology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let var = t.variance(t.t, t.s);
        let mean_sq: f64 = (0..n).map(|_| cn(&mut rng, var).norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean_sq / var - 1.0).abs() < 0.02);
    }

    #[test]
    fn sub_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| sub_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
    }
}
