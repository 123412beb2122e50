//! Complex design variables `(G, v)` embedded in a real cone program.

use crate::conic::{realify, Affine, CAffine, ConeProgram};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{Dims, Instance};

#[derive(Clone, Debug)]
pub struct DesignVars {
    pub dims: Dims,
    /// Entries of `G`, row-major.
    pub g: Vec<CAffine>,
    pub v: Vec<CAffine>,
    first: usize,
}

impl DesignVars {
    pub fn alloc(p: &mut ConeProgram, dims: Dims) -> DesignVars {
        let ng = dims.n_g() * dims.n_r;
        let first = p.new_vars(2 * (ng + dims.n_t));
        let g = (0..ng).map(|k| CAffine::var(first + 2 * k, first + 2 * k + 1)).collect();
        let off = first + 2 * ng;
        let v = (0..dims.n_t).map(|k| CAffine::var(off + 2 * k, off + 2 * k + 1)).collect();
        DesignVars { dims, g, v, first }
    }

    /// Constant-valued stand-in (for steps where the design is fixed).
    pub fn fixed(g: &CMat, v: &CVec) -> DesignVars {
        let (ng, nr) = g.shape();
        let dims = Dims { n_t: v.len(), n_r: nr, n_m: 0 };
        debug_assert_eq!(ng, dims.n_g());
        let gv = (0..ng * nr).map(|k| CAffine::constant(g[(k / nr, k % nr)])).collect();
        let vv = v.iter().map(|&x| CAffine::constant(x)).collect();
        DesignVars { dims, g: gv, v: vv, first: usize::MAX }
    }

    pub fn is_fixed(&self) -> bool {
        self.first == usize::MAX
    }

    fn gij(&self, i: usize, j: usize) -> &CAffine {
        &self.g[i * self.dims.n_r + j]
    }

    /// `G b`, length `N_T - N_R`.
    pub fn g_times(&self, b: &CVec) -> Vec<CAffine> {
        (0..self.dims.n_g())
            .map(|i| {
                let row: Vec<CAffine> = (0..self.dims.n_r).map(|j| self.gij(i, j).clone()).collect();
                crate::conic::cdot(b.as_slice(), &row)
            })
            .collect()
    }

    /// `a^T G`, length `N_R`.
    pub fn row_g(&self, a: &CVec) -> Vec<CAffine> {
        (0..self.dims.n_r)
            .map(|j| {
                let col: Vec<CAffine> = (0..self.dims.n_g()).map(|i| self.gij(i, j).clone()).collect();
                crate::conic::cdot(a.as_slice(), &col)
            })
            .collect()
    }

    /// `a^T G b`.
    pub fn bilinear(&self, a: &CVec, b: &CVec) -> CAffine {
        let coefs: Vec<C64> = (0..self.g.len())
            .map(|k| a[k / self.dims.n_r] * b[k % self.dims.n_r])
            .collect();
        crate::conic::cdot(&coefs, &self.g)
    }

    /// `M G` row-major, shape `M.nrows() x N_R`.
    pub fn mat_g(&self, m: &CMat) -> Vec<Vec<CAffine>> {
        (0..m.nrows())
            .map(|r| {
                let a = m.row(r).transpose();
                self.row_g(&a)
            })
            .collect()
    }

    /// `a^T v`.
    pub fn row_v(&self, a: &CVec) -> CAffine {
        crate::conic::cdot(a.as_slice(), &self.v)
    }

    /// `M v`.
    pub fn mat_v(&self, m: &CMat) -> Vec<CAffine> {
        (0..m.nrows()).map(|r| self.row_v(&m.row(r).transpose())).collect()
    }

    /// Real expressions whose squares sum to `P_T(G, v)`.
    pub fn power_terms(&self, inst: &Instance) -> Vec<Affine> {
        let p = &inst.params;
        let mut c: Vec<CAffine> = self
            .g_times(&inst.channels.h_ts)
            .into_iter()
            .map(|e| e.scale_real(p.p_s.sqrt()))
            .collect();
        c.extend(self.g.iter().map(|e| e.scale_real(p.sigma2_t.sqrt())));
        c.extend(self.v.iter().cloned());
        realify(&c)
    }

    pub fn extract(&self, x: &[f64]) -> (CMat, CVec) {
        let nr = self.dims.n_r;
        let g = CMat::from_fn(self.dims.n_g(), nr, |i, j| self.g[i * nr + j].eval(x));
        let v = CVec::from_fn(self.dims.n_t, |i, _| self.v[i].eval(x));
        (g, v)
    }
}

/// Sum of squares of real expressions at `x`.
pub fn sum_sq(terms: &[Affine], x: &[f64]) -> f64 {
    terms.iter().map(|t| t.eval(x).powi(2)).sum()
}
