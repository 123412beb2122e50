//! Primal-dual interior-point method for symmetric cones.
//!
//! Homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector, in the style of ECOS/CVXOPT. The reduced KKT system
//! is solved through the dense normal matrix `G' W^-1 W^-T G`, which is
//! small for the programs built in this crate (tens of variables).

use super::std_form::{Block, BlockKind, StdForm};
use nalgebra::{Cholesky, DMatrix, DVector, LU, SVD};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    ReducedAccuracy,
    PrimalInfeasible,
    DualInfeasible,
    Failed,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub x: DVector<f64>,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
}

const STEP: f64 = 0.99;
const REDUCED_FACTOR: f64 = 1e3;

/// Offset of the diagonal entry of column `j` in svec (lower, column-major).
fn col_start(k: usize, j: usize) -> usize {
    j * k - j * j.saturating_sub(1) / 2
}

fn mat(k: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        m[(j, j)] = v[idx];
        idx += 1;
        for i in j + 1..k {
            let x = v[idx] * FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            idx += 1;
        }
    }
    m
}

fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let k = m.nrows();
    let mut idx = 0;
    for j in 0..k {
        out[idx] = m[(j, j)];
        idx += 1;
        for i in j + 1..k {
            out[idx] = (m[(i, j)] + m[(j, i)]) * FRAC_1_SQRT_2;
            idx += 1;
        }
    }
}

/// Sparse symmetric coefficient matrix of one variable inside a PSD block.
#[derive(Clone, Debug)]
struct SymEntries {
    var: usize,
    /// (p, q, value) with p >= q; value is the matrix entry.
    entries: Vec<(usize, usize, f64)>,
}

struct BlockData {
    active: Vec<usize>,
    psd_cols: Vec<SymEntries>,
}

fn block_data(sf: &StdForm, b: &Block) -> BlockData {
    let mut active = Vec::new();
    for j in 0..sf.n {
        if (b.offset..b.offset + b.dim).any(|r| sf.g[(r, j)] != 0.0) {
            active.push(j);
        }
    }
    let mut psd_cols = Vec::new();
    if let BlockKind::Psd(k) = b.kind {
        for &j in &active {
            let mut entries = Vec::new();
            let mut idx = b.offset;
            for q in 0..k {
                for p in q..k {
                    let v = sf.g[(idx, j)];
                    if v != 0.0 {
                        let val = if p == q { v } else { v * FRAC_1_SQRT_2 };
                        entries.push((p, q, val));
                    }
                    idx += 1;
                }
            }
            psd_cols.push(SymEntries { var: j, entries });
        }
    }
    BlockData { active, psd_cols }
}

enum Scaling {
    Lp { w: Vec<f64> },
    Soc { eta: f64, wb: Vec<f64> },
    /// `p = rinv' rinv` and `q = r r'` give `(W'W)^-1` and `W'W` in one
    /// congruence each.
    Psd { k: usize, r: DMatrix<f64>, rinv: DMatrix<f64>, p: DMatrix<f64>, q: DMatrix<f64> },
}

fn soc_res(v: &[f64]) -> f64 {
    v[0] * v[0] - v[1..].iter().map(|x| x * x).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Scaling {
    /// NT scaling of the pair (s, z); returns the scaling and the scaled point.
    fn new(kind: BlockKind, s: &[f64], z: &[f64]) -> Option<(Scaling, Vec<f64>)> {
        match kind {
            BlockKind::Lp => {
                if s.iter().chain(z).any(|&x| x <= 0.0) {
                    return None;
                }
                let w = s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect();
                let lam = s.iter().zip(z).map(|(a, b)| (a * b).sqrt()).collect();
                Some((Scaling::Lp { w }, lam))
            }
            BlockKind::Soc => {
                let sr = soc_res(s);
                let zr = soc_res(z);
                if sr <= 0.0 || zr <= 0.0 || s[0] <= 0.0 || z[0] <= 0.0 {
                    return None;
                }
                let (ss, zs) = (sr.sqrt(), zr.sqrt());
                let sb: Vec<f64> = s.iter().map(|x| x / ss).collect();
                let zb: Vec<f64> = z.iter().map(|x| x / zs).collect();
                let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
                let mut wb = vec![0.0; s.len()];
                wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..s.len() {
                    wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                }
                let eta = (sr / zr).sqrt().sqrt();
                let sc = Scaling::Soc { eta, wb };
                let lam = sc.apply_w(z);
                Some((sc, lam))
            }
            BlockKind::Psd(k) => {
                let sm = mat(k, s);
                let zm = mat(k, z);
                let l1 = Cholesky::new(sm)?.l();
                let l2 = Cholesky::new(zm)?.l();
                let m = l2.transpose() * &l1;
                let svd = SVD::new(m, true, true);
                let u = svd.u?;
                let vt = svd.v_t?;
                let sig = svd.singular_values;
                if sig.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return None;
                }
                let isq = DMatrix::from_diagonal(&sig.map(|x| 1.0 / x.sqrt()));
                let r = &l1 * vt.transpose() * &isq;
                let rinv = &isq * u.transpose() * l2.transpose();
                let mut lam = vec![0.0; k * (k + 1) / 2];
                for (j, &sj) in sig.iter().enumerate() {
                    lam[col_start(k, j)] = sj;
                }
                let p = rinv.transpose() * &rinv;
                let q = &r * r.transpose();
                Some((Scaling::Psd { k, r, rinv, p, q }, lam))
            }
        }
    }

    fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Lp { w } => v.iter().zip(w).map(|(a, b)| a * b).collect(),
            Scaling::Soc { eta, wb } => soc_w(*eta, wb, v, false),
            Scaling::Psd { k, r, .. } => congruence(*k, v, r, true),
        }
    }

    fn apply_wt(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { k, r, .. } => congruence(*k, v, r, false),
            _ => self.apply_w(v),
        }
    }

    fn apply_winv(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Lp { w } => v.iter().zip(w).map(|(a, b)| a / b).collect(),
            Scaling::Soc { eta, wb } => soc_w(*eta, wb, v, true),
            Scaling::Psd { k, rinv, .. } => congruence(*k, v, rinv, true),
        }
    }

    fn apply_winvt(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { k, rinv, .. } => congruence(*k, v, rinv, false),
            _ => self.apply_winv(v),
        }
    }
}

/// `M' X M` (`transpose_left`) or `M X M'` in svec coordinates.
fn congruence(k: usize, v: &[f64], m: &DMatrix<f64>, transpose_left: bool) -> Vec<f64> {
    let x = mat(k, v);
    let y = if transpose_left { m.transpose() * x * m } else { m * x * m.transpose() };
    let mut out = vec![0.0; v.len()];
    svec_into(&y, &mut out);
    out
}

fn soc_w(eta: f64, wb: &[f64], v: &[f64], inverse: bool) -> Vec<f64> {
    let w0 = wb[0];
    let w1 = &wb[1..];
    let v1 = &v[1..];
    let d = dot(w1, v1);
    let sgn = if inverse { -1.0 } else { 1.0 };
    let scale = if inverse { 1.0 / eta } else { eta };
    let mut out = vec![0.0; v.len()];
    out[0] = scale * (w0 * v[0] + sgn * d);
    let coef = sgn * v[0] + d / (1.0 + w0);
    for i in 0..w1.len() {
        out[i + 1] = scale * (v1[i] + coef * w1[i]);
    }
    out
}

/// Jordan product `x o y`.
fn jordan(kind: BlockKind, x: &[f64], y: &[f64]) -> Vec<f64> {
    match kind {
        BlockKind::Lp => x.iter().zip(y).map(|(a, b)| a * b).collect(),
        BlockKind::Soc => {
            let mut out = vec![0.0; x.len()];
            out[0] = dot(x, y);
            for i in 1..x.len() {
                out[i] = x[0] * y[i] + y[0] * x[i];
            }
            out
        }
        BlockKind::Psd(k) => {
            let xm = mat(k, x);
            let ym = mat(k, y);
            let p = &xm * &ym;
            let sym = (&p + p.transpose()) * 0.5;
            let mut out = vec![0.0; x.len()];
            svec_into(&sym, &mut out);
            out
        }
    }
}

/// Solves `lam o u = d` for `u`, with `lam` the scaled point (diagonal for PSD).
fn jordan_div(kind: BlockKind, lam: &[f64], d: &[f64]) -> Vec<f64> {
    match kind {
        BlockKind::Lp => d.iter().zip(lam).map(|(a, b)| a / b).collect(),
        BlockKind::Soc => {
            let det = soc_res(lam);
            let l1 = &lam[1..];
            let u0 = (lam[0] * d[0] - dot(l1, &d[1..])) / det;
            let mut out = vec![0.0; d.len()];
            out[0] = u0;
            for i in 1..d.len() {
                out[i] = (d[i] - u0 * lam[i]) / lam[0];
            }
            out
        }
        BlockKind::Psd(k) => {
            let diag: Vec<f64> = (0..k).map(|j| lam[col_start(k, j)]).collect();
            let mut out = vec![0.0; d.len()];
            let mut idx = 0;
            for j in 0..k {
                for i in j..k {
                    out[idx] = 2.0 * d[idx] / (diag[i] + diag[j]);
                    idx += 1;
                }
            }
            out
        }
    }
}

fn identity(kind: BlockKind, dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    match kind {
        BlockKind::Lp => e.iter_mut().for_each(|x| *x = 1.0),
        BlockKind::Soc => e[0] = 1.0,
        BlockKind::Psd(k) => (0..k).for_each(|j| e[col_start(k, j)] = 1.0),
    }
    e
}

fn degree(b: &Block) -> usize {
    match b.kind {
        BlockKind::Lp => b.dim,
        BlockKind::Soc => 1,
        BlockKind::Psd(k) => k,
    }
}

/// Smallest "eigenvalue" of a point (negative when outside the cone).
fn min_eig(kind: BlockKind, v: &[f64]) -> f64 {
    match kind {
        BlockKind::Lp => v.iter().copied().fold(f64::INFINITY, f64::min),
        BlockKind::Soc => v[0] - v[1..].iter().map(|x| x * x).sum::<f64>().sqrt(),
        BlockKind::Psd(k) => mat(k, v).symmetric_eigenvalues().min(),
    }
}

/// Largest step `a` with `lam + a d` in the cone (scaled coordinates).
fn max_step(kind: BlockKind, lam: &[f64], d: &[f64]) -> f64 {
    match kind {
        BlockKind::Lp => lam
            .iter()
            .zip(d)
            .filter(|(_, di)| **di < 0.0)
            .map(|(l, di)| -l / di)
            .fold(f64::INFINITY, f64::min),
        BlockKind::Soc => {
            let a = soc_res(d);
            let b = 2.0 * (lam[0] * d[0] - dot(&lam[1..], &d[1..]));
            let c = soc_res(lam).max(0.0);
            smallest_positive_root(a, b, c)
        }
        BlockKind::Psd(k) => {
            let isq: Vec<f64> = (0..k).map(|j| 1.0 / lam[col_start(k, j)].sqrt()).collect();
            let mut m = mat(k, d);
            for j in 0..k {
                for i in 0..k {
                    m[(i, j)] *= isq[i] * isq[j];
                }
            }
            let mn = m.symmetric_eigenvalues().min();
            if mn >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / mn
            }
        }
    }
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut best = f64::INFINITY;
    for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

struct Kkt {
    h: DMatrix<f64>,
    fact: KktFactor,
}

enum KktFactor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Kkt {
    fn new(h: DMatrix<f64>, a: &DMatrix<f64>) -> Option<Kkt> {
        let n = h.nrows();
        let p = a.nrows();
        let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let reg = 1e-13 * scale;
        if p == 0 {
            let mut hr = h.clone();
            for i in 0..n {
                hr[(i, i)] += reg;
            }
            let ch = Cholesky::new(hr)?;
            Some(Kkt { h, fact: KktFactor::Chol(ch) })
        } else {
            let mut k = DMatrix::zeros(n + p, n + p);
            k.view_mut((0, 0), (n, n)).copy_from(&h);
            for i in 0..n {
                k[(i, i)] += reg;
            }
            k.view_mut((n, 0), (p, n)).copy_from(a);
            k.view_mut((0, n), (n, p)).copy_from(&a.transpose());
            for i in 0..p {
                k[(n + i, n + i)] = -reg;
            }
            let lu = LU::new(k);
            if !lu.is_invertible() {
                return None;
            }
            Some(Kkt { h, fact: KktFactor::Lu(lu) })
        }
    }

    fn solve_once(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.fact {
            KktFactor::Chol(ch) => (ch.solve(r1), DVector::zeros(0)),
            KktFactor::Lu(lu) => {
                let n = r1.len();
                let mut rhs = DVector::zeros(n + r2.len());
                rhs.rows_mut(0, n).copy_from(r1);
                rhs.rows_mut(n, r2.len()).copy_from(r2);
                let sol = lu.solve(&rhs).unwrap_or(rhs);
                (sol.rows(0, n).into_owned(), sol.rows(n, r2.len()).into_owned())
            }
        }
    }

    /// Solves `[H A'; A 0][x; y] = [r1; r2]` with refinement against the
    /// unregularized system.
    fn solve(&self, a: &DMatrix<f64>, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut x, mut y) = self.solve_once(r1, r2);
        for _ in 0..2 {
            let mut e1 = r1 - &self.h * &x;
            if a.nrows() > 0 {
                e1 -= a.transpose() * &y;
            }
            let e2 = if a.nrows() > 0 { r2 - a * &x } else { DVector::zeros(0) };
            let nrm = e1.amax().max(if e2.is_empty() { 0.0 } else { e2.amax() });
            if nrm <= 1e-15 * (1.0 + r1.amax()) {
                break;
            }
            let (dx, dy) = self.solve_once(&e1, &e2);
            x += dx;
            if a.nrows() > 0 {
                y += dy;
            }
        }
        (x, y)
    }
}

struct Problem<'a> {
    sf: &'a StdForm,
    data: Vec<BlockData>,
    /// Nonzeros of each column of `G`.
    gcols: Vec<Vec<(usize, f64)>>,
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl<'a> Problem<'a> {
    fn blocks(&self) -> &[Block] {
        &self.sf.blocks
    }

    fn scalings(&self, s: &DVector<f64>, z: &DVector<f64>) -> Option<(Vec<Scaling>, DVector<f64>)> {
        let mut sc = Vec::with_capacity(self.blocks().len());
        let mut lam = DVector::zeros(s.len());
        for b in self.blocks() {
            let r = b.offset..b.offset + b.dim;
            let (w, l) = Scaling::new(b.kind, &s.as_slice()[r.clone()], &z.as_slice()[r.clone()])?;
            lam.as_mut_slice()[r].copy_from_slice(&l);
            sc.push(w);
        }
        Some((sc, lam))
    }

    fn blockwise(&self, v: &DVector<f64>, mut f: impl FnMut(usize, &Block, &[f64]) -> Vec<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (i, b) in self.blocks().iter().enumerate() {
            let r = b.offset..b.offset + b.dim;
            let res = f(i, b, &v.as_slice()[r.clone()]);
            out.as_mut_slice()[r].copy_from_slice(&res);
        }
        out
    }

    /// Normal matrix `G' W^-1 W^-T G`.
    fn normal_matrix(&self, sc: &[Scaling]) -> DMatrix<f64> {
        let n = self.sf.n;
        let g = &self.sf.g;
        let mut h = DMatrix::zeros(n, n);
        for ((b, d), w) in self.blocks().iter().zip(&self.data).zip(sc) {
            let na = d.active.len();
            if na == 0 {
                continue;
            }
            let mut gh = DMatrix::zeros(b.dim, na);
            match w {
                Scaling::Lp { w } => {
                    for (c, &j) in d.active.iter().enumerate() {
                        for r in 0..b.dim {
                            gh[(r, c)] = g[(b.offset + r, j)] / w[r];
                        }
                    }
                }
                Scaling::Soc { .. } => {
                    for (c, &j) in d.active.iter().enumerate() {
                        let col: Vec<f64> = (0..b.dim).map(|r| g[(b.offset + r, j)]).collect();
                        let t = w.apply_winvt(&col);
                        for r in 0..b.dim {
                            gh[(r, c)] = t[r];
                        }
                    }
                }
                Scaling::Psd { k, rinv, .. } => {
                    let k = *k;
                    let mut acc = vec![0.0; b.dim];
                    for (c, col) in d.psd_cols.iter().enumerate() {
                        acc.iter_mut().for_each(|x| *x = 0.0);
                        for &(p, q, val) in &col.entries {
                            let rp = rinv.column(p);
                            let rq = rinv.column(q);
                            let mut idx = 0;
                            for jj in 0..k {
                                let (pj, qj) = (rp[jj], rq[jj]);
                                if p == q {
                                    let vj = val * pj;
                                    acc[idx] += vj * pj;
                                    idx += 1;
                                    let f = vj * SQRT_2;
                                    for ii in jj + 1..k {
                                        acc[idx] += f * rp[ii];
                                        idx += 1;
                                    }
                                } else {
                                    acc[idx] += 2.0 * val * pj * qj;
                                    idx += 1;
                                    let fp = val * SQRT_2 * qj;
                                    let fq = val * SQRT_2 * pj;
                                    for ii in jj + 1..k {
                                        acc[idx] += fp * rp[ii] + fq * rq[ii];
                                        idx += 1;
                                    }
                                }
                            }
                        }
                        debug_assert_eq!(col.var, d.active[c]);
                        gh.column_mut(c).copy_from_slice(&acc);
                    }
                }
            }
            let hb = gh.transpose() * &gh;
            for (c1, &j1) in d.active.iter().enumerate() {
                for (c2, &j2) in d.active.iter().enumerate() {
                    h[(j1, j2)] += hb[(c1, c2)];
                }
            }
        }
        h
    }

    /// `(W'W)^-1 v`.
    fn wtw_inv(&self, sc: &[Scaling], v: &DVector<f64>) -> DVector<f64> {
        self.blockwise(v, |i, _, x| match &sc[i] {
            Scaling::Psd { k, p, .. } => congruence(*k, x, p, true),
            w => w.apply_winv(&w.apply_winvt(x)),
        })
    }

    fn wtw(&self, sc: &[Scaling], v: &DVector<f64>) -> DVector<f64> {
        self.blockwise(v, |i, _, x| match &sc[i] {
            Scaling::Psd { k, q, .. } => congruence(*k, x, q, true),
            w => w.apply_wt(&w.apply_w(x)),
        })
    }

    /// `G x` using the column sparsity of `G`.
    fn g_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.sf.h.len());
        for (col, &xj) in self.gcols.iter().zip(x.iter()) {
            if xj != 0.0 {
                for &(r, v) in col {
                    out[r] += v * xj;
                }
            }
        }
        out
    }

    /// `G' z`.
    fn gt_mul(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.gcols.len(), self.gcols.iter().map(|col| col.iter().map(|&(r, v)| v * z[r]).sum()))
    }

    /// Solves `[0 A' G'; A 0 0; G 0 -W'W][x; y; z] = [r1; r2; r3]`.
    fn solve_full(
        &self,
        kkt: &Kkt,
        sc: &[Scaling],
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let sf = self.sf;
        let once = |r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>| {
            let t = self.wtw_inv(sc, r3);
            let rx = r1 + self.gt_mul(&t);
            let (x, y) = kkt.solve(&sf.a, &rx, r2);
            let z = self.wtw_inv(sc, &(self.g_mul(&x) - r3));
            (x, y, z)
        };
        let (mut x, mut y, mut z) = once(r1, r2, r3);
        for _ in 0..2 {
            let mut e1 = r1 - self.gt_mul(&z);
            if sf.a.nrows() > 0 {
                e1 -= sf.a.transpose() * &y;
            }
            let e2 = if sf.a.nrows() > 0 { r2 - &sf.a * &x } else { DVector::zeros(0) };
            let e3 = r3 - (self.g_mul(&x) - self.wtw(sc, &z));
            let nrm = e1.amax().max(e3.amax()).max(if e2.is_empty() { 0.0 } else { e2.amax() });
            let scale = 1.0 + r1.amax().max(r3.amax());
            if nrm <= 1e-14 * scale {
                break;
            }
            let (dx, dy, dz) = once(&e1, &e2, &e3);
            x += dx;
            if sf.a.nrows() > 0 {
                y += dy;
            }
            z += dz;
        }
        (x, y, z)
    }

    fn shift_interior(&self, v: &mut DVector<f64>) {
        let mut mn = f64::INFINITY;
        for b in self.blocks() {
            mn = mn.min(min_eig(b.kind, &v.as_slice()[b.offset..b.offset + b.dim]));
        }
        if mn.is_finite() && mn <= 1e-8 * v.norm().max(1.0) {
            let a = 1.0 - mn;
            for b in self.blocks() {
                let e = identity(b.kind, b.dim);
                for (i, ei) in e.iter().enumerate() {
                    v[b.offset + i] += a * ei;
                }
            }
        }
    }

    fn initial(&self) -> Option<Iterate> {
        let sf = self.sf;
        let m = sf.h.len();
        let ident: Vec<Scaling> = self
            .blocks()
            .iter()
            .map(|b| match b.kind {
                BlockKind::Lp => Scaling::Lp { w: vec![1.0; b.dim] },
                BlockKind::Soc => {
                    let mut wb = vec![0.0; b.dim];
                    wb[0] = 1.0;
                    Scaling::Soc { eta: 1.0, wb }
                }
                BlockKind::Psd(k) => {
                    let i = DMatrix::identity(k, k);
                    Scaling::Psd { k, r: i.clone(), rinv: i.clone(), p: i.clone(), q: i }
                }
            })
            .collect();
        let h = self.normal_matrix(&ident);
        let kkt = Kkt::new(h, &sf.a)?;
        let zero_n = DVector::zeros(sf.n);
        let (x, _, zp) = self.solve_full(&kkt, &ident, &zero_n, &sf.b, &sf.h);
        let mut s = -zp;
        let (_, y, mut z) = self.solve_full(&kkt, &ident, &(-&sf.c), &DVector::zeros(sf.b.len()), &DVector::zeros(m));
        self.shift_interior(&mut s);
        self.shift_interior(&mut z);
        Some(Iterate { x, y, z, s, tau: 1.0, kappa: 1.0 })
    }
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
    hz_by: f64,
    cx: f64,
}

fn metrics(prob: &Problem, it: &Iterate) -> Metrics {
    let sf = prob.sf;
    let resx0 = sf.c.norm().max(1.0);
    let resy0 = sf.b.norm().max(1.0);
    let resz0 = sf.h.norm().max(1.0);
    let gtz = prob.gt_mul(&it.z);
    let aty = if sf.a.nrows() > 0 { sf.a.transpose() * &it.y } else { DVector::zeros(sf.n) };
    let ax = if sf.a.nrows() > 0 { &sf.a * &it.x } else { DVector::zeros(0) };
    let gxs = prob.g_mul(&it.x) + &it.s;
    let tau = it.tau;
    let dres = ((&aty + &gtz) / tau + &sf.c).norm() / resx0;
    let py = if ax.is_empty() { 0.0 } else { (&ax / tau - &sf.b).norm() / resy0 };
    let pz = (&gxs / tau - &sf.h).norm() / resz0;
    let pres = py.max(pz);
    let cx = sf.c.dot(&it.x);
    let by = if sf.b.is_empty() { 0.0 } else { sf.b.dot(&it.y) };
    let hz = sf.h.dot(&it.z);
    let pcost = cx / tau;
    let dcost = -(by + hz) / tau;
    let gap = it.s.dot(&it.z) / (tau * tau);
    let relgap = if pcost < 0.0 {
        gap / -pcost
    } else if dcost > 0.0 {
        gap / dcost
    } else {
        f64::INFINITY
    };
    let hz_by = hz + by;
    let pinf = if hz_by < 0.0 { (&aty + &gtz).norm() / resx0 / -hz_by } else { f64::INFINITY };
    let dinf = if cx < 0.0 {
        let ry = if ax.is_empty() { 0.0 } else { ax.norm() / resy0 };
        ry.max(gxs.norm() / resz0) / -cx
    } else {
        f64::INFINITY
    };
    Metrics { pres, dres, gap, relgap, pinf, dinf, hz_by, cx }
}

fn converged(m: &Metrics, tol: f64) -> bool {
    m.pres <= tol && m.dres <= tol && (m.gap <= tol || m.relgap <= tol)
}

pub(crate) fn solve(sf: &StdForm, tol: f64, max_iter: usize) -> IpmResult {
    let gcols = (0..sf.n)
        .map(|j| sf.g.column(j).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(r, v)| (r, *v)).collect())
        .collect();
    let prob = Problem { sf, data: sf.blocks.iter().map(|b| block_data(sf, b)).collect(), gcols };
    let failed = |x: DVector<f64>, iterations| IpmResult {
        status: IpmStatus::Failed,
        x,
        iterations,
        pres: f64::INFINITY,
        dres: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let Some(mut it) = prob.initial() else {
        return failed(DVector::zeros(sf.n), 0);
    };
    let nu: usize = sf.blocks.iter().map(degree).sum();
    let mut best: Option<(f64, IpmResult)> = None;

    for iter in 0..=max_iter {
        let m = metrics(&prob, &it);
        let result = |status| IpmResult {
            status,
            x: &it.x / it.tau,
            iterations: iter,
            pres: m.pres,
            dres: m.dres,
            gap: m.gap,
        };
        if converged(&m, tol) {
            return result(IpmStatus::Optimal);
        }
        if m.pinf <= tol && m.hz_by < 0.0 {
            let mut r = result(IpmStatus::PrimalInfeasible);
            r.x = it.x.clone();
            return r;
        }
        if m.dinf <= tol && m.cx < 0.0 {
            let mut r = result(IpmStatus::DualInfeasible);
            r.x = it.x.clone();
            return r;
        }
        // quality of the current iterate for a fallback answer
        let score = m.pres.max(m.dres).max(m.gap.min(m.relgap));
        if converged(&m, tol * REDUCED_FACTOR) && best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, result(IpmStatus::ReducedAccuracy)));
        }
        if iter == max_iter {
            break;
        }
        let Some(next) = step(&prob, &it, nu) else { break };
        it = next;
    }
    match best {
        Some((_, r)) => r,
        None => {
            let m = metrics(&prob, &it);
            IpmResult { status: IpmStatus::Failed, x: &it.x / it.tau, iterations: max_iter, pres: m.pres, dres: m.dres, gap: m.gap }
        }
    }
}

/// One predictor-corrector step; `None` on numerical breakdown.
fn step(prob: &Problem, it: &Iterate, nu: usize) -> Option<Iterate> {
    let sf = prob.sf;
    let (sc, lam) = prob.scalings(&it.s, &it.z)?;
    let h = prob.normal_matrix(&sc);
    let kkt = Kkt::new(h, &sf.a)?;

    // residuals of the embedding
    let has_eq = sf.a.nrows() > 0;
    let aty = if has_eq { sf.a.transpose() * &it.y } else { DVector::zeros(sf.n) };
    let lx = &aty + prob.gt_mul(&it.z) + &sf.c * it.tau;
    let ly = if has_eq { &sf.b * it.tau - &sf.a * &it.x } else { DVector::zeros(0) };
    let lz = &sf.h * it.tau - prob.g_mul(&it.x) - &it.s;
    let by = if has_eq { sf.b.dot(&it.y) } else { 0.0 };
    let ltau = -sf.c.dot(&it.x) - by - sf.h.dot(&it.z) - it.kappa;
    let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (nu as f64 + 1.0);

    let (x1, y1, z1) = prob.solve_full(&kkt, &sc, &(-&sf.c), &sf.b, &sf.h);
    let by1 = if has_eq { sf.b.dot(&y1) } else { 0.0 };
    let denom1 = it.kappa / it.tau - sf.c.dot(&x1) - by1 - sf.h.dot(&z1);

    let lam_sq = prob.blockwise(&lam, |_, b, l| jordan(b.kind, l, l));

    struct Dir {
        dx: DVector<f64>,
        dy: DVector<f64>,
        dz: DVector<f64>,
        ds: DVector<f64>,
        dtau: f64,
        dkappa: f64,
        ds_scaled: DVector<f64>,
        dz_scaled: DVector<f64>,
    }

    let direction = |sigma: f64, ds_rhs: &DVector<f64>, dk_rhs: f64| -> Dir {
        let f = 1.0 - sigma;
        let qx = &lx * -f;
        let qy = &ly * -f;
        let qz = &lz * -f;
        let qtau = -f * ltau;
        // u = -lam \ ds
        let u = prob.blockwise(ds_rhs, |_, b, d| {
            let l = &lam.as_slice()[b.offset..b.offset + b.dim];
            jordan_div(b.kind, l, d).into_iter().map(|x| -x).collect()
        });
        let wtu = prob.blockwise(&u, |i, _, v| sc[i].apply_wt(v));
        let r3 = -&qz - &wtu;
        let (x2, y2, z2) = prob.solve_full(&kkt, &sc, &qx, &(-&qy), &r3);
        let by2 = if has_eq { sf.b.dot(&y2) } else { 0.0 };
        let dtau = (qtau - dk_rhs / it.tau + sf.c.dot(&x2) + by2 + sf.h.dot(&z2)) / denom1;
        let dx = x2 + &x1 * dtau;
        let dy = if has_eq { y2 + &y1 * dtau } else { DVector::zeros(0) };
        let dz = z2 + &z1 * dtau;
        let dz_scaled = prob.blockwise(&dz, |i, _, v| sc[i].apply_w(v));
        let ds_scaled = &u - &dz_scaled;
        let ds = prob.blockwise(&ds_scaled, |i, _, v| sc[i].apply_wt(v));
        let dkappa = -(dk_rhs + it.kappa * dtau) / it.tau;
        Dir { dx, dy, dz, ds, dtau, dkappa, ds_scaled, dz_scaled }
    };

    let step_len = |d: &Dir| -> f64 {
        let mut a = f64::INFINITY;
        for b in sf.blocks.iter() {
            let r = b.offset..b.offset + b.dim;
            let l = &lam.as_slice()[r.clone()];
            a = a.min(max_step(b.kind, l, &d.ds_scaled.as_slice()[r.clone()]));
            a = a.min(max_step(b.kind, l, &d.dz_scaled.as_slice()[r]));
        }
        if d.dtau < 0.0 {
            a = a.min(-it.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            a = a.min(-it.kappa / d.dkappa);
        }
        a
    };

    // predictor
    let aff = direction(0.0, &lam_sq, it.tau * it.kappa);
    let a_aff = step_len(&aff).min(1.0);
    let sigma = (1.0 - a_aff).powi(3).clamp(0.0, 1.0);

    // corrector
    let corr = prob.blockwise(&aff.ds_scaled, |_, b, dsa| {
        let r = b.offset..b.offset + b.dim;
        let dza = &aff.dz_scaled.as_slice()[r.clone()];
        let j = jordan(b.kind, dsa, dza);
        let e = identity(b.kind, b.dim);
        let l2 = &lam_sq.as_slice()[r];
        l2.iter().zip(&j).zip(&e).map(|((a, b), c)| a + b - sigma * mu * c).collect()
    });
    let dk = it.tau * it.kappa + aff.dtau * aff.dkappa - sigma * mu;
    let cmb = direction(sigma, &corr, dk);
    let a = (STEP * step_len(&cmb)).min(1.0);
    if !(a > 0.0) || !a.is_finite() {
        return None;
    }
    let next = Iterate {
        x: &it.x + &cmb.dx * a,
        y: if has_eq { &it.y + &cmb.dy * a } else { it.y.clone() },
        z: &it.z + &cmb.dz * a,
        s: &it.s + &cmb.ds * a,
        tau: it.tau + a * cmb.dtau,
        kappa: it.kappa + a * cmb.dkappa,
    };
    if !next.tau.is_finite() || next.tau <= 0.0 || next.x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(next)
}
