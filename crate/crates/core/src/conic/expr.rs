use num_complex::Complex64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Real affine function `constant + sum(coef * x[var])` of the decision vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Affine { constant: c, terms: Vec::new() }
    }

    pub fn var(i: usize) -> Self {
        Affine { constant: 0.0, terms: vec![(i, 1.0)] }
    }

    pub fn term(i: usize, coef: f64) -> Self {
        Affine { constant: 0.0, terms: vec![(i, coef)] }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn push(&mut self, i: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((i, coef));
        }
    }

    pub fn add_scaled(&mut self, other: &Affine, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        for &(i, c) in &other.terms {
            self.push(i, s * c);
        }
    }

    pub fn scaled(&self, s: f64) -> Affine {
        let mut out = Affine::constant(self.constant * s);
        if s != 0.0 {
            out.terms = self.terms.iter().map(|&(i, c)| (i, c * s)).collect();
        }
        out
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compress(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|&(_, c)| c != 0.0);
            return;
        }
        self.terms.sort_unstable_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    pub fn compressed(&self) -> Affine {
        let mut a = self.clone();
        a.compress();
        a
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

impl From<f64> for Affine {
    fn from(c: f64) -> Self {
        Affine::constant(c)
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: f64) -> Affine {
        self.constant += rhs;
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: Affine) -> Affine {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Sub<f64> for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: f64) -> Affine {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, rhs: f64) -> Affine {
        self.scaled(rhs)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

impl AddAssign<&Affine> for Affine {
    fn add_assign(&mut self, rhs: &Affine) {
        self.add_scaled(rhs, 1.0);
    }
}

/// Complex affine function of the real decision vector, kept as a real and
/// an imaginary part.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CAffine {
    pub re: Affine,
    pub im: Affine,
}

impl CAffine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        CAffine { re: Affine::constant(c.re), im: Affine::constant(c.im) }
    }

    pub fn real(a: Affine) -> Self {
        CAffine { re: a, im: Affine::zero() }
    }

    /// The complex variable `x[re] + i x[im]`.
    pub fn var(re: usize, im: usize) -> Self {
        CAffine { re: Affine::var(re), im: Affine::var(im) }
    }

    pub fn is_constant(&self) -> bool {
        self.re.is_constant() && self.im.is_constant()
    }

    /// Constant part; exact when the expression is constant.
    pub fn value0(&self) -> Complex64 {
        Complex64::new(self.re.constant, self.im.constant)
    }

    pub fn conj(&self) -> CAffine {
        CAffine { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    pub fn scale(&self, c: Complex64) -> CAffine {
        let mut re = self.re.scaled(c.re);
        re.add_scaled(&self.im, -c.im);
        let mut im = self.re.scaled(c.im);
        im.add_scaled(&self.im, c.re);
        CAffine { re, im }
    }

    pub fn scale_real(&self, s: f64) -> CAffine {
        CAffine { re: self.re.scaled(s), im: self.im.scaled(s) }
    }

    pub fn add_scaled(&mut self, other: &CAffine, c: Complex64) {
        self.re.add_scaled(&other.re, c.re);
        self.re.add_scaled(&other.im, -c.im);
        self.im.add_scaled(&other.re, c.im);
        self.im.add_scaled(&other.im, c.re);
    }

    /// Product of two expressions, at least one of which must be constant.
    pub fn times(&self, other: &CAffine) -> CAffine {
        if other.is_constant() {
            self.scale(other.value0())
        } else {
            assert!(self.is_constant(), "product of two non-constant affine expressions");
            other.scale(self.value0())
        }
    }

    pub fn compress(&mut self) {
        self.re.compress();
        self.im.compress();
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

impl From<Complex64> for CAffine {
    fn from(c: Complex64) -> Self {
        CAffine::constant(c)
    }
}

impl Add for CAffine {
    type Output = CAffine;
    fn add(self, rhs: CAffine) -> CAffine {
        CAffine { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub for CAffine {
    type Output = CAffine;
    fn sub(self, rhs: CAffine) -> CAffine {
        CAffine { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl Add<Complex64> for CAffine {
    type Output = CAffine;
    fn add(self, rhs: Complex64) -> CAffine {
        CAffine { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub<Complex64> for CAffine {
    type Output = CAffine;
    fn sub(self, rhs: Complex64) -> CAffine {
        CAffine { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl Mul<Complex64> for CAffine {
    type Output = CAffine;
    fn mul(self, rhs: Complex64) -> CAffine {
        self.scale(rhs)
    }
}

impl Neg for CAffine {
    type Output = CAffine;
    fn neg(self) -> CAffine {
        self.scale_real(-1.0)
    }
}

/// Sum of `coef[k] * expr[k]`.
pub fn cdot(coefs: &[Complex64], exprs: &[CAffine]) -> CAffine {
    debug_assert_eq!(coefs.len(), exprs.len());
    let mut out = CAffine::zero();
    for (c, e) in coefs.iter().zip(exprs) {
        if *c != Complex64::new(0.0, 0.0) {
            out.add_scaled(e, *c);
        }
    }
    out.compress();
    out
}

/// Real parts followed by imaginary parts, for norms of complex vectors.
pub fn realify(v: &[CAffine]) -> Vec<Affine> {
    v.iter().map(|e| e.re.clone()).chain(v.iter().map(|e| e.im.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_scaling_matches_arithmetic() {
        let e = CAffine::var(0, 1) + Complex64::new(0.5, -1.0);
        let c = Complex64::new(2.0, 3.0);
        let x = [0.3, -0.7];
        let lhs = e.scale(c).eval(&x);
        let rhs = e.eval(&x) * c;
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((e.conj().eval(&x) - e.eval(&x).conj()).norm() < 1e-15);
    }

    #[test]
    fn compress_merges_terms() {
        let mut a = Affine::var(2) + Affine::term(0, 1.5) + Affine::term(2, -1.0);
        a.compress();
        assert_eq!(a.terms, vec![(0, 1.5)]);
    }

    #[test]
    #[should_panic]
    fn bilinear_product_is_rejected() {
        let _ = CAffine::var(0, 1).times(&CAffine::var(2, 3));
    }
}
