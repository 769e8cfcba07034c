//! Scalar abstraction over `f64` and a one-direction forward-mode dual
//! number, plus the constraining transforms written against it.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(x: f64) -> Self;
    fn val(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn ln_1p(self) -> Self;
}

impl Real for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn val(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn var(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        Dual { v, d: self.d * dv }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual {
            v: self.v / o.v,
            d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
        }
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}
impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, o: f64) -> Dual {
        Dual { v: self.v + o, d: self.d }
    }
}
impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(self, o: f64) -> Dual {
        Dual { v: self.v - o, d: self.d }
    }
}
impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, o: f64) -> Dual {
        Dual { v: self.v * o, d: self.d * o }
    }
}
impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, o: f64) -> Dual {
        Dual { v: self.v / o, d: self.d / o }
    }
}

impl Real for Dual {
    fn cst(x: f64) -> Self {
        Dual { v: x, d: 0.0 }
    }
    fn val(self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn ln_1p(self) -> Self {
        self.chain(self.v.ln_1p(), 1.0 / (1.0 + self.v))
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn log1p_exp<R: Real>(x: R) -> R {
    if x.val() > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Stick-breaking map from `K - 1` reals to the `K`-simplex, with the log
/// absolute Jacobian determinant. Zero input gives the uniform simplex.
pub fn simplex_constrain<R: Real>(y: &[R]) -> (Vec<R>, R) {
    let k = y.len() + 1;
    let mut x = Vec::with_capacity(k);
    let mut stick = R::cst(1.0);
    let mut lj = R::cst(0.0);
    for (i, &yi) in y.iter().enumerate() {
        let adj = yi - ((k - 1 - i) as f64).ln();
        // z = inv_logit(adj)
        let log_z = -log1p_exp(-adj);
        let log_1mz = -log1p_exp(adj);
        let xi = stick * log_z.exp();
        lj = lj + stick.ln() + log_z + log_1mz;
        stick = stick - xi;
        x.push(xi);
    }
    x.push(stick);
    (x, lj)
}

pub fn simplex_unconstrain(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut stick = 1.0;
    let mut y = Vec::with_capacity(k.saturating_sub(1));
    for (i, &xi) in x.iter().take(k - 1).enumerate() {
        let z = xi / stick;
        y.push((z / (1.0 - z)).ln() + ((k - 1 - i) as f64).ln());
        stick -= xi;
    }
    y
}

/// Cholesky factor of a `d × d` correlation matrix from `d(d-1)/2` reals via
/// canonical partial correlations, with the log absolute Jacobian.
pub fn cholesky_corr_constrain<R: Real>(y: &[R], d: usize) -> (Vec<Vec<R>>, R) {
    let mut l = vec![vec![R::cst(0.0); d]; d];
    let mut lj = R::cst(0.0);
    if d == 0 {
        return (l, lj);
    }
    l[0][0] = R::cst(1.0);
    let mut k = 0;
    for i in 1..d {
        let z = y[k].tanh();
        lj = lj + (-(z * z)).ln_1p();
        k += 1;
        l[i][0] = z;
        let mut sum_sqs = z * z;
        for j in 1..i {
            let z = y[k].tanh();
            lj = lj + (-(z * z)).ln_1p();
            k += 1;
            lj = lj + (-sum_sqs).ln_1p() * 0.5;
            l[i][j] = z * (-sum_sqs + 1.0).sqrt();
            sum_sqs = sum_sqs + l[i][j] * l[i][j];
        }
        l[i][i] = (-sum_sqs + 1.0).sqrt();
    }
    (l, lj)
}

pub fn cholesky_corr_unconstrain(l: &[Vec<f64>]) -> Vec<f64> {
    let d = l.len();
    let mut y = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 1..d {
        let mut sum_sqs = 0.0;
        for j in 0..i {
            let z = l[i][j] / (1.0 - sum_sqs).sqrt();
            y.push(z.atanh());
            sum_sqs += l[i][j] * l[i][j];
        }
    }
    y
}
