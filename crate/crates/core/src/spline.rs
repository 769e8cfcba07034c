//! B-, M- and I-spline bases on clamped knot vectors.
//!
//! The full knot sequence repeats each boundary knot `δ + 1` times. Basis
//! functions are right-continuous at interior knots and the last interval is
//! closed at the upper boundary, so degree-0 indicators cover the support
//! without gaps. Points within `1e-12` of the boundaries are clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    pub lower: f64,
    pub internal: Vec<f64>,
    pub upper: f64,
}

impl KnotVector {
    pub fn new(lower: f64, internal: Vec<f64>, upper: f64) -> Result<Self> {
        let kv = KnotVector {
            lower,
            internal,
            upper,
        };
        kv.validate()?;
        Ok(kv)
    }

    fn validate(&self) -> Result<()> {
        let finite = self.lower.is_finite()
            && self.upper.is_finite()
            && self.internal.iter().all(|k| k.is_finite());
        if !finite || self.lower >= self.upper {
            return Err(Error::InvalidKnots(format!(
                "boundaries {} and {} must be finite and increasing",
                self.lower, self.upper
            )));
        }
        let mut prev = self.lower;
        for (i, &k) in self.internal.iter().enumerate() {
            let ok = if i == 0 { k > prev } else { k >= prev };
            if !ok {
                return Err(Error::InvalidKnots(format!("internal knot {k} out of order")));
            }
            prev = k;
        }
        if prev >= self.upper && !self.internal.is_empty() {
            return Err(Error::InvalidKnots(format!(
                "internal knot {prev} is not below the upper boundary {}",
                self.upper
            )));
        }
        Ok(())
    }

    /// Lower boundary, internal knots, upper boundary.
    pub fn all(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.internal.len() + 2);
        v.push(self.lower);
        v.extend(&self.internal);
        v.push(self.upper);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    MSpline,
    ISpline,
    BSpline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineConfig {
    pub degree: usize,
    pub knots: KnotVector,
    pub basis_kind: BasisKind,
}

impl SplineConfig {
    pub fn n_basis(&self) -> usize {
        self.knots.internal.len() + self.degree + 1
    }
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Boundaries at the smallest entry time and the largest observed time;
/// internal knots at equally spaced percentiles of the event times.
pub fn default_knots(
    uncensored_times: &[f64],
    n_internal: usize,
    entry_times: &[f64],
    all_times: &[f64],
) -> Result<KnotVector> {
    if n_internal > 0 && uncensored_times.is_empty() {
        return Err(Error::EmptyUncensoredSet);
    }
    let lower = entry_times.iter().copied().fold(f64::INFINITY, f64::min);
    let lower = if lower.is_finite() { lower.max(0.0) } else { 0.0 };
    let upper = all_times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted = uncensored_times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let internal = (1..=n_internal)
        .map(|j| quantile_sorted(&sorted, j as f64 / (n_internal + 1) as f64))
        .collect();
    KnotVector::new(lower, internal, upper)
}

/// Precomputed clamped knot sequence with basis evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    knots: KnotVector,
    seq: Vec<f64>,
    // degree + 1 basis on a sequence with one more boundary copy each side
    seq_up: Vec<f64>,
}

impl SplineBasis {
    pub fn new(degree: usize, knots: KnotVector) -> Result<Self> {
        knots.validate()?;
        let mut seq = vec![knots.lower; degree + 1];
        seq.extend(&knots.internal);
        seq.extend(std::iter::repeat_n(knots.upper, degree + 1));
        let mut seq_up = Vec::with_capacity(seq.len() + 2);
        seq_up.push(knots.lower);
        seq_up.extend(&seq);
        seq_up.push(knots.upper);
        Ok(SplineBasis {
            degree,
            knots,
            seq,
            seq_up,
        })
    }

    pub fn from_config(cfg: &SplineConfig) -> Result<Self> {
        Self::new(cfg.degree, cfg.knots.clone())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.knots.internal.len() + self.degree + 1
    }

    pub fn lower(&self) -> f64 {
        self.knots.lower
    }

    pub fn upper(&self) -> f64 {
        self.knots.upper
    }

    fn clamp(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < self.knots.lower - EDGE_TOL || t > self.knots.upper + EDGE_TOL {
            return Err(Error::OutOfSupport(t));
        }
        Ok(t.clamp(self.knots.lower, self.knots.upper))
    }

    /// B-spline values at `t`.
    pub fn bspline(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.clamp(t)?;
        let mut out = vec![0.0; self.n_basis()];
        let (span, vals) = nonzero_basis(&self.seq, self.degree, t);
        for (j, v) in vals.into_iter().enumerate() {
            out[span - self.degree + j] = v;
        }
        Ok(out)
    }

    /// M-spline values: B-splines scaled to integrate to one.
    pub fn mspline(&self, t: f64) -> Result<Vec<f64>> {
        let mut b = self.bspline(t)?;
        let k = self.degree + 1;
        for (l, v) in b.iter_mut().enumerate() {
            if *v != 0.0 {
                *v *= k as f64 / (self.seq[l + k] - self.seq[l]);
            }
        }
        Ok(b)
    }

    /// I-spline values, the integrals of the M-splines from the lower boundary.
    pub fn ispline(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.clamp(t)?;
        let n = self.n_basis();
        let p = self.degree + 1;
        let (span, vals) = nonzero_basis(&self.seq_up, p, t);
        let mut upper_basis = vec![0.0; n + 1];
        for (j, v) in vals.into_iter().enumerate() {
            upper_basis[span - p + j] = v;
        }
        // I_l = Σ_{j > l} B_{j, δ+1}; suffix sums from the right. Terms whose
        // sum covers every nonzero basis function are exactly 1, which keeps
        // each I_l monotone under rounding.
        let mut out = vec![1.0; n];
        let mut acc = 0.0;
        for l in (span - p..n).rev() {
            acc += upper_basis[l + 1];
            out[l] = acc.min(1.0);
        }
        Ok(out)
    }

    pub fn eval(&self, kind: BasisKind, t: f64) -> Result<Vec<f64>> {
        match kind {
            BasisKind::BSpline => self.bspline(t),
            BasisKind::MSpline => self.mspline(t),
            BasisKind::ISpline => self.ispline(t),
        }
    }
}

/// Knot span index `i` with `seq[i] ≤ t < seq[i+1]` (closed on the right at
/// the upper boundary) and the `degree + 1` basis values that are nonzero there.
fn nonzero_basis(seq: &[f64], degree: usize, t: f64) -> (usize, Vec<f64>) {
    let n = seq.len() - degree - 1;
    let span = if t >= seq[n] {
        (degree..n).rev().find(|&i| seq[i] < seq[i + 1]).unwrap_or(n - 1)
    } else {
        // largest i in [degree, n-1] with seq[i] <= t
        let mut lo = degree;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if seq[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let mut vals = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    vals[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - seq[span + 1 - j];
        right[j] = seq[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { vals[r] / denom } else { 0.0 };
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    (span, vals)
}

pub fn bspline_eval(t: f64, cfg: &SplineConfig) -> Result<Vec<f64>> {
    SplineBasis::from_config(cfg)?.bspline(t)
}

pub fn mspline_eval(t: f64, cfg: &SplineConfig) -> Result<Vec<f64>> {
    SplineBasis::from_config(cfg)?.mspline(t)
}

pub fn ispline_eval(t: f64, cfg: &SplineConfig) -> Result<Vec<f64>> {
    SplineBasis::from_config(cfg)?.ispline(t)
}
