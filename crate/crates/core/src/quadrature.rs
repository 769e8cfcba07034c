//! Fixed-order Gauss–Kronrod rules on `[0, T]`.
//!
//! [`integrate`] applies one rule over the whole interval. [`NodePlan`]
//! splits the interval at known breakpoints of the integrand (spline knots)
//! and can map the first panel through `u = a·s⁶`, which turns a `u^(γ-1)`
//! singularity at the origin into the much smoother `s^(6γ-1)`. The plan depends only on the interval and the
//! breakpoints, so its nodes can be computed once per observation.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const ORIGIN_GRADING: i32 = 6;

// Non-negative half of each rule: (abscissa, weight), abscissa ascending.
const GK7: [(f64, f64); 4] = [
    (0.0, 0.450_916_538_658_474_142_345_110_087_045_57),
    (
        0.434_243_749_346_802_558_002_071_502_844_63,
        0.401_397_414_775_962_222_905_051_818_618_43,
    ),
    (
        0.774_596_669_241_483_377_035_853_079_956_48,
        0.268_488_089_868_333_440_728_569_280_666_71,
    ),
    (
        0.960_491_268_708_020_283_423_507_092_629_08,
        0.104_656_226_026_467_265_193_823_857_192_07,
    ),
];

const GK11: [(f64, f64); 6] = [
    (0.0, 0.282_987_417_857_491_213_204_255_601_371_11),
    (
        0.279_630_413_161_783_193_413_466_522_748_98,
        0.272_849_801_912_558_922_340_993_264_484_46,
    ),
    (
        0.538_469_310_105_683_091_036_314_420_700_21,
        0.241_040_339_228_647_586_699_942_611_223_26,
    ),
    (
        0.754_166_726_570_849_220_440_817_166_946_12,
        0.186_800_796_556_492_657_467_800_026_878_49,
    ),
    (
        0.906_179_845_938_663_992_797_626_878_299_39,
        0.115_233_316_622_473_394_024_626_845_880_57,
    ),
    (
        0.984_085_360_094_842_464_496_172_934_636_14,
        0.042_582_036_751_081_832_864_509_450_847_67,
    ),
];

const GK15: [(f64, f64); 8] = [
    (0.0, 0.209_482_141_084_727_828_012_999_174_891_71),
    (
        0.207_784_955_007_898_467_600_689_403_773_24,
        0.204_432_940_075_298_892_414_161_999_234_65,
    ),
    (
        0.405_845_151_377_397_166_906_606_412_076_96,
        0.190_350_578_064_785_409_913_256_402_421_01,
    ),
    (
        0.586_087_235_467_691_130_294_144_838_258_73,
        0.169_004_726_639_267_902_826_583_426_598_55,
    ),
    (
        0.741_531_185_599_394_439_863_864_773_280_79,
        0.140_653_259_715_525_918_745_189_590_510_24,
    ),
    (
        0.864_864_423_359_769_072_789_712_788_640_93,
        0.104_790_010_322_250_183_839_876_322_541_52,
    ),
    (
        0.949_107_912_342_758_524_526_189_684_047_85,
        0.063_092_092_629_978_553_290_700_663_189_204,
    ),
    (
        0.991_455_371_120_812_639_206_854_697_526_33,
        0.022_935_322_010_529_224_963_732_008_058_97,
    ),
];

/// Standardised abscissae and weights of a Kronrod rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Tabulated rule of order 7, 11 or 15.
pub fn make_rule(order: usize) -> Result<QuadratureRule> {
    let half: &[(f64, f64)] = match order {
        7 => &GK7,
        11 => &GK11,
        15 => &GK15,
        _ => return Err(Error::UnsupportedOrder(order)),
    };
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for &(v, w) in half.iter().skip(1).rev() {
        nodes.push(-v);
        weights.push(w);
    }
    for &(v, w) in half {
        nodes.push(v);
        weights.push(w);
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
    })
}

/// `(T/2) Σ w_q f((T/2)(1 + v_q))`.
pub fn integrate<F: FnMut(f64) -> f64>(rule: &QuadratureRule, mut f: F, upper: f64) -> Result<f64> {
    let half = 0.5 * upper;
    let mut acc = 0.0;
    for (q, (&v, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let y = f(half * (1.0 + v));
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand(q));
        }
        acc += w * y;
    }
    Ok(half * acc)
}

/// Absolute node times and weights such that `∫_0^T f ≈ Σ w_i f(t_i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodePlan {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NodePlan {
    /// Panels `[0, b_1], [b_1, b_2], …, [b_k, T]` for the breakpoints strictly
    /// inside `(0, T)`. With `singular_origin`, the first panel uses `u = a·s⁶`.
    pub fn new(rule: &QuadratureRule, upper: f64, breakpoints: &[f64], singular_origin: bool) -> Self {
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < upper)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(upper);

        let mut plan = NodePlan {
            times: Vec::with_capacity(rule.order * cuts.len()),
            weights: Vec::with_capacity(rule.order * cuts.len()),
        };
        let mut lo = 0.0;
        for (k, &hi) in cuts.iter().enumerate() {
            if k == 0 && singular_origin {
                // ∫_0^a f(u) du = ∫_0^1 f(a s^k) k a s^(k-1) ds
                let k = ORIGIN_GRADING;
                for (&v, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let s = 0.5 * (1.0 + v);
                    plan.times.push(hi * s.powi(k));
                    plan.weights.push(0.5 * w * hi * k as f64 * s.powi(k - 1));
                }
            } else {
                let half = 0.5 * (hi - lo);
                for (&v, &w) in rule.nodes.iter().zip(&rule.weights) {
                    plan.times.push(lo + half * (1.0 + v));
                    plan.weights.push(w * half);
                }
            }
            lo = hi;
        }
        plan
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.times
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Integral over `[0, upper]` using a [`NodePlan`].
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    rule: &QuadratureRule,
    f: F,
    upper: f64,
    breakpoints: &[f64],
    singular_origin: bool,
) -> f64 {
    NodePlan::new(rule, upper, breakpoints, singular_origin).apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre(n: usize, x: f64) -> (f64, f64) {
        // value and derivative
        let (mut p0, mut p1) = (1.0, x);
        if n == 0 {
            return (1.0, 0.0);
        }
        for k in 2..=n {
            let k = k as f64;
            let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        let n = n as f64;
        (p1, n * (x * p1 - p0) / (x * x - 1.0))
    }

    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for k in 1..=n {
            let nf = n as f64;
            let mut x = (std::f64::consts::PI * (k as f64 - 0.25) / (nf + 0.5)).cos()
                * (1.0 - 1.0 / (8.0 * nf * nf));
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            xs.push(x);
            ws.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        (xs, ws)
    }

    fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, piv);
            b.swap(c, piv);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    /// Kronrod extension of the n-point Gauss rule, computed from scratch:
    /// Stieltjes polynomial in the Legendre basis, roots by bisection between
    /// Gauss nodes, weights from exactness on P_0..P_{2n}.
    fn kronrod_oracle(n: usize) -> (Vec<f64>, Vec<f64>) {
        let (gx, gw) = gauss_legendre(30);
        let integ = |f: &dyn Fn(f64) -> f64| -> f64 { gx.iter().zip(&gw).map(|(&x, &w)| w * f(x)).sum() };
        // E = P_{n+1} + Σ_{k≤n} c_k P_k, with ∫ P_n E P_j = 0 for j ≤ n
        let m = n + 1;
        let mut a = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for j in 0..m {
            for k in 0..m {
                a[j][k] = integ(&|x| legendre(n, x).0 * legendre(k, x).0 * legendre(j, x).0);
            }
            rhs[j] = -integ(&|x| legendre(n, x).0 * legendre(n + 1, x).0 * legendre(j, x).0);
        }
        let c = solve(a, rhs);
        let e = |x: f64| legendre(n + 1, x).0 + (0..m).map(|k| c[k] * legendre(k, x).0).sum::<f64>();

        let (mut gauss, _) = gauss_legendre(n);
        gauss.sort_by(f64::total_cmp);
        let mut brackets = vec![-1.0];
        brackets.extend(&gauss);
        brackets.push(1.0);
        let mut nodes = gauss.clone();
        for w in brackets.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let flo = e(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (e(mid) > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        nodes.sort_by(f64::total_cmp);
        let k = nodes.len();
        let a: Vec<Vec<f64>> = (0..k)
            .map(|d| nodes.iter().map(|&x| legendre(d, x).0).collect())
            .collect();
        let mut b = vec![0.0; k];
        b[0] = 2.0;
        let w = solve(a, b);
        (nodes, w)
    }

    #[test]
    fn tables_match_independent_kronrod_extension() {
        for (order, n) in [(7, 3), (11, 5), (15, 7)] {
            let rule = make_rule(order).unwrap();
            let (nodes, weights) = kronrod_oracle(n);
            for q in 0..order {
                assert!((rule.nodes[q] - nodes[q]).abs() < 1e-12, "order {order} node {q}");
                assert!((rule.weights[q] - weights[q]).abs() < 1e-12, "order {order} weight {q}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        for order in [7, 11, 15] {
            let r = make_rule(order).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for q in 0..order {
                assert_eq!(r.nodes[q], -r.nodes[order - 1 - q]);
            }
            let odd: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x).sum();
            assert!(odd.abs() < 1e-14);
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(make_rule(21), Err(Error::UnsupportedOrder(21))));
    }

    #[test]
    fn constants_and_polynomials() {
        let r = make_rule(15).unwrap();
        assert!((integrate(&r, |_| 2.5, 3.0).unwrap() - 7.5).abs() < 1e-14);
        assert!((integrate(&r, |u| u * u, 2.0).unwrap() - 8.0 / 3.0).abs() < 1e-14);
        for d in 0..=22 {
            let got = integrate(&r, |u| u.powi(d), 1.0).unwrap();
            let want = 1.0 / (d as f64 + 1.0);
            assert!(((got - want) / want).abs() < 1e-12, "degree {d}");
        }
    }

    #[test]
    fn weibull_cumulative_hazard() {
        let r = make_rule(15).unwrap();
        let (g, eta, t): (f64, f64, f64) = (1.4, 0.3, 5.0);
        let h = |u: f64| g * u.powf(g - 1.0) * eta.exp();
        let want = t.powf(g) * eta.exp();
        // The unbounded derivative at 0 limits a single panel to ~1e-5.
        let single = integrate(&r, h, t).unwrap();
        assert!(((single - want) / want).abs() < 1e-4);
        let graded = integrate_panels(&r, h, t, &[], true);
        assert!(((graded - want) / want).abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = make_rule(7).unwrap();
        let e = integrate(&r, |u| if u > 0.5 { f64::NAN } else { 1.0 }, 1.0).unwrap_err();
        assert!(matches!(e, Error::NonFiniteIntegrand(_)));
    }

    #[test]
    fn panels_are_exact_for_piecewise_polynomials() {
        let r = make_rule(7).unwrap();
        let f = |u: f64| if u < 4.0 { 1.0 } else { u * u };
        let got = integrate_panels(&r, f, 10.0, &[4.0, 12.0, -1.0], false);
        let want = 4.0 + (1000.0 - 64.0) / 3.0;
        assert!((got - want).abs() < 1e-11);
    }

    #[test]
    fn singular_origin_substitution() {
        let r = make_rule(15).unwrap();
        let got = integrate_panels(&r, |u| 0.5 / u.sqrt(), 9.0, &[], true);
        assert!((got - 3.0).abs() < 1e-13);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linearity(a in -5.0f64..5.0, b in -5.0f64..5.0, t in 0.1f64..20.0) {
                let r = make_rule(15).unwrap();
                let f = |u: f64| (0.3 * u).sin();
                let g = |u: f64| (-u).exp();
                let lhs = integrate(&r, |u| a * f(u) + b * g(u), t).unwrap();
                let rhs = a * integrate(&r, f, t).unwrap() + b * integrate(&r, g, t).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }

            #[test]
            fn positivity(t in 0.01f64..50.0, c in 0.0f64..3.0) {
                let r = make_rule(11).unwrap();
                prop_assert!(integrate(&r, |u| (c * u).cos().powi(2), t).unwrap() >= 0.0);
            }
        }
    }
}
