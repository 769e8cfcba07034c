//! Hazard-scale baselines with `h(t) = h0(t)·exp(η)`.

use crate::error::{Error, Result};
use crate::spline::SplineBasis;

#[derive(Debug, Clone, PartialEq)]
pub enum HazardFamily {
    Exponential,
    Weibull { shape: f64 },
    Gompertz { scale: f64 },
    /// Simplex coefficients over the full M-spline basis.
    MSpline { coefs: Vec<f64>, basis: SplineBasis },
    /// Log-hazard coefficients over the B-spline basis minus its first column.
    BSpline { coefs: Vec<f64>, basis: SplineBasis },
}

/// `log(expm1(x))` without overflow.
pub fn log_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `log(1 - exp(-x))` for `x > 0`.
pub fn log1m_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

pub fn weibull_log_h0(shape: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if shape > 1.0 {
            f64::NEG_INFINITY
        } else if shape < 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    shape.ln() + (shape - 1.0) * t.ln()
}

/// Gompertz cumulative baseline hazard `expm1(γt)/γ` and its derivative in γ.
pub fn gompertz_cum_h0(scale: f64, t: f64) -> (f64, f64) {
    let gt = scale * t;
    let em1 = gt.exp_m1();
    let h = em1 / scale;
    let dh = (t * gt.exp() - h) / scale;
    (h, dh)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::DomainError(format!("time {t} must be non-negative")));
    }
    Ok(())
}

fn check_support(basis: &SplineBasis, t: f64) -> Result<()> {
    if t > basis.upper() + 1e-12 {
        return Err(Error::OutOfSupport(t));
    }
    Ok(())
}

impl HazardFamily {
    /// Validate auxiliary parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DomainError(m.to_string()));
        match self {
            HazardFamily::Weibull { shape } if !(*shape > 0.0 && shape.is_finite()) => bad("Weibull shape must be positive"),
            HazardFamily::Gompertz { scale } if !(*scale > 0.0 && scale.is_finite()) => bad("Gompertz scale must be positive"),
            HazardFamily::MSpline { coefs, basis } => {
                if coefs.len() != basis.n_basis() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} M-spline coefficients for {} basis terms",
                        coefs.len(),
                        basis.n_basis()
                    )));
                }
                let sum: f64 = coefs.iter().sum();
                if coefs.iter().any(|&c| c < 0.0) || (sum - 1.0).abs() > 1e-8 {
                    return Err(Error::InvalidSimplex);
                }
                Ok(())
            }
            HazardFamily::BSpline { coefs, basis } if coefs.len() + 1 != basis.n_basis() => {
                Err(Error::DimensionMismatch(format!(
                    "{} B-spline coefficients for {} basis terms",
                    coefs.len(),
                    basis.n_basis()
                )))
            }
            _ => Ok(()),
        }
    }

    /// `log h0(t)`.
    pub fn log_baseline_hazard(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            HazardFamily::Exponential => 0.0,
            HazardFamily::Weibull { shape } => weibull_log_h0(*shape, t),
            HazardFamily::Gompertz { scale } => scale * t,
            HazardFamily::MSpline { coefs, basis } => {
                check_support(basis, t)?;
                if t < basis.lower() {
                    return Ok(f64::NEG_INFINITY);
                }
                let m = basis.mspline(t)?;
                dot(coefs, &m).ln()
            }
            HazardFamily::BSpline { coefs, basis } => {
                check_support(basis, t)?;
                let b = basis.bspline(t.max(basis.lower()))?;
                dot(coefs, &b[1..])
            }
        })
    }

    /// `H0(t)`, closed form only.
    pub fn cumulative_baseline_hazard(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            HazardFamily::Exponential => t,
            HazardFamily::Weibull { shape } => t.powf(*shape),
            HazardFamily::Gompertz { scale } => gompertz_cum_h0(*scale, t).0,
            HazardFamily::MSpline { coefs, basis } => {
                check_support(basis, t)?;
                if t < basis.lower() {
                    return Ok(0.0);
                }
                dot(coefs, &basis.ispline(t)?)
            }
            HazardFamily::BSpline { .. } => return Err(Error::AnalyticFormUnavailable),
        })
    }

    pub fn log_hazard(&self, t: f64, eta: f64) -> Result<f64> {
        Ok(self.log_baseline_hazard(t)? + eta)
    }

    pub fn log_cumulative_hazard(&self, t: f64, eta: f64) -> Result<f64> {
        let lh0 = match self {
            HazardFamily::Gompertz { scale } => {
                check_time(t)?;
                log_expm1(scale * t) - scale.ln()
            }
            HazardFamily::Weibull { shape } => {
                check_time(t)?;
                shape * t.ln()
            }
            _ => self.cumulative_baseline_hazard(t)?.ln(),
        };
        Ok(lh0 + eta)
    }

    pub fn log_survival(&self, t: f64, eta: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(-self.log_cumulative_hazard(t, eta)?.exp())
    }

    /// `log(S(a) − S(b))` for `a < b`.
    pub fn log_interval_probability(&self, a: f64, b: f64, eta: f64) -> Result<f64> {
        let ha = self.cumulative_baseline_hazard(a)? * eta.exp();
        let hb = self.cumulative_baseline_hazard(b)? * eta.exp();
        let v = -ha + log1m_exp_neg(hb - ha);
        if !(hb > ha) || !v.is_finite() {
            return Err(Error::NonPositiveMass);
        }
        Ok(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_panels, make_rule};
    use crate::spline::KnotVector;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn mspline_family() -> HazardFamily {
        let basis = SplineBasis::new(3, KnotVector::new(0.0, vec![2.0, 4.0], 8.0).unwrap()).unwrap();
        HazardFamily::MSpline {
            coefs: vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2],
            basis,
        }
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(HazardFamily::Exponential.log_hazard(5.0, 0.0).unwrap(), 0.0);
        let w2 = HazardFamily::Weibull { shape: 2.0 };
        assert!(close(w2.log_hazard(3.0, 0.0).unwrap(), 6f64.ln(), 1e-15));
        assert!(close(HazardFamily::Exponential.log_cumulative_hazard(2.0, 0.0).unwrap(), 2f64.ln(), 1e-15));
        let g1 = HazardFamily::Gompertz { scale: 1.0 };
        assert!(close(g1.log_cumulative_hazard(1.0, 0.0).unwrap(), 0.541_324_854_612_918_1, 1e-15));
        assert!(close(HazardFamily::Exponential.log_survival(1.0, 0.0).unwrap(), -1.0, 1e-15));
        assert!(close(w2.log_survival(2.0, 0.5f64.ln()).unwrap(), -2.0, 1e-15));
        let ip = HazardFamily::Exponential.log_interval_probability(1.0, 2.0, 0.0).unwrap();
        let want = ((-1f64).exp() - (-2f64).exp()).ln();
        assert!(close(ip, want, 1e-14));
        assert!(close(want, -1.458_675_145_387_081_9, 1e-15));
    }

    #[test]
    fn mspline_upper_boundary_cumhaz_is_one() {
        assert!(mspline_family().log_cumulative_hazard(8.0, 0.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn interval_edge_cases() {
        let w = HazardFamily::Weibull { shape: 1.7 };
        let far = w.log_interval_probability(1.0, 1e3, 0.2).unwrap();
        assert!(close(far, w.log_survival(1.0, 0.2).unwrap(), 1e-12));
        assert!(matches!(
            w.log_interval_probability(1.0, 1.0 + 1e-300, 0.0),
            Err(Error::NonPositiveMass)
        ));
    }

    #[test]
    fn weibull_at_zero_and_negative_time() {
        assert_eq!(HazardFamily::Weibull { shape: 2.0 }.log_hazard(0.0, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(HazardFamily::Weibull { shape: 0.5 }.log_hazard(0.0, 0.0).unwrap(), f64::INFINITY);
        assert!(HazardFamily::Weibull { shape: 2.0 }.log_hazard(-1.0, 0.0).is_err());
    }

    #[test]
    fn bspline_has_no_closed_form() {
        let basis = SplineBasis::new(3, KnotVector::new(0.0, vec![2.0], 5.0).unwrap()).unwrap();
        let f = HazardFamily::BSpline {
            coefs: vec![0.1; 4],
            basis,
        };
        assert!(matches!(f.log_cumulative_hazard(1.0, 0.0), Err(Error::AnalyticFormUnavailable)));
        assert!(f.log_hazard(1.0, 0.0).is_ok());
        assert!(matches!(f.log_hazard(6.0, 0.0), Err(Error::OutOfSupport(_))));
    }

    #[test]
    fn gompertz_large_argument_is_finite() {
        let g = HazardFamily::Gompertz { scale: 2.0 };
        let v = g.log_cumulative_hazard(400.0, 0.0).unwrap();
        assert!(close(v, 800.0 - 2f64.ln(), 1e-14));
    }

    #[test]
    fn single_term_mspline_is_exponential_shifted() {
        let b = 3.0;
        let basis = SplineBasis::new(0, KnotVector::new(0.0, vec![], b).unwrap()).unwrap();
        let m = HazardFamily::MSpline { coefs: vec![1.0], basis };
        for &t in &[0.2, 1.0, 2.9] {
            let want = HazardFamily::Exponential.log_survival(t, 0.4 - b.ln()).unwrap();
            assert!(close(m.log_survival(t, 0.4).unwrap(), want, 1e-14));
        }
    }

    #[test]
    fn mspline_cumhaz_matches_quadrature() {
        let f = mspline_family();
        let rule = make_rule(15).unwrap();
        let HazardFamily::MSpline { basis, .. } = &f else { unreachable!() };
        let knots = basis.knots().all();
        for &t in &[0.3, 1.9, 2.0, 4.5, 8.0] {
            let q = integrate_panels(&rule, |u| f.log_hazard(u, 0.0).unwrap().exp(), t, &knots, false);
            let c = f.cumulative_baseline_hazard(t).unwrap();
            assert!(((q - c) / c).abs() < 1e-8);
        }
    }

    #[test]
    fn validation() {
        assert!(HazardFamily::Weibull { shape: -1.0 }.validate().is_err());
        let HazardFamily::MSpline { basis, .. } = mspline_family() else { unreachable!() };
        assert!(HazardFamily::MSpline { coefs: vec![0.5; 6], basis }.validate().is_err());
        assert!(mspline_family().validate().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn analytic() -> impl Strategy<Value = HazardFamily> {
            prop_oneof![
                Just(HazardFamily::Exponential),
                (0.3f64..3.0).prop_map(|shape| HazardFamily::Weibull { shape }),
                (0.05f64..2.0).prop_map(|scale| HazardFamily::Gompertz { scale }),
                Just(mspline_family()),
            ]
        }

        proptest! {
            #[test]
            fn hazard_is_derivative_of_cumhaz(f in analytic(), t in 0.2f64..7.5, eta in -2.0f64..2.0) {
                let h = 1e-6 * t;
                let lp = -f.log_survival(t + h, eta).unwrap();
                let lm = -f.log_survival(t - h, eta).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let haz = f.log_hazard(t, eta).unwrap().exp();
                prop_assert!((fd - haz).abs() <= 1e-6 * haz.max(1e-3), "fd {} haz {}", fd, haz);
                prop_assert!(f.log_survival(t, eta).unwrap() <= 0.0);
            }

            #[test]
            fn unit_shape_weibull_is_exponential(t in 1e-3f64..50.0, eta in -3.0f64..3.0) {
                let w = HazardFamily::Weibull { shape: 1.0 };
                let e = HazardFamily::Exponential;
                prop_assert!((w.log_hazard(t, eta).unwrap() - e.log_hazard(t, eta).unwrap()).abs() < 1e-12);
                prop_assert!((w.log_survival(t, eta).unwrap() - e.log_survival(t, eta).unwrap()).abs() <= 1e-12 * (1.0 + e.log_survival(t, eta).unwrap().abs()));
            }
        }
    }
}
