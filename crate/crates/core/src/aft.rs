//! Accelerated failure time baselines: `S(t) = S0(t·exp(-η))`, or
//! `S0(∫_0^t exp(-η(u)) du)` when η varies with time.

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_panels, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AftFamily {
    ExponentialAft,
    WeibullAft { shape: f64 },
}

impl AftFamily {
    fn shape(self) -> f64 {
        match self {
            AftFamily::ExponentialAft => 1.0,
            AftFamily::WeibullAft { shape } => shape,
        }
    }

    pub fn validate(self) -> Result<()> {
        let g = self.shape();
        if g > 0.0 && g.is_finite() {
            Ok(())
        } else {
            Err(Error::DomainError(format!("Weibull shape {g} must be positive")))
        }
    }
}

pub fn aft_log_survival(fam: AftFamily, t: f64, eta: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::DomainError(format!("time {t} must be non-negative")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let g = fam.shape();
    Ok(-(g * (t.ln() - eta)).exp())
}

pub fn aft_log_hazard(fam: AftFamily, t: f64, eta: f64) -> Result<f64> {
    match fam {
        AftFamily::ExponentialAft => Ok(-eta),
        AftFamily::WeibullAft { shape } => {
            if !(t > 0.0) && shape != 1.0 {
                return Err(Error::DomainError(format!("time {t} must be positive")));
            }
            Ok(shape.ln() + (shape - 1.0) * t.ln() - shape * eta)
        }
    }
}

/// `∫_0^t exp(-η(u)) du` with a single Gauss–Kronrod panel.
pub fn cumulative_acceleration<F: FnMut(f64) -> f64>(mut eta_fn: F, t: f64, quad: &QuadratureRule) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::DomainError(format!("time {t} must be positive")));
    }
    integrate(quad, |u| (-eta_fn(u)).exp(), t)
}

/// As [`cumulative_acceleration`], split at the knots of a spline η.
pub fn cumulative_acceleration_panels<F: FnMut(f64) -> f64>(
    mut eta_fn: F,
    t: f64,
    quad: &QuadratureRule,
    breakpoints: &[f64],
) -> f64 {
    integrate_panels(quad, |u| (-eta_fn(u)).exp(), t, breakpoints, false)
}

pub fn aft_tve_log_survival(fam: AftFamily, cum_accel: f64) -> f64 {
    if cum_accel == 0.0 {
        return 0.0;
    }
    -cum_accel.powf(fam.shape())
}

pub fn aft_tve_log_hazard(fam: AftFamily, eta_at_t: f64, cum_accel: f64) -> f64 {
    match fam {
        AftFamily::ExponentialAft => -eta_at_t,
        AftFamily::WeibullAft { shape } => -eta_at_t + shape.ln() + (shape - 1.0) * cum_accel.ln(),
    }
}

/// Hazard-scale family whose coefficients map onto AFT coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappableFamily {
    Exponential,
    Weibull,
    Gompertz,
}

/// `β* = −β/γ` (γ = 1 for the exponential), intercept included.
pub fn ph_to_aft_coefficients(family: MappableFamily, beta_ph: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let g = match family {
        MappableFamily::Exponential => 1.0,
        MappableFamily::Weibull => gamma,
        MappableFamily::Gompertz => return Err(Error::UnsupportedFamily("Gompertz has no AFT form".into())),
    };
    Ok(beta_ph.iter().map(|b| -b / g).collect())
}

/// `β = −γβ*`.
pub fn aft_to_ph_coefficients(family: MappableFamily, beta_aft: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let g = match family {
        MappableFamily::Exponential => 1.0,
        MappableFamily::Weibull => gamma,
        MappableFamily::Gompertz => return Err(Error::UnsupportedFamily("Gompertz has no AFT form".into())),
    };
    Ok(beta_aft.iter().map(|b| -g * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::HazardFamily;
    use crate::quadrature::make_rule;
    use crate::spline::{KnotVector, SplineBasis};
    use AftFamily::*;

    #[test]
    fn closed_forms() {
        assert_eq!(aft_log_survival(ExponentialAft, 1.0, 0.0).unwrap(), -1.0);
        let v = aft_log_survival(WeibullAft { shape: 2.0 }, 1.0, 0.5).unwrap();
        assert!((v + (-1f64).exp()).abs() < 1e-15);
        assert_eq!(aft_log_hazard(ExponentialAft, 9.0, 0.7).unwrap(), -0.7);
        assert!((aft_log_hazard(WeibullAft { shape: 2.0 }, 3.0, 0.0).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert!(aft_log_survival(ExponentialAft, -1.0, 0.0).is_err());
    }

    #[test]
    fn tve_forms() {
        assert_eq!(aft_tve_log_survival(ExponentialAft, 2.0), -2.0);
        assert_eq!(aft_tve_log_survival(WeibullAft { shape: 2.0 }, 3.0), -9.0);
        assert_eq!(aft_tve_log_survival(WeibullAft { shape: 2.0 }, 0.0), 0.0);
        assert_eq!(aft_tve_log_hazard(ExponentialAft, 0.3, 5.0), -0.3);
        let t: f64 = 2.7;
        let v = aft_tve_log_hazard(WeibullAft { shape: 1.5 }, 0.0, t);
        assert!((v - (1.5 * t.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn cumulative_acceleration_examples() {
        let r = make_rule(15).unwrap();
        assert!((cumulative_acceleration(|_| 0.0, 4.0, &r).unwrap() - 4.0).abs() < 1e-14);
        let v = cumulative_acceleration(|u| u, 1.0, &r).unwrap();
        assert!((v - (1.0 - (-1f64).exp())).abs() < 1e-14);
    }

    fn trapezoid<F: Fn(f64) -> f64>(f: F, t: f64, n: usize) -> f64 {
        // Richardson-extrapolated trapezoid on a fine grid
        let trap = |n: usize| {
            let h = t / n as f64;
            let mut s = 0.5 * (f(0.0) + f(t));
            for i in 1..n {
                s += f(i as f64 * h);
            }
            s * h
        };
        (4.0 * trap(2 * n) - trap(n)) / 3.0
    }

    #[test]
    fn spline_eta_matches_fine_grid_oracle() {
        let r = make_rule(15).unwrap();
        let basis = SplineBasis::new(3, KnotVector::new(0.0, vec![0.8, 1.3], 2.0).unwrap()).unwrap();
        let theta = [0.4, -0.7, 0.2, 0.9, -0.3];
        let eta = |u: f64| {
            let b = basis.bspline(u).unwrap();
            0.25 + b[1..].iter().zip(&theta).map(|(x, c)| x * c).sum::<f64>()
        };
        let want = trapezoid(|u| (-eta(u)).exp(), 2.0, 20_000);
        let got = cumulative_acceleration_panels(eta, 2.0, &r, &basis.knots().all());
        assert!(((got - want) / want).abs() < 1e-8);
    }

    #[test]
    fn tve_hazard_follows_history() {
        // η(u) steps from 0 to 1 at u = 1: fine-grid derivative of −log S.
        let r = make_rule(15).unwrap();
        let fam = WeibullAft { shape: 1.3 };
        let eta = |u: f64| if u < 1.0 { 0.0 } else { 1.0 };
        let log_s = |t: f64| aft_tve_log_survival(fam, cumulative_acceleration_panels(eta, t, &r, &[1.0]));
        let t = 2.0;
        let h = 1e-5;
        let fd = -(log_s(t + h) - log_s(t - h)) / (2.0 * h);
        let lam = cumulative_acceleration_panels(eta, t, &r, &[1.0]);
        let haz = aft_tve_log_hazard(fam, eta(t), lam).exp();
        assert!(((fd - haz) / haz).abs() < 1e-8);
    }

    #[test]
    fn coefficient_mapping() {
        assert_eq!(ph_to_aft_coefficients(MappableFamily::Exponential, &[0.3], 1.0).unwrap(), vec![-0.3]);
        assert_eq!(ph_to_aft_coefficients(MappableFamily::Weibull, &[-1.0], 2.0).unwrap(), vec![0.5]);
        let back = aft_to_ph_coefficients(MappableFamily::Weibull, &[0.5, -0.25], 2.0).unwrap();
        assert_eq!(back, vec![-1.0, 0.5]);
        assert!(ph_to_aft_coefficients(MappableFamily::Gompertz, &[1.0], 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn constant_eta_reduces_to_closed_form(g in 0.3f64..3.0, eta in -2.0f64..2.0, t in 0.01f64..20.0) {
                let r = make_rule(15).unwrap();
                let fam = WeibullAft { shape: g };
                let lam = cumulative_acceleration(|_| eta, t, &r).unwrap();
                let a = aft_tve_log_survival(fam, lam);
                let b = aft_log_survival(fam, t, eta).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
                let ha = aft_tve_log_hazard(fam, eta, lam);
                let hb = aft_log_hazard(fam, t, eta).unwrap();
                prop_assert!((ha - hb).abs() <= 1e-10 * (1.0 + hb.abs()));
            }

            #[test]
            fn exponential_aft_is_ph_with_negated_eta(eta in -3.0f64..3.0, t in 0.01f64..30.0) {
                let a = aft_log_survival(ExponentialAft, t, eta).unwrap();
                let p = HazardFamily::Exponential.log_survival(t, -eta).unwrap();
                prop_assert!((a - p).abs() <= 1e-12 * (1.0 + a.abs()));
            }

            #[test]
            fn weibull_aft_is_ph_with_mapped_eta(g in 0.3f64..3.0, eta in -3.0f64..3.0, t in 0.01f64..30.0) {
                let a = aft_log_survival(WeibullAft { shape: g }, t, eta).unwrap();
                let p = HazardFamily::Weibull { shape: g }.log_survival(t, -g * eta).unwrap();
                prop_assert!((a - p).abs() <= 1e-12 * (1.0 + a.abs()));
                let ha = aft_log_hazard(WeibullAft { shape: g }, t, eta).unwrap();
                let hp = HazardFamily::Weibull { shape: g }.log_hazard(t, -g * eta).unwrap();
                prop_assert!((ha - hp).abs() <= 1e-12 * (1.0 + ha.abs()));
            }

            #[test]
            fn hazard_consistency_by_finite_differences(g in 0.3f64..3.0, eta in -2.0f64..2.0, t in 0.1f64..10.0) {
                let fam = WeibullAft { shape: g };
                let h = 1e-6 * t;
                let fd = -(aft_log_survival(fam, t + h, eta).unwrap() - aft_log_survival(fam, t - h, eta).unwrap()) / (2.0 * h);
                let haz = aft_log_hazard(fam, t, eta).unwrap().exp();
                prop_assert!((fd / haz - 1.0).abs() < 1e-6);
            }

            #[test]
            fn mapping_round_trip(b in prop::collection::vec(-5.0f64..5.0, 1..6), g in 0.2f64..4.0) {
                let a = ph_to_aft_coefficients(MappableFamily::Weibull, &b, g).unwrap();
                let back = aft_to_ph_coefficients(MappableFamily::Weibull, &a, g).unwrap();
                for (x, y) in b.iter().zip(&back) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                // survival time ratio and acceleration factor are reciprocals
                for x in &a {
                    prop_assert!((x.exp() * (-x).exp() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
