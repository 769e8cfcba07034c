//! Linear predictor: intercept, fixed and time-varying coefficients, random effects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{SplineBasis, SplineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TveForm {
    BsplineSmooth,
    PiecewiseConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TveSpec {
    pub covariate_index: usize,
    pub form: TveForm,
    pub spline: SplineConfig,
}

impl TveSpec {
    pub fn validate(&self) -> Result<()> {
        let piecewise = self.form == TveForm::PiecewiseConstant;
        if piecewise != (self.spline.degree == 0) {
            return Err(Error::InvalidModel(
                "piecewise-constant effects require degree 0 and smooth effects degree ≥ 1".into(),
            ));
        }
        if self.n_coefs() == 0 {
            return Err(Error::InvalidModel("a degree-0 effect needs at least one internal knot".into()));
        }
        Ok(())
    }

    /// Number of deviation coefficients `θ_{p,1..L}`: the basis size minus one.
    pub fn n_coefs(&self) -> usize {
        self.spline.n_basis() - 1
    }

    pub fn basis(&self) -> Result<TveBasis> {
        self.validate()?;
        Ok(TveBasis {
            basis: SplineBasis::from_config(&self.spline)?,
        })
    }
}

/// B-spline basis with the first column dropped, constant below the lower knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TveBasis {
    basis: SplineBasis,
}

impl TveBasis {
    pub fn n_coefs(&self) -> usize {
        self.basis.n_basis() - 1
    }

    pub fn row(&self, t: f64) -> Result<Vec<f64>> {
        let mut b = self.basis.bspline(t.max(self.basis.lower()))?;
        b.remove(0);
        Ok(b)
    }

    /// Knots at which the effect changes smoothness, lower boundary included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let k = self.basis.knots();
        let mut v = vec![k.lower];
        v.extend(&k.internal);
        v
    }

    pub fn upper(&self) -> f64 {
        self.basis.upper()
    }
}

/// Coefficients on the natural (uncentered) scale.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoefficientBlock {
    pub intercept: f64,
    /// `θ_{p0}` for every covariate.
    pub beta_fixed: Vec<f64>,
    /// One vector per TVE term.
    pub theta_tve: Vec<Vec<f64>>,
    /// Per random-effect term, `b_j` for each level.
    pub random_effects: Vec<Vec<Vec<f64>>>,
}

/// Evaluates `η(t)` for a fixed model structure.
#[derive(Debug, Clone)]
pub struct LinearPredictor {
    pub n_covariates: usize,
    pub tve: Vec<(usize, TveBasis)>,
}

impl LinearPredictor {
    pub fn new(n_covariates: usize, tve_specs: &[TveSpec]) -> Result<Self> {
        let mut tve = Vec::with_capacity(tve_specs.len());
        for s in tve_specs {
            if s.covariate_index >= n_covariates {
                return Err(Error::DimensionMismatch(format!(
                    "time-varying effect on covariate {} of {n_covariates}",
                    s.covariate_index
                )));
            }
            tve.push((s.covariate_index, s.basis()?));
        }
        Ok(LinearPredictor { n_covariates, tve })
    }

    fn check(&self, coefs: &CoefficientBlock, x: &[f64]) -> Result<()> {
        if x.len() != self.n_covariates || coefs.beta_fixed.len() != self.n_covariates {
            return Err(Error::DimensionMismatch(format!(
                "{} covariates and {} coefficients for {} model covariates",
                x.len(),
                coefs.beta_fixed.len(),
                self.n_covariates
            )));
        }
        if coefs.theta_tve.len() != self.tve.len()
            || coefs.theta_tve.iter().zip(&self.tve).any(|(th, (_, b))| th.len() != b.n_coefs())
        {
            return Err(Error::DimensionMismatch("time-varying coefficient blocks".into()));
        }
        Ok(())
    }

    /// `β_p(t)` for TVE term `k`.
    pub fn time_varying_coefficient(&self, coefs: &CoefficientBlock, k: usize, t: f64) -> Result<f64> {
        let (p, basis) = &self.tve[k];
        let row = basis.row(t)?;
        Ok(coefs.beta_fixed[*p] + row.iter().zip(&coefs.theta_tve[k]).map(|(b, th)| b * th).sum::<f64>())
    }

    /// `η(t)`. `z[r]` is the design vector of random-effect term `r` and
    /// `cluster_ids[r]` its level.
    pub fn eta_at(
        &self,
        coefs: &CoefficientBlock,
        x: &[f64],
        z: &[Vec<f64>],
        cluster_ids: &[usize],
        t: f64,
    ) -> Result<f64> {
        self.check(coefs, x)?;
        if z.len() != coefs.random_effects.len() || cluster_ids.len() != z.len() {
            return Err(Error::DimensionMismatch("random-effect design".into()));
        }
        let mut eta = coefs.intercept;
        for (p, (&xp, &bp)) in x.iter().zip(&coefs.beta_fixed).enumerate() {
            if !self.tve.iter().any(|(q, _)| *q == p) {
                eta += bp * xp;
            }
        }
        for k in 0..self.tve.len() {
            eta += x[self.tve[k].0] * self.time_varying_coefficient(coefs, k, t)?;
        }
        for ((levels, zr), &j) in coefs.random_effects.iter().zip(z).zip(cluster_ids) {
            let b = levels
                .get(j)
                .ok_or_else(|| Error::DimensionMismatch(format!("cluster level {j}")))?;
            if b.len() != zr.len() {
                return Err(Error::DimensionMismatch("random-effect dimension".into()));
            }
            eta += b.iter().zip(zr).map(|(b, z)| b * z).sum::<f64>();
        }
        Ok(eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{BasisKind, KnotVector};

    fn piecewise(p: usize, knot: f64, upper: f64) -> TveSpec {
        TveSpec {
            covariate_index: p,
            form: TveForm::PiecewiseConstant,
            spline: SplineConfig {
                degree: 0,
                knots: KnotVector::new(0.0, vec![knot], upper).unwrap(),
                basis_kind: BasisKind::BSpline,
            },
        }
    }

    fn cubic(p: usize) -> TveSpec {
        TveSpec {
            covariate_index: p,
            form: TveForm::BsplineSmooth,
            spline: SplineConfig {
                degree: 3,
                knots: KnotVector::new(0.0, vec![2.0, 5.0], 10.0).unwrap(),
                basis_kind: BasisKind::BSpline,
            },
        }
    }

    #[test]
    fn fixed_effects_only() {
        let lp = LinearPredictor::new(2, &[]).unwrap();
        let c = CoefficientBlock {
            intercept: 1.0,
            beta_fixed: vec![0.5, -0.25],
            ..Default::default()
        };
        assert_eq!(lp.eta_at(&c, &[1.0, 2.0], &[], &[], 3.0).unwrap(), 1.0);
    }

    #[test]
    fn piecewise_step() {
        let lp = LinearPredictor::new(1, &[piecewise(0, 4.0, 15.0)]).unwrap();
        let c = CoefficientBlock {
            intercept: 0.0,
            beta_fixed: vec![-0.4],
            theta_tve: vec![vec![0.8]],
            random_effects: vec![],
        };
        assert!((lp.eta_at(&c, &[1.0], &[], &[], 2.0).unwrap() + 0.4).abs() < 1e-15);
        assert!((lp.eta_at(&c, &[1.0], &[], &[], 5.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((lp.time_varying_coefficient(&c, 0, 14.9).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn random_intercept_adds_level_value() {
        let lp = LinearPredictor::new(0, &[]).unwrap();
        let c = CoefficientBlock {
            intercept: 0.0,
            beta_fixed: vec![],
            theta_tve: vec![],
            random_effects: vec![vec![vec![-0.1], vec![0.42]]],
        };
        assert_eq!(lp.eta_at(&c, &[], &[vec![1.0]], &[1], 1.0).unwrap(), 0.42);
        assert!(lp.eta_at(&c, &[], &[vec![1.0]], &[2], 1.0).is_err());
    }

    #[test]
    fn validation() {
        let mut s = piecewise(0, 4.0, 15.0);
        s.form = TveForm::BsplineSmooth;
        assert!(s.validate().is_err());
        assert!(LinearPredictor::new(0, &[piecewise(0, 4.0, 15.0)]).is_err());
        assert!(matches!(
            LinearPredictor::new(1, &[piecewise(0, 4.0, 15.0)]).unwrap().eta_at(
                &CoefficientBlock { beta_fixed: vec![0.0], theta_tve: vec![vec![0.0]], ..Default::default() },
                &[1.0],
                &[],
                &[],
                16.0
            ),
            Err(Error::OutOfSupport(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn block(th: &[f64], b0: f64, beta: &[f64], re: f64) -> CoefficientBlock {
            CoefficientBlock {
                intercept: b0,
                beta_fixed: beta.to_vec(),
                theta_tve: vec![th.to_vec()],
                random_effects: vec![vec![vec![re, re * 0.5]]],
            }
        }

        proptest! {
            #[test]
            fn zero_deviation_is_constant(b0 in -2.0f64..2.0, b in prop::collection::vec(-2.0f64..2.0, 2), x in prop::collection::vec(-2.0f64..2.0, 2), t1 in 0.0f64..10.0, t2 in 0.0f64..10.0) {
                let lp = LinearPredictor::new(2, &[cubic(1)]).unwrap();
                let c = block(&[0.0; 5], b0, &b, 0.3);
                let z = [vec![1.0, x[0]]];
                prop_assert_eq!(lp.eta_at(&c, &x, &z, &[0], t1).unwrap(), lp.eta_at(&c, &x, &z, &[0], t2).unwrap());
            }

            #[test]
            fn linear_in_coefficients(a in -3.0f64..3.0, th in prop::collection::vec(-1.0f64..1.0, 5), x in prop::collection::vec(-2.0f64..2.0, 2), t in 0.0f64..10.0) {
                let lp = LinearPredictor::new(2, &[cubic(0)]).unwrap();
                let unit = block(&th, 0.7, &[0.2, -0.5], 0.4);
                let scaled = block(&th.iter().map(|v| a * v).collect::<Vec<_>>(), a * 0.7, &[a * 0.2, a * -0.5], a * 0.4);
                let z = [vec![1.0, x[1]]];
                let lhs = lp.eta_at(&scaled, &x, &z, &[0], t).unwrap();
                let rhs = a * lp.eta_at(&unit, &x, &z, &[0], t).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }

            #[test]
            fn factors_add(b1 in -2.0f64..2.0, b2 in -2.0f64..2.0, t in 0.0f64..10.0) {
                let lp = LinearPredictor::new(0, &[]).unwrap();
                let both = CoefficientBlock { random_effects: vec![vec![vec![b1]], vec![vec![b2]]], ..Default::default() };
                let only1 = CoefficientBlock { random_effects: vec![vec![vec![b1]], vec![vec![0.0]]], ..Default::default() };
                let only2 = CoefficientBlock { random_effects: vec![vec![vec![0.0]], vec![vec![b2]]], ..Default::default() };
                let z = [vec![1.0], vec![1.0]];
                let e = |c: &CoefficientBlock| lp.eta_at(c, &[], &z, &[0, 0], t).unwrap();
                prop_assert!((e(&both) - e(&only1) - e(&only2)).abs() < 1e-14);
            }
        }
    }
}
