//! Between-study heterogeneity: Cochran's Q, Higgins' I², the
//! DerSimonian-Laird and REML estimates of tau², and the multiplicative
//! overdispersion factor phi.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::effects::Study;
use crate::error::{Error, Result};

/// REML iteration stops once the update is smaller than this.
pub const REML_TOL: f64 = 1e-10;
pub const REML_MAX_ITER: usize = 1000;

/// How tau² was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau2Method {
    /// Not estimated (tau² = 0).
    None,
    /// DerSimonian-Laird moment estimator.
    Dl,
    /// Restricted maximum likelihood.
    Reml,
}

impl Tau2Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Tau2Method::None => "none",
            Tau2Method::Dl => "dl",
            Tau2Method::Reml => "reml",
        }
    }
}

impl fmt::Display for Tau2Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tau2Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Tau2Method::None),
            "dl" => Ok(Tau2Method::Dl),
            "reml" => Ok(Tau2Method::Reml),
            other => Err(format!(
                "unknown tau2 estimator `{other}` (expected dl|reml)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityEstimate {
    pub q: f64,
    pub i2: f64,
    pub tau2: f64,
    pub estimator: Tau2Method,
    pub phi: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn require_two(studies: &[Study]) -> Result<()> {
    if studies.len() < 2 {
        Err(Error::TooFewStudies {
            needed: 2,
            got: studies.len(),
        })
    } else {
        Ok(())
    }
}

/// Cochran's Q with inverse-variance weights.
pub fn cochran_q(studies: &[Study]) -> Result<f64> {
    require_two(studies)?;
    let weights: Vec<f64> = studies.iter().map(|s| 1.0 / s.variance()).collect();
    let sw: f64 = weights.iter().sum();
    let mean = studies
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * s.estimate)
        .sum::<f64>()
        / sw;
    Ok(studies
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * (s.estimate - mean).powi(2))
        .sum())
}

/// Higgins' `I² = max{Q - (k - 1), 0} / Q`, taken as 0 when `Q = 0`.
pub fn higgins_i2(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    (q - (k as f64 - 1.0)).max(0.0) / q
}

/// `phi = max{Q / (k - 1), 1}`.
pub fn phi_multiplicative(q: f64, k: usize) -> f64 {
    if k < 2 {
        return 1.0;
    }
    (q / (k as f64 - 1.0)).max(1.0)
}

/// DerSimonian-Laird estimate `max{(Q - (k-1)) / (S1 - S2/S1), 0}`.
pub fn tau2_dl(studies: &[Study]) -> Result<f64> {
    let q = cochran_q(studies)?;
    let (s1, s2) = studies.iter().fold((0.0, 0.0), |(a, b), s| {
        let w = 1.0 / s.variance();
        (a + w, b + w * w)
    });
    let k = studies.len() as f64;
    Ok(((q - (k - 1.0)) / (s1 - s2 / s1)).max(0.0))
}

/// One REML fixed-point update from `tau2`.
pub fn reml_update(studies: &[Study], tau2: f64) -> f64 {
    let weights: Vec<f64> = studies
        .iter()
        .map(|s| 1.0 / (s.variance() + tau2))
        .collect();
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    let mean = studies
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * s.estimate)
        .sum::<f64>()
        / sw;
    let num: f64 = studies
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * w * ((s.estimate - mean).powi(2) - s.variance()))
        .sum();
    (num / sw2 + 1.0 / sw).max(0.0)
}

/// REML estimate by fixed-point iteration started at the DL estimate.
pub fn tau2_reml(studies: &[Study]) -> Result<HeterogeneityEstimate> {
    let q = cochran_q(studies)?;
    let k = studies.len();
    let mut tau2 = tau2_dl(studies)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < REML_MAX_ITER {
        iterations += 1;
        let next = reml_update(studies, tau2);
        let step = (next - tau2).abs();
        tau2 = next;
        if step <= REML_TOL {
            converged = true;
            break;
        }
    }
    Ok(HeterogeneityEstimate {
        q,
        i2: higgins_i2(q, k),
        tau2,
        estimator: Tau2Method::Reml,
        phi: phi_multiplicative(q, k),
        iterations,
        converged,
    })
}

/// Q, I², phi and tau² by the requested estimator.
pub fn estimate(studies: &[Study], method: Tau2Method) -> Result<HeterogeneityEstimate> {
    let q = cochran_q(studies)?;
    let k = studies.len();
    match method {
        Tau2Method::Reml => tau2_reml(studies),
        Tau2Method::Dl | Tau2Method::None => Ok(HeterogeneityEstimate {
            q,
            i2: higgins_i2(q, k),
            tau2: if method == Tau2Method::Dl {
                tau2_dl(studies)?
            } else {
                0.0
            },
            estimator: method,
            phi: phi_multiplicative(q, k),
            iterations: 0,
            converged: true,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn make(pairs: &[(f64, f64)]) -> Vec<Study> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(e, s))| Study::new(format!("s{i}"), e, s).unwrap())
            .collect()
    }

    #[test]
    fn q_examples() {
        assert_abs_diff_eq!(
            cochran_q(&make(&[(0.0, 1.0), (1.0, 1.0)])).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            cochran_q(&make(&[(0.3, 1.0), (0.3, 0.2), (0.3, 4.0)])).unwrap(),
            0.0,
            epsilon = 1e-28
        );
        assert!(cochran_q(&make(&[(0.3, 1.0)])).is_err());
    }

    #[test]
    fn q_pairwise_form() {
        let s = make(&[(0.12, 0.3), (-0.5, 0.15), (0.8, 0.6)]);
        let w: Vec<f64> = s.iter().map(|x| 1.0 / x.variance()).collect();
        let mut num = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                num += w[i] * w[j] * (s[i].estimate - s[j].estimate).powi(2);
            }
        }
        let pairwise = num / w.iter().sum::<f64>();
        assert_abs_diff_eq!(cochran_q(&s).unwrap(), pairwise, epsilon = 1e-12);
    }

    #[test]
    fn i2_and_phi() {
        assert_eq!(higgins_i2(4.0, 5), 0.0);
        assert_eq!(higgins_i2(8.0, 5), 0.5);
        assert_eq!(higgins_i2(0.0, 5), 0.0);
        assert_eq!(phi_multiplicative(4.0, 5), 1.0);
        assert_eq!(phi_multiplicative(12.0, 5), 3.0);
        assert_eq!(phi_multiplicative(0.0, 5), 1.0);
    }

    #[test]
    fn dl_examples() {
        assert_eq!(
            tau2_dl(&make(&[(0.0, 1.0), (0.1, 1.0), (-0.1, 1.0)])).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            tau2_dl(&make(&[(0.0, 1.0), (2.0, 1.0)])).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn dl_solves_moment_equation() {
        // DL tau2 makes the moment identity E[Q] = (k-1) + tau2 (S1 - S2/S1) hold exactly
        let s = make(&[(0.1, 0.2), (0.9, 0.3), (-0.4, 0.25), (0.5, 0.1), (1.5, 0.4)]);
        let t = tau2_dl(&s).unwrap();
        assert!(t > 0.0);
        let w: Vec<f64> = s.iter().map(|x| 1.0 / x.variance()).collect();
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        // brute force: bisection on the moment equation
        let q = cochran_q(&s).unwrap();
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 4.0 + mid * (s1 - s2 / s1) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(t, lo, epsilon = 1e-12);
    }

    #[test]
    fn reml_homogeneous_is_zero() {
        let r = tau2_reml(&make(&[(0.2, 0.1), (0.2, 0.3), (0.2, 0.2)])).unwrap();
        assert_eq!(r.tau2, 0.0);
        assert!(r.converged);
    }

    fn restricted_loglik(s: &[Study], tau2: f64) -> f64 {
        let w: Vec<f64> = s.iter().map(|x| 1.0 / (x.variance() + tau2)).collect();
        let sw: f64 = w.iter().sum();
        let mean = s.iter().zip(&w).map(|(x, w)| w * x.estimate).sum::<f64>() / sw;
        -0.5 * w.iter().map(|v| -v.ln()).sum::<f64>()
            - 0.5 * sw.ln()
            - 0.5
                * s.iter()
                    .zip(&w)
                    .map(|(x, w)| w * (x.estimate - mean).powi(2))
                    .sum::<f64>()
    }

    #[test]
    fn reml_is_likelihood_stationary_point() {
        let s = make(&[
            (0.31, 0.2),
            (-0.22, 0.21),
            (0.75, 0.19),
            (0.05, 0.2),
            (0.61, 0.23),
            (-0.4, 0.2),
            (0.9, 0.18),
            (0.12, 0.22),
            (0.45, 0.2),
            (-0.05, 0.21),
        ]);
        let r = tau2_reml(&s).unwrap();
        assert!(r.converged && r.tau2 > 0.0);
        let h = 1e-4;
        let d_lo = restricted_loglik(&s, r.tau2 - h) - restricted_loglik(&s, r.tau2 - 2.0 * h);
        let d_hi = restricted_loglik(&s, r.tau2 + 2.0 * h) - restricted_loglik(&s, r.tau2 + h);
        assert!(d_lo > 0.0 && d_hi < 0.0, "derivative must change sign");
        // grid maximiser agrees
        let best = (1..4000)
            .map(|i| f64::from(i) * 1e-4)
            .max_by(|a, b| restricted_loglik(&s, *a).total_cmp(&restricted_loglik(&s, *b)))
            .unwrap();
        assert_abs_diff_eq!(best, r.tau2, epsilon = 2e-4);
        assert!((reml_update(&s, r.tau2) - r.tau2).abs() <= REML_TOL);
    }

    proptest! {
        #[test]
        fn q_reorder_and_scale(
            pairs in proptest::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 2..10),
            c in 0.1f64..10.0,
        ) {
            let s = make(&pairs);
            let q = cochran_q(&s).unwrap();
            let mut rev = s.clone();
            rev.reverse();
            prop_assert!((cochran_q(&rev).unwrap() - q).abs() <= 1e-9 * (1.0 + q));
            let scaled: Vec<Study> = s.iter().map(|x| Study::new("x", x.estimate, x.se * c).unwrap()).collect();
            prop_assert!((cochran_q(&scaled).unwrap() - q / (c * c)).abs() <= 1e-9 * (1.0 + q));
        }

        #[test]
        fn reml_location_invariant(
            pairs in proptest::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 2..10),
            shift in -5.0f64..5.0,
        ) {
            let s = make(&pairs);
            let shifted: Vec<Study> = s.iter().map(|x| Study::new("x", x.estimate + shift, x.se).unwrap()).collect();
            let a = tau2_reml(&s).unwrap();
            let b = tau2_reml(&shifted).unwrap();
            prop_assert!((a.tau2 - b.tau2).abs() < 1e-7 * (1.0 + a.tau2));
            prop_assert!(a.tau2 >= 0.0 && a.phi >= 1.0);
        }
    }
}
