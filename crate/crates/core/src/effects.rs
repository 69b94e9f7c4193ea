//! Study-level inputs: effect estimates, log odds ratios from 2x2 counts,
//! z-statistics and one-sided normal p-values.

use serde::{Deserialize, Serialize};

use crate::error::{finite, positive, Error, Result};
use crate::special::norm_cdf;

/// Event counts of a two-arm study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub events_treat: u64,
    pub n_treat: u64,
    pub events_ctrl: u64,
    pub n_ctrl: u64,
}

impl Counts {
    pub fn new(events_treat: u64, n_treat: u64, events_ctrl: u64, n_ctrl: u64) -> Result<Self> {
        if events_treat > n_treat || events_ctrl > n_ctrl {
            return Err(Error::InfeasibleTable(format!(
                "events exceed group size ({events_treat}/{n_treat}, {events_ctrl}/{n_ctrl})"
            )));
        }
        Ok(Self {
            events_treat,
            n_treat,
            events_ctrl,
            n_ctrl,
        })
    }

    /// Cells `(a, b, c, d)`: treated events/non-events, control events/non-events.
    pub fn cells(&self) -> (u64, u64, u64, u64) {
        (
            self.events_treat,
            self.n_treat - self.events_treat,
            self.events_ctrl,
            self.n_ctrl - self.events_ctrl,
        )
    }

    pub fn has_zero_cell(&self) -> bool {
        let (a, b, c, d) = self.cells();
        a == 0 || b == 0 || c == 0 || d == 0
    }
}

/// One study's effect estimate and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub id: String,
    pub estimate: f64,
    pub se: f64,
    pub counts: Option<Counts>,
}

impl Study {
    pub fn new(id: impl Into<String>, estimate: f64, se: f64) -> Result<Self> {
        finite("estimate", estimate)?;
        positive("se", se)?;
        Ok(Self {
            id: id.into(),
            estimate,
            se,
            counts: None,
        })
    }

    /// Study on the log odds ratio scale derived from its 2x2 counts.
    pub fn from_counts(id: impl Into<String>, counts: Counts) -> Result<Self> {
        let id = id.into();
        let (estimate, se) = log_or_from_counts(&counts).map_err(|err| match err {
            Error::ZeroCell { .. } => Error::ZeroCell { study: id.clone() },
            other => other,
        })?;
        Ok(Self {
            id,
            estimate,
            se,
            counts: Some(counts),
        })
    }

    pub fn variance(&self) -> f64 {
        self.se * self.se
    }
}

/// Direction of the alternative for the study-level one-sided tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// H1: theta_i > mu; p-values increase with mu.
    Greater,
    /// H1: theta_i < mu; p-values decrease with mu.
    Less,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Greater => Orientation::Less,
            Orientation::Less => Orientation::Greater,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Greater => "greater",
            Orientation::Less => "less",
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "greater" => Ok(Orientation::Greater),
            "less" => Ok(Orientation::Less),
            other => Err(format!(
                "unknown alternative `{other}` (expected greater|less)"
            )),
        }
    }
}

/// A one-sided p-value together with its complement, each evaluated
/// directly so that neither loses precision in the tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSided {
    pub p: f64,
    /// `1 - p`, computed independently.
    pub q: f64,
}

impl OneSided {
    pub fn from_p(p: f64) -> Self {
        Self { p, q: 1.0 - p }
    }

    /// The same evidence seen from the opposite alternative.
    pub fn flipped(self) -> Self {
        Self {
            p: self.q,
            q: self.p,
        }
    }
}

/// Woolf log odds ratio and standard error from 2x2 counts.
///
/// All four cells must be positive; there is no continuity correction.
pub fn log_or_from_counts(counts: &Counts) -> Result<(f64, f64)> {
    if counts.has_zero_cell() {
        return Err(Error::ZeroCell {
            study: String::new(),
        });
    }
    let (a, b, c, d) = counts.cells();
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let estimate = (a * d / (b * c)).ln();
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok((estimate, se))
}

/// `(estimate - mu) / sqrt(phi * se^2 + tau2)`.
///
/// `tau2 = 0, phi = 1` is the plain z-statistic; at most one of the two
/// adjustments may be active.
pub fn z_statistic(study: &Study, mu: f64, tau2: f64, phi: f64) -> Result<f64> {
    if !(tau2 >= 0.0) {
        return Err(Error::OutOfRange {
            name: "tau2",
            value: tau2,
            expected: "tau2 >= 0",
        });
    }
    if !(phi >= 1.0) {
        return Err(Error::OutOfRange {
            name: "phi",
            value: phi,
            expected: "phi >= 1",
        });
    }
    if tau2 > 0.0 && phi > 1.0 {
        return Err(Error::ConflictingAdjustment);
    }
    Ok(z_unchecked(
        study.estimate,
        study.se * study.se,
        mu,
        tau2,
        phi,
    ))
}

#[inline]
pub(crate) fn z_unchecked(estimate: f64, variance: f64, mu: f64, tau2: f64, phi: f64) -> f64 {
    (estimate - mu) / (phi * variance + tau2).sqrt()
}

/// One-sided normal p-value for a z-statistic.
pub fn one_sided_p(z: f64, orientation: Orientation) -> f64 {
    one_sided(z, orientation).p
}

/// One-sided normal p-value and its complement.
pub fn one_sided(z: f64, orientation: Orientation) -> OneSided {
    let upper = norm_cdf(-z);
    let lower = norm_cdf(z);
    match orientation {
        Orientation::Greater => OneSided { p: upper, q: lower },
        Orientation::Less => OneSided { p: lower, q: upper },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovery_odds_ratio() {
        let c = Counts::new(95, 324, 283, 683).unwrap();
        let (est, se) = log_or_from_counts(&c).unwrap();
        assert_eq!(format!("{:.2}", est.exp()), "0.59");
        assert_eq!(format!("{:.2}", (est - 1.959_964 * se).exp()), "0.44");
        assert_eq!(format!("{:.2}", (est + 1.959_964 * se).exp()), "0.78");
    }

    #[test]
    fn dexa_odds_ratio() {
        let c = Counts::new(2, 7, 2, 12).unwrap();
        let (est, _) = log_or_from_counts(&c).unwrap();
        assert_abs_diff_eq!(est.exp(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_arms() {
        let c = Counts::new(1, 2, 1, 2).unwrap();
        let (est, se) = log_or_from_counts(&c).unwrap();
        assert_eq!(est, 0.0);
        assert_abs_diff_eq!(se, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_cell_is_an_error() {
        let c = Counts::new(0, 10, 3, 10).unwrap();
        let err = Study::from_counts("trial-x", c).unwrap_err();
        assert_eq!(
            err,
            Error::ZeroCell {
                study: "trial-x".into()
            }
        );
        assert!(err.to_string().contains("exact"));
        assert!(Counts::new(11, 10, 3, 10).is_err());
    }

    #[test]
    fn z_examples() {
        let s = Study::new("a", 1.0, 2.0).unwrap();
        assert_eq!(z_statistic(&s, 0.0, 0.0, 1.0).unwrap(), 0.5);
        let s = Study::new("b", 1.0, 1.0).unwrap();
        assert_eq!(z_statistic(&s, 0.0, 3.0, 1.0).unwrap(), 0.5);
        let s = Study::new("c", 0.2, 0.1).unwrap();
        assert_eq!(z_statistic(&s, 0.2, 0.0, 1.0).unwrap(), 0.0);
        // multiplicative: sqrt(4) * 1
        assert_eq!(z_statistic(&s, 0.0, 0.0, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn z_rejects_bad_adjustments() {
        let s = Study::new("a", 1.0, 2.0).unwrap();
        assert!(z_statistic(&s, 0.0, -0.1, 1.0).is_err());
        assert!(z_statistic(&s, 0.0, 0.0, 0.9).is_err());
        assert_eq!(
            z_statistic(&s, 0.0, 0.1, 1.5),
            Err(Error::ConflictingAdjustment)
        );
    }

    #[test]
    fn study_validation() {
        assert!(Study::new("a", 0.0, 0.0).is_err());
        assert!(Study::new("a", f64::NAN, 1.0).is_err());
    }

    #[test]
    fn one_sided_examples() {
        assert_eq!(one_sided_p(0.0, Orientation::Greater), 0.5);
        assert_abs_diff_eq!(
            one_sided_p(1.959_964, Orientation::Less),
            0.975,
            epsilon = 1e-7
        );
        let z = -0.7;
        assert_abs_diff_eq!(
            one_sided_p(z, Orientation::Greater) + one_sided_p(z, Orientation::Less),
            1.0,
            epsilon = 1e-15
        );
        let g = one_sided(z, Orientation::Greater);
        assert_eq!(g.flipped(), one_sided(z, Orientation::Less));
    }

    #[test]
    fn p_monotone_in_mu() {
        let s = Study::new("a", 0.3, 0.4).unwrap();
        let mut prev_g = 0.0;
        let mut prev_l = 1.0;
        for i in -100..=100 {
            let mu = f64::from(i) / 20.0;
            let z = z_statistic(&s, mu, 0.0, 1.0).unwrap();
            let g = one_sided_p(z, Orientation::Greater);
            let l = one_sided_p(z, Orientation::Less);
            assert!(g >= prev_g && l <= prev_l);
            prev_g = g;
            prev_l = l;
        }
    }
}
