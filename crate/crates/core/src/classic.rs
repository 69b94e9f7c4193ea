//! Classical comparators: inverse-variance fixed effect, DerSimonian-Laird
//! style random effects and the (unmodified) Hartung-Knapp interval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combine::Method;
use crate::effects::Study;
use crate::error::{Error, Result};
use crate::heterogeneity::{self, Tau2Method};
use crate::special::{norm_cdf, norm_quantile, student_t_cdf, student_t_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicMethod {
    Fixed,
    Dl,
    Hk,
}

impl ClassicMethod {
    pub const ALL: [ClassicMethod; 3] =
        [ClassicMethod::Fixed, ClassicMethod::Dl, ClassicMethod::Hk];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassicMethod::Fixed => "fixed",
            ClassicMethod::Dl => "dl",
            ClassicMethod::Hk => "hk",
        }
    }
}

impl fmt::Display for ClassicMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassicMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ClassicMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown classical method `{s}`"))
    }
}

/// Any analysis method: a p-value combination rule or a classical
/// comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyMethod {
    Combined(Method),
    Classic(ClassicMethod),
}

impl AnyMethod {
    pub const ALL: [AnyMethod; 8] = [
        AnyMethod::Combined(Method::Edgington),
        AnyMethod::Combined(Method::Fisher),
        AnyMethod::Combined(Method::Pearson),
        AnyMethod::Combined(Method::Tippett),
        AnyMethod::Combined(Method::Wilkinson),
        AnyMethod::Classic(ClassicMethod::Fixed),
        AnyMethod::Classic(ClassicMethod::Dl),
        AnyMethod::Classic(ClassicMethod::Hk),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnyMethod::Combined(m) => m.as_str(),
            AnyMethod::Classic(m) => m.as_str(),
        }
    }

    /// Parse a comma separated list, or `all`.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<AnyMethod>, String> {
        if s.trim() == "all" {
            return Ok(AnyMethod::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',') {
            let m: AnyMethod = part.trim().parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for AnyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnyMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AnyMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// A symmetric `estimate ± factor` interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicResult {
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_null: f64,
    pub method: ClassicMethod,
    pub tau2_used: f64,
    /// Set when the interval collapsed to a point (identical estimates
    /// under Hartung-Knapp).
    pub degenerate: bool,
}

impl ClassicResult {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_level(level: f64) -> Result<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(1.0 - level)
    } else {
        Err(Error::OutOfRange {
            name: "level",
            value: level,
            expected: "0 < level < 1",
        })
    }
}

struct Pooled {
    estimate: f64,
    sum_w: f64,
}

fn pool(studies: &[Study], tau2: f64) -> Pooled {
    let (mut sum_w, mut sum_wx) = (0.0, 0.0);
    for s in studies {
        let w = 1.0 / (s.variance() + tau2);
        sum_w += w;
        sum_wx += w * s.estimate;
    }
    Pooled {
        estimate: sum_wx / sum_w,
        sum_w,
    }
}

fn normal_interval(
    studies: &[Study],
    level: f64,
    tau2: f64,
    method: ClassicMethod,
) -> Result<ClassicResult> {
    let alpha = check_level(level)?;
    let pooled = pool(studies, tau2);
    let se = 1.0 / pooled.sum_w.sqrt();
    let z = norm_quantile(1.0 - 0.5 * alpha);
    Ok(ClassicResult {
        estimate: pooled.estimate,
        se,
        lower: pooled.estimate - z * se,
        upper: pooled.estimate + z * se,
        p_null: 2.0 * norm_cdf(-(pooled.estimate / se).abs()),
        method,
        tau2_used: tau2,
        degenerate: false,
    })
}

/// Inverse-variance fixed effect estimate with a normal interval.
pub fn fixed_effect(studies: &[Study], level: f64) -> Result<ClassicResult> {
    if studies.is_empty() {
        return Err(Error::TooFewStudies { needed: 1, got: 0 });
    }
    normal_interval(studies, level, 0.0, ClassicMethod::Fixed)
}

fn tau2_for(studies: &[Study], estimator: Tau2Method) -> Result<f64> {
    Ok(heterogeneity::estimate(studies, estimator)?.tau2)
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

/// Random effects estimate with weights `1/(se² + tau²)` and a normal
/// interval; tau² from `estimator`.
///
/// A single study has no between-study variance and gives its own interval.
pub fn dl_random_effects(
    studies: &[Study],
    level: f64,
    estimator: Tau2Method,
) -> Result<ClassicResult> {
    let tau2 = match studies.len() {
        0 => return Err(Error::TooFewStudies { needed: 1, got: 0 }),
        1 => 0.0,
        _ => tau2_for(studies, estimator)?,
    };
    dl_with_tau2(studies, level, tau2)
}

/// [`dl_random_effects`] with a given tau².
pub fn dl_with_tau2(studies: &[Study], level: f64, tau2: f64) -> Result<ClassicResult> {
    if studies.is_empty() {
        return Err(Error::TooFewStudies { needed: 1, got: 0 });
    }
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(Error::OutOfRange {
            name: "tau2",
            value: tau2,
            expected: "finite and >= 0",
        });
    }
    normal_interval(studies, level, tau2, ClassicMethod::Dl)
}

/// Hartung-Knapp interval using `t(k-1)` quantiles and the weighted
/// residual variance, without truncation at the naive variance.
pub fn hartung_knapp(
    studies: &[Study],
    level: f64,
    estimator: Tau2Method,
) -> Result<ClassicResult> {
    require_two(studies)?;
    let tau2 = tau2_for(studies, estimator)?;
    hk_with_tau2(studies, level, tau2)
}

/// [`hartung_knapp`] with a given tau².
pub fn hk_with_tau2(studies: &[Study], level: f64, tau2: f64) -> Result<ClassicResult> {
    require_two(studies)?;
    let alpha = check_level(level)?;
    let pooled = pool(studies, tau2);
    let df = (studies.len() - 1) as f64;
    let q_hk = studies
        .iter()
        .map(|s| (s.estimate - pooled.estimate).powi(2) / (s.variance() + tau2))
        .sum::<f64>()
        / df;
    let scale = studies.iter().map(|s| s.estimate.abs()).fold(1.0, f64::max);
    let degenerate = studies
        .iter()
        .all(|s| (s.estimate - pooled.estimate).abs() <= 1e-14 * scale);
    let se = if degenerate {
        0.0
    } else {
        (q_hk / pooled.sum_w).sqrt()
    };
    let t = student_t_quantile(1.0 - 0.5 * alpha, df)?;
    let p_null = if degenerate {
        if pooled.estimate == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        2.0 * student_t_cdf(-(pooled.estimate / se).abs(), df)?
    };
    Ok(ClassicResult {
        estimate: pooled.estimate,
        se,
        lower: pooled.estimate - t * se,
        upper: pooled.estimate + t * se,
        p_null,
        method: ClassicMethod::Hk,
        tau2_used: tau2,
        degenerate,
    })
}
