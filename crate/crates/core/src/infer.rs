//! Point estimates, confidence intervals, p-values, areas under the
//! confidence curve and confidence densities from a [`PValueFunction`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combine::PValueFunction;
use crate::effects::{Orientation, Study};
use crate::error::{Error, Result};
use crate::metrics::beta_skewness;
use crate::roots;
use crate::special::norm_quantile;

/// Centrality below which the confidence curve counts as zero.
pub const AUCC_TAIL: f64 = 1e-6;
/// Trapezoid points on each side of the estimate.
pub const AUCC_POINTS: usize = 4001;
/// Central-difference step is the support width divided by this.
pub const DENSITY_STEPS: usize = 2000;

/// Summary of a combined p-value function at one confidence level.
///
/// When `converged` is false the quantities that could not be computed are
/// NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Two-sided p-value for `mu = 0`, i.e. the centrality at zero.
    pub p_null: f64,
    pub width: f64,
    pub aucc: f64,
    pub aucc_ratio: f64,
    pub beta_skew: f64,
    pub converged: bool,
}

/// A uniform evaluation grid `lo:hi:points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::OutOfRange {
                name: "grid",
                value: hi - lo,
                expected: "finite bounds with lo < hi",
            });
        }
        if points < 2 {
            return Err(Error::OutOfRange {
                name: "grid points",
                value: points as f64,
                expected: ">= 2",
            });
        }
        Ok(Self { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let step = self.step();
        (0..self.points).map(move |i| {
            if i + 1 == self.points {
                self.hi
            } else {
                self.lo + step * i as f64
            }
        })
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{s}` must have the form LO:HI:N"));
        }
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid lower bound `{}`", parts[0]))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid upper bound `{}`", parts[1]))?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid point count `{}`", parts[2]))?;
        Grid::new(lo, hi, n).map_err(|e| e.to_string())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.points)
    }
}

fn solve(f: &PValueFunction, target: f64) -> Result<f64> {
    let (lo, hi) = f.initial_bracket();
    roots::solve_monotone(|mu| f.evaluate(mu), target, lo, hi)
}

/// Median estimate: the root of `p(mu) = 0.5`.
pub fn median_estimate(f: &PValueFunction) -> Result<f64> {
    solve(f, 0.5)
}

fn check_level(level: f64) -> Result<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(level)
    } else {
        Err(Error::OutOfRange {
            name: "level",
            value: level,
            expected: "0 < level < 1",
        })
    }
}

/// Two-sided confidence interval at `level`: the two crossings of the
/// confidence curve with `1 - level`.
pub fn confidence_interval(f: &PValueFunction, level: f64) -> Result<(f64, f64)> {
    let alpha = 1.0 - check_level(level)?;
    let (low_target, high_target) = match f.orientation() {
        Orientation::Greater => (0.5 * alpha, 1.0 - 0.5 * alpha),
        Orientation::Less => (1.0 - 0.5 * alpha, 0.5 * alpha),
    };
    Ok((solve(f, low_target)?, solve(f, high_target)?))
}

/// Root of `p(mu) = target` for a p-value function of any orientation.
pub fn solve_level(f: &PValueFunction, target: f64) -> Result<f64> {
    solve(f, target)
}

fn closed_form_inputs(studies: &[Study], alpha: f64) -> Result<()> {
    if studies.is_empty() {
        return Err(Error::TooFewStudies { needed: 1, got: 0 });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            expected: "0 < alpha < 1",
        });
    }
    Ok(())
}

/// Closed-form solution of `p_W(mu) = alpha` for Wilkinson's rule with
/// unadjusted normal p-values.
pub fn closed_form_wilkinson(
    studies: &[Study],
    alpha: f64,
    orientation: Orientation,
) -> Result<f64> {
    closed_form_inputs(studies, alpha)?;
    let z = norm_quantile(alpha.powf(1.0 / studies.len() as f64));
    Ok(match orientation {
        Orientation::Greater => studies
            .iter()
            .map(|s| s.estimate + s.se * z)
            .fold(f64::INFINITY, f64::min),
        Orientation::Less => studies
            .iter()
            .map(|s| s.estimate - s.se * z)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Closed-form solution of `p_T(mu) = alpha` for Tippett's rule with
/// unadjusted normal p-values.
pub fn closed_form_tippett(studies: &[Study], alpha: f64, orientation: Orientation) -> Result<f64> {
    closed_form_inputs(studies, alpha)?;
    let z = norm_quantile((1.0 - alpha).powf(1.0 / studies.len() as f64));
    Ok(match orientation {
        Orientation::Greater => studies
            .iter()
            .map(|s| s.estimate - s.se * z)
            .fold(f64::NEG_INFINITY, f64::max),
        Orientation::Less => studies
            .iter()
            .map(|s| s.estimate + s.se * z)
            .fold(f64::INFINITY, f64::min),
    })
}

/// Confidence curve `2 min{p(mu), 1 - p(mu)}`.
pub fn centrality(f: &PValueFunction, mu: f64) -> f64 {
    f.centrality(mu)
}

/// Area under the confidence curve, split at the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aucc {
    pub total: f64,
    pub below: f64,
    pub above: f64,
    /// Integration support: centrality is below [`AUCC_TAIL`] outside it.
    pub support: (f64, f64),
}

impl Aucc {
    /// `(above - below) / total`.
    pub fn ratio(&self) -> f64 {
        (self.above - self.below) / self.total
    }
}

fn trapezoid<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, points: usize) -> f64 {
    let step = (b - a) / (points - 1) as f64;
    let inner: f64 = (1..points - 1).map(|i| g(a + step * i as f64)).sum();
    step * (0.5 * (g(a) + g(b)) + inner)
}

fn tail_end(f: &PValueFunction, estimate: f64, start: f64, direction: f64) -> Result<f64> {
    let mut dist = start;
    for _ in 0..=roots::MAX_DOUBLINGS {
        let mu = estimate + direction * dist;
        if f.centrality(mu) < AUCC_TAIL {
            return Ok(mu);
        }
        dist *= 2.0;
    }
    Err(Error::NoConvergence(
        "confidence curve does not decay in the tails",
    ))
}

/// AUCC below and above `estimate`, by the trapezoid rule over the support
/// where the curve exceeds [`AUCC_TAIL`].
pub fn aucc_detail(f: &PValueFunction, estimate: f64) -> Result<Aucc> {
    if !estimate.is_finite() {
        return Err(Error::NonFinite {
            name: "estimate",
            value: estimate,
        });
    }
    let (_, _, scale) = f.spread();
    let start = if scale > 0.0 { scale } else { 1.0 };
    let lo = tail_end(f, estimate, start, -1.0)?;
    let hi = tail_end(f, estimate, start, 1.0)?;
    let curve = |mu: f64| f.centrality(mu);
    let below = trapezoid(curve, lo, estimate, AUCC_POINTS);
    let above = trapezoid(curve, estimate, hi, AUCC_POINTS);
    Ok(Aucc {
        total: below + above,
        below,
        above,
        support: (lo, hi),
    })
}

/// Area under the confidence curve.
pub fn aucc(f: &PValueFunction) -> Result<f64> {
    let estimate = median_estimate(f)?;
    Ok(aucc_detail(f, estimate)?.total)
}

/// `(AUCC above - AUCC below) / AUCC` around `estimate`.
pub fn aucc_ratio(f: &PValueFunction, estimate: f64) -> Result<f64> {
    Ok(aucc_detail(f, estimate)?.ratio())
}

/// Confidence density by central differences of the p-value function.
///
/// The step is `(hi - lo) / 2000` of the evaluation range; with no grid the
/// range is the AUCC support. Less-oriented functions are differentiated
/// with the sign flipped, so the output is always a density. Negative
/// finite-difference values are clamped to zero.
pub fn confidence_density(f: &PValueFunction, grid: Option<Grid>) -> Result<Vec<(f64, f64)>> {
    let grid = match grid {
        Some(g) => g,
        None => {
            let estimate = median_estimate(f)?;
            let (lo, hi) = aucc_detail(f, estimate)?.support;
            Grid::new(lo, hi, DENSITY_STEPS + 1)?
        }
    };
    let h = (grid.hi - grid.lo) / DENSITY_STEPS as f64;
    let sign = match f.orientation() {
        Orientation::Greater => 1.0,
        Orientation::Less => -1.0,
    };
    let out = grid
        .values()
        .map(|mu| {
            let d = sign * (f.evaluate(mu + h) - f.evaluate(mu - h)) / (2.0 * h);
            (mu, if d < 0.0 { 0.0 } else { d })
        })
        .collect();
    Ok(out)
}

/// Everything at once: estimate, interval, p-value at zero, width, AUCC,
/// AUCC ratio and interval skewness.
pub fn analyze(f: &PValueFunction, level: f64) -> Result<MetaResult> {
    check_level(level)?;
    let p_null = f.centrality(0.0);
    let mut result = MetaResult {
        estimate: f64::NAN,
        lower: f64::NAN,
        upper: f64::NAN,
        level,
        p_null,
        width: f64::NAN,
        aucc: f64::NAN,
        aucc_ratio: f64::NAN,
        beta_skew: f64::NAN,
        converged: false,
    };
    let Ok(estimate) = median_estimate(f) else {
        return Ok(result);
    };
    result.estimate = estimate;
    let Ok((lower, upper)) = confidence_interval(f, level) else {
        return Ok(result);
    };
    result.lower = lower;
    result.upper = upper;
    result.width = upper - lower;
    result.beta_skew = beta_skewness(estimate, lower, upper).unwrap_or(f64::NAN);
    let Ok(area) = aucc_detail(f, estimate) else {
        return Ok(result);
    };
    result.aucc = area.total;
    result.aucc_ratio = area.ratio();
    result.converged = true;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::{make_pfunction, Method};
    use crate::special::norm_cdf;
    use approx::assert_abs_diff_eq;

    fn one(est: f64, se: f64) -> Vec<Study> {
        vec![Study::new("s", est, se).unwrap()]
    }

    #[test]
    fn single_study_reduces_to_normal_interval() {
        for m in Method::ALL {
            for o in [Orientation::Greater, Orientation::Less] {
                let f = make_pfunction(&one(0.4, 0.25), m, o, 0.0, 1.0).unwrap();
                let r = analyze(&f, 0.95).unwrap();
                assert!(r.converged);
                assert_abs_diff_eq!(r.estimate, 0.4, epsilon = 1e-10);
                let z = norm_quantile(0.975);
                assert_abs_diff_eq!(r.lower, 0.4 - z * 0.25, epsilon = 1e-9);
                assert_abs_diff_eq!(r.upper, 0.4 + z * 0.25, epsilon = 1e-9);
                assert!(r.beta_skew.abs() < 1e-8);
                let p0 = 2.0 * norm_cdf(-0.4 / 0.25);
                assert_abs_diff_eq!(r.p_null, p0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn symmetric_curve_aucc() {
        // integral of 2(1 - Phi(|x|/s)) over the line = 4 s / sqrt(2 pi)
        for &s in &[0.05, 0.3, 2.0] {
            let f = make_pfunction(
                &one(-1.0, s),
                Method::Edgington,
                Orientation::Greater,
                0.0,
                1.0,
            )
            .unwrap();
            let area = aucc_detail(&f, -1.0).unwrap();
            let exact = 4.0 * s / (2.0 * std::f64::consts::PI).sqrt();
            assert!((area.total / exact - 1.0).abs() < 1e-4, "s = {s}");
            assert!(area.ratio().abs() < 1e-6);
        }
    }

    #[test]
    fn centrality_peaks_at_estimate() {
        let studies = vec![
            Study::new("a", 0.1, 0.3).unwrap(),
            Study::new("b", -0.4, 0.2).unwrap(),
            Study::new("c", 0.9, 0.5).unwrap(),
        ];
        for m in Method::ALL {
            let f = make_pfunction(&studies, m, Orientation::Less, 0.0, 1.0).unwrap();
            let est = median_estimate(&f).unwrap();
            assert_abs_diff_eq!(f.evaluate(est), 0.5, epsilon = 1e-10);
            assert_abs_diff_eq!(centrality(&f, est), 1.0, epsilon = 1e-10);
            for i in -100..=100 {
                let mu = est + f64::from(i) * 0.02;
                assert!(centrality(&f, mu) <= centrality(&f, est) + 1e-12);
            }
        }
    }

    #[test]
    fn centrality_at_level() {
        let f = make_pfunction(
            &one(0.0, 1.0),
            Method::Fisher,
            Orientation::Greater,
            0.0,
            1.0,
        )
        .unwrap();
        let mu = norm_quantile(0.025);
        assert_abs_diff_eq!(centrality(&f, mu), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn nested_intervals() {
        let studies = vec![
            Study::new("a", 0.1, 0.3).unwrap(),
            Study::new("b", -0.4, 0.2).unwrap(),
            Study::new("c", 0.9, 0.5).unwrap(),
            Study::new("d", 0.3, 0.1).unwrap(),
        ];
        for m in Method::ALL {
            let f = make_pfunction(&studies, m, Orientation::Greater, 0.02, 1.0).unwrap();
            let (l90, u90) = confidence_interval(&f, 0.90).unwrap();
            let (l95, u95) = confidence_interval(&f, 0.95).unwrap();
            assert!(l95 < l90 && u90 < u95, "{m}");
        }
    }

    #[test]
    fn closed_forms_single_study() {
        let s = one(0.7, 0.2);
        assert_abs_diff_eq!(
            closed_form_wilkinson(&s, 0.5, Orientation::Greater).unwrap(),
            0.7,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            closed_form_tippett(&s, 0.5, Orientation::Less).unwrap(),
            0.7,
            epsilon = 1e-15
        );
        assert!(closed_form_tippett(&s, 1.0, Orientation::Less).is_err());
        assert!(closed_form_wilkinson(&[], 0.5, Orientation::Less).is_err());
    }

    #[test]
    fn density_of_single_study_is_normal() {
        let f = make_pfunction(
            &one(0.3, 0.4),
            Method::Edgington,
            Orientation::Greater,
            0.0,
            1.0,
        )
        .unwrap();
        let dens = confidence_density(&f, None).unwrap();
        let mut worst: f64 = 0.0;
        for &(mu, d) in &dens {
            let z = (mu - 0.3) / 0.4;
            let exact = crate::special::norm_pdf(z) / 0.4;
            worst = worst.max((d - exact).abs());
        }
        assert!(worst < 1e-4, "{worst}");
        let integral: f64 = dens
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn density_of_less_orientation_matches() {
        let studies = vec![
            Study::new("a", 0.1, 0.3).unwrap(),
            Study::new("b", -0.4, 0.2).unwrap(),
        ];
        let g =
            make_pfunction(&studies, Method::Edgington, Orientation::Greater, 0.0, 1.0).unwrap();
        let l = g.with(Method::Edgington, Orientation::Less);
        let grid = Grid::new(-1.5, 1.0, 51).unwrap();
        let dg = confidence_density(&g, Some(grid)).unwrap();
        let dl = confidence_density(&l, Some(grid)).unwrap();
        for (a, b) in dg.iter().zip(&dl) {
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "-1.5:2:7".parse().unwrap();
        assert_eq!(
            g,
            Grid {
                lo: -1.5,
                hi: 2.0,
                points: 7
            }
        );
        assert_eq!(g.values().count(), 7);
        assert_eq!(g.values().last(), Some(2.0));
        assert!("1:0:5".parse::<Grid>().is_err());
        assert!("0:1:1".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
        assert!("a:1:3".parse::<Grid>().is_err());
    }

    #[test]
    fn invalid_level() {
        let f = make_pfunction(
            &one(0.0, 1.0),
            Method::Fisher,
            Orientation::Greater,
            0.0,
            1.0,
        )
        .unwrap();
        assert!(confidence_interval(&f, 1.0).is_err());
        assert!(analyze(&f, 0.0).is_err());
    }
}
