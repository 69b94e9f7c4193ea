//! Special functions and the handful of distributions the engine needs:
//! standard normal, chi-squared, Student-t, Irwin-Hall, Fisher's noncentral
//! hypergeometric and the skew normal.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::{beta, erf, gamma};

use crate::error::{finite, positive, probability_open, Error, Result};
use crate::{quad, roots};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Irwin-Hall orders at or above this use the central-limit approximation.
pub const IRWIN_HALL_NORMAL_FROM: u32 = 12;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF without input validation (NaN propagates).
///
/// Evaluated through the complementary error function, so both tails keep
/// full relative precision.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile without input validation.
///
/// Returns `-inf`/`+inf` at 0 and 1. One Newton step polishes the
/// inverse-erfc starting value.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let z = -SQRT_2 * erf::erfc_inv(2.0 * p);
    let density = norm_pdf(z);
    if density > 0.0 {
        let err = if p < 0.5 {
            norm_cdf(z) - p
        } else {
            // work on the upper tail to keep relative precision
            (1.0 - p) - norm_cdf(-z)
        };
        z - err / density
    } else {
        z
    }
}

/// Standard normal CDF, rejecting non-finite input.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    finite("x", x).map(norm_cdf)
}

/// Standard normal quantile for `0 < p < 1`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    probability_open("p", p).map(norm_quantile)
}

fn check_chi2(x: f64, df: f64) -> Result<()> {
    positive("df", df)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "x >= 0",
        });
    }
    Ok(())
}

/// `Pr(X <= x)` for `X ~ chi-squared(df)`.
pub fn chi2_cdf(x: f64, df: f64) -> Result<f64> {
    check_chi2(x, df)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma::gamma_lr(0.5 * df, 0.5 * x))
}

/// `Pr(X > x)` for `X ~ chi-squared(df)`, accurate in the upper tail.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    check_chi2(x, df)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma::gamma_ur(0.5 * df, 0.5 * x))
}

/// Student-t CDF.
pub fn student_t_cdf(x: f64, df: f64) -> Result<f64> {
    positive("df", df)?;
    if x.is_nan() {
        return Err(Error::NonFinite {
            name: "x",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    if x.is_infinite() {
        return Ok(if x > 0.0 { 1.0 } else { 0.0 });
    }
    // two-sided tail Pr(|T| > |x|)
    let tail = beta::beta_reg(0.5 * df, 0.5, df / (df + x * x));
    Ok(if x > 0.0 {
        1.0 - 0.5 * tail
    } else {
        0.5 * tail
    })
}

/// Student-t quantile for `0 < p < 1`.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    probability_open("p", p)?;
    positive("df", df)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    if df == 1.0 {
        return Ok((PI * (p - 0.5)).tan());
    }
    if df == 2.0 {
        return Ok((2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt());
    }
    let z = norm_quantile(p);
    let cdf = |x: f64| student_t_cdf(x, df).unwrap_or(f64::NAN);
    roots::solve_monotone(cdf, p, z - 1.0, z + 1.0)
}

fn irwin_hall_lower(s: f64, k: u32) -> f64 {
    // Alternating sum, only used for s <= k/2 where cancellation is mild.
    let mut binom = 1.0;
    let mut factorial = 1.0;
    for i in 2..=k {
        factorial *= f64::from(i);
    }
    let mut total = 0.0;
    let upper = s.floor() as u32;
    for j in 0..=upper.min(k) {
        let term = binom * (s - f64::from(j)).powi(k as i32);
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
        binom = binom * f64::from(k - j) / f64::from(j + 1);
    }
    (total / factorial).clamp(0.0, 1.0)
}

/// Exact Irwin-Hall CDF, whatever the order `k`.
///
/// Overflows for large `k`; [`irwin_hall_cdf`] switches to the normal
/// approximation before that happens.
pub fn irwin_hall_cdf_exact(s: f64, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::OutOfRange {
            name: "k",
            value: f64::from(k),
            expected: "k >= 1",
        });
    }
    if s.is_nan() {
        return Err(Error::NonFinite {
            name: "s",
            value: s,
        });
    }
    let kf = f64::from(k);
    Ok(if s <= 0.0 {
        0.0
    } else if s >= kf {
        1.0
    } else if s <= 0.5 * kf {
        irwin_hall_lower(s, k)
    } else {
        1.0 - irwin_hall_lower(kf - s, k)
    })
}

/// Central-limit approximation `Phi(sqrt(12k) (s/k - 1/2))` of the
/// Irwin-Hall CDF.
pub fn irwin_hall_cdf_normal(s: f64, k: u32) -> f64 {
    let kf = f64::from(k);
    norm_cdf((12.0 * kf).sqrt() * (s / kf - 0.5))
}

/// CDF of the sum of `k` independent uniforms.
///
/// Exact for `k < 12`, normal approximation from `k = 12` on. Arguments
/// outside `[0, k]` clamp to 0 or 1.
pub fn irwin_hall_cdf(s: f64, k: u32) -> Result<f64> {
    if k >= IRWIN_HALL_NORMAL_FROM {
        if s.is_nan() {
            return Err(Error::NonFinite {
                name: "s",
                value: s,
            });
        }
        let kf = f64::from(k);
        return Ok(if s <= 0.0 {
            0.0
        } else if s >= kf {
            1.0
        } else {
            irwin_hall_cdf_normal(s, k)
        });
    }
    irwin_hall_cdf_exact(s, k)
}

/// Fisher's noncentral hypergeometric distribution of the top-left cell `X`
/// of a 2x2 table with row totals `n1`, `n0` and first column total `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NcHypergeom {
    n1: u64,
    n0: u64,
    t: u64,
    lo: u64,
    hi: u64,
}

impl NcHypergeom {
    pub fn new(n1: u64, n0: u64, t: u64) -> Result<Self> {
        if t > n1 + n0 {
            return Err(Error::InfeasibleTable(format!(
                "column total {t} exceeds group sizes {n1} + {n0}"
            )));
        }
        Ok(Self {
            n1,
            n0,
            t,
            lo: t.saturating_sub(n0),
            hi: t.min(n1),
        })
    }

    /// Smallest and largest attainable value of `X`.
    pub fn support(&self) -> (u64, u64) {
        (self.lo, self.hi)
    }

    /// Probabilities over the support `lo..=hi` for odds ratio `exp(log_psi)`.
    pub fn pmf_all(&self, log_psi: f64) -> Vec<f64> {
        let len = (self.hi - self.lo + 1) as usize;
        let mut logs = Vec::with_capacity(len);
        let mut acc = 0.0;
        logs.push(acc);
        for x in self.lo..self.hi {
            let num = ((self.n1 - x) as f64) * ((self.t - x) as f64);
            let den = ((x + 1) as f64) * ((self.n0 + x + 1 - self.t) as f64);
            acc += num.ln() - den.ln() + log_psi;
            logs.push(acc);
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        probs
    }
}

/// `Pr(X = x)` under Fisher's noncentral hypergeometric distribution.
pub fn nc_hypergeom_pmf(x: u64, n1: u64, n0: u64, t: u64, psi: f64) -> Result<f64> {
    positive("psi", psi)?;
    let dist = NcHypergeom::new(n1, n0, t)?;
    let (lo, hi) = dist.support();
    if x < lo || x > hi {
        return Err(Error::OutsideSupport {
            x: x as i64,
            lo: lo as i64,
            hi: hi as i64,
        });
    }
    Ok(dist.pmf_all(psi.ln())[(x - lo) as usize])
}

/// Azzalini skew normal distribution with location `xi`, scale `omega`
/// and shape `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormal {
    xi: f64,
    omega: f64,
    alpha: f64,
}

// Standardised density vanishes (in f64) beyond this.
const SN_LIMIT: f64 = 40.0;
const SN_TOL: f64 = 1e-12;

impl SkewNormal {
    pub fn new(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        finite("xi", xi)?;
        positive("omega", omega)?;
        finite("alpha", alpha)?;
        Ok(Self { xi, omega, alpha })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `delta = alpha / sqrt(1 + alpha^2)`.
    pub fn delta(&self) -> f64 {
        self.alpha / (1.0 + self.alpha * self.alpha).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.xi + self.omega * self.delta() * (2.0 / PI).sqrt()
    }

    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.omega * self.omega * (1.0 - 2.0 * d * d / PI)
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.xi) / self.omega;
        2.0 / self.omega * norm_pdf(z) * norm_cdf(self.alpha * z)
    }

    /// CDF by adaptive quadrature of the standardised density.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.xi) / self.omega;
        if self.alpha == 0.0 {
            return norm_cdf(z);
        }
        if z <= -SN_LIMIT {
            return 0.0;
        }
        if z >= SN_LIMIT {
            return 1.0;
        }
        let alpha = self.alpha;
        let dens = move |t: f64| 2.0 * norm_pdf(t) * norm_cdf(alpha * t);
        let value = if z <= 0.0 {
            quad::integrate(dens, -SN_LIMIT, z, SN_TOL)
        } else {
            1.0 - quad::integrate(dens, z, SN_LIMIT, SN_TOL)
        };
        value.clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        probability_open("p", p)?;
        let start = self.mean();
        let spread = self.variance().sqrt();
        roots::solve_monotone(
            |x| self.cdf(x),
            p,
            start - 2.0 * spread,
            start + 2.0 * spread,
        )
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    /// Draw via `delta |Z0| + sqrt(1 - delta^2) Z1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = self.delta();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        self.xi + self.omega * (d * z0.abs() + (1.0 - d * d).sqrt() * z1)
    }
}
