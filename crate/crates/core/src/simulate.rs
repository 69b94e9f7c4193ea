//! Monte Carlo evaluation of the methods on simulated meta-analyses.
//!
//! Every repetition draws from its own ChaCha stream keyed by the base
//! seed, the scenario and the repetition index, and per-repetition results
//! are reduced in repetition order. Output is therefore independent of the
//! number of worker threads.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{dl_with_tau2, fixed_effect, hk_with_tau2, AnyMethod, ClassicMethod};
use crate::combine::{make_pfunction, Method};
use crate::effects::{Orientation, Study};
use crate::error::{Error, Result};
use crate::heterogeneity::tau2_reml;
use crate::infer::analyze;
use crate::metrics::{cohen_kappa, gamma_weighted_skewness, pearson_correlation, sign_class};
use crate::special::SkewNormal;

/// Per-group sample size of a small study.
pub const N_SMALL: u32 = 50;
/// Per-group sample size of a large study.
pub const N_LARGE: u32 = 500;

/// Heterogeneity handling of the combination methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjust {
    None,
    /// Additive tau² estimated by REML.
    AdditiveReml,
}

impl Adjust {
    pub fn as_str(self) -> &'static str {
        match self {
            Adjust::None => "none",
            Adjust::AdditiveReml => "additive_reml",
        }
    }
}

impl fmt::Display for Adjust {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Adjust {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Adjust::None),
            "additive_reml" | "additive" => Ok(Adjust::AdditiveReml),
            other => Err(format!(
                "unknown adjustment `{other}` (expected none or additive_reml)"
            )),
        }
    }
}

/// One cell of the factorial design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub k: usize,
    pub n_large: usize,
    pub i2: f64,
    pub theta: f64,
    /// Skew normal shape of the true effect distribution; 0 is normal.
    pub alpha: f64,
    pub n_sim: usize,
    pub base_seed: u64,
    pub adjust: Adjust,
    pub level: f64,
    /// Orientation of the combination methods.
    pub orientation: Orientation,
}

impl SimScenario {
    pub fn new(
        k: usize,
        n_large: usize,
        i2: f64,
        alpha: f64,
        n_sim: usize,
        base_seed: u64,
        adjust: Adjust,
    ) -> Result<Self> {
        let s = Self {
            k,
            n_large,
            i2,
            theta: 0.2,
            alpha,
            n_sim,
            base_seed,
            adjust,
            level: 0.95,
            orientation: Orientation::Greater,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::TooFewStudies { needed: 1, got: 0 });
        }
        if self.n_large > self.k {
            return Err(Error::OutOfRange {
                name: "n_large",
                value: self.n_large as f64,
                expected: "n_large <= k",
            });
        }
        if !(0.0..1.0).contains(&self.i2) {
            return Err(Error::OutOfRange {
                name: "i2",
                value: self.i2,
                expected: "0 <= i2 < 1",
            });
        }
        if !self.theta.is_finite() {
            return Err(Error::NonFinite {
                name: "theta",
                value: self.theta,
            });
        }
        if !self.alpha.is_finite() {
            return Err(Error::NonFinite {
                name: "alpha",
                value: self.alpha,
            });
        }
        if self.n_sim == 0 {
            return Err(Error::OutOfRange {
                name: "n_sim",
                value: 0.0,
                expected: "n_sim >= 1",
            });
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::OutOfRange {
                name: "level",
                value: self.level,
                expected: "0 < level < 1",
            });
        }
        Ok(())
    }

    /// Per-group sample sizes, large studies first.
    pub fn sample_sizes(&self) -> Vec<u32> {
        (0..self.k)
            .map(|i| if i < self.n_large { N_LARGE } else { N_SMALL })
            .collect()
    }

    pub fn tau2(&self) -> Result<f64> {
        tau2_from_i2(&self.sample_sizes(), self.i2)
    }

    /// Stable identifier, also used to key the random streams.
    pub fn id(&self) -> String {
        format!(
            "k{}_large{}_i2{}_alpha{}_theta{}",
            self.k, self.n_large, self.i2, self.alpha, self.theta
        )
    }
}

/// Cartesian product of the factor levels, skipping cells with
/// `n_large > k`.
pub fn scenario_grid(
    ks: &[usize],
    n_larges: &[usize],
    i2s: &[f64],
    alphas: &[f64],
    template: &SimScenario,
) -> Result<Vec<SimScenario>> {
    let mut out = Vec::new();
    for &k in ks {
        for &n_large in n_larges {
            if n_large > k {
                continue;
            }
            for &i2 in i2s {
                for &alpha in alphas {
                    let s = SimScenario {
                        k,
                        n_large,
                        i2,
                        alpha,
                        ..*template
                    };
                    s.validate()?;
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}

/// Between-study variance giving relative heterogeneity `i2` when the
/// typical within-study variance is `mean(2 / n_i)`.
pub fn tau2_from_i2(n: &[u32], i2: f64) -> Result<f64> {
    if n.is_empty() {
        return Err(Error::Empty("sample sizes"));
    }
    if !(0.0..1.0).contains(&i2) {
        return Err(Error::OutOfRange {
            name: "i2",
            value: i2,
            expected: "0 <= i2 < 1",
        });
    }
    if let Some(&bad) = n.iter().find(|&&x| x < 2) {
        return Err(Error::OutOfRange {
            name: "n",
            value: f64::from(bad),
            expected: "n >= 2",
        });
    }
    let eps2 = n.iter().map(|&x| 2.0 / f64::from(x)).sum::<f64>() / n.len() as f64;
    Ok(eps2 * i2 / (1.0 - i2))
}

/// Skew normal location and scale giving mean `theta` and sd `tau` at
/// shape `alpha`.
pub fn skew_normal_params(theta: f64, tau: f64, alpha: f64) -> Result<(f64, f64)> {
    crate::error::positive("tau", tau)?;
    crate::error::finite("theta", theta)?;
    crate::error::finite("alpha", alpha)?;
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let c = 2.0 / std::f64::consts::PI;
    let omega = tau / (1.0 - c * delta * delta).sqrt();
    Ok((theta - omega * delta * c.sqrt(), omega))
}

fn true_effect_law(scenario: &SimScenario) -> Result<Option<SkewNormal>> {
    let tau2 = scenario.tau2()?;
    if tau2 == 0.0 {
        return Ok(None);
    }
    let (xi, omega) = skew_normal_params(scenario.theta, tau2.sqrt(), scenario.alpha)?;
    Ok(Some(SkewNormal::new(xi, omega, scenario.alpha)?))
}

/// Mean and median of the true effect distribution.
pub fn estimands(scenario: &SimScenario) -> Result<(f64, f64)> {
    scenario.validate()?;
    let median = match true_effect_law(scenario)? {
        Some(law) if scenario.alpha != 0.0 => law.median()?,
        _ => scenario.theta,
    };
    Ok((scenario.theta, median))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn stream(scenario: &SimScenario, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(scenario.base_seed ^ fnv1a(&scenario.id())));
    rng.set_stream(rep);
    rng
}

/// The simulated meta-analysis of repetition `rep`.
pub fn generate_dataset(scenario: &SimScenario, rep: u64) -> Result<Vec<Study>> {
    scenario.validate()?;
    let law = true_effect_law(scenario)?;
    let mut rng = stream(scenario, rep);
    scenario
        .sample_sizes()
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let theta_i = match &law {
                Some(l) => l.sample(&mut rng),
                None => scenario.theta,
            };
            let n = f64::from(n);
            let noise = Normal::new(0.0, (2.0 / n).sqrt()).expect("positive sd");
            let estimate = theta_i + noise.sample(&mut rng);
            let chi = ChiSquared::new(2.0 * (n - 1.0)).expect("positive df");
            let var = chi.sample(&mut rng) / ((n - 1.0) * n);
            Study::new(format!("study{}", i + 1), estimate, var.sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Fit {
    converged: bool,
    estimate: f64,
    lower: f64,
    upper: f64,
    aucc: f64,
    beta: f64,
    aucc_ratio: f64,
}

impl Fit {
    const FAILED: Fit = Fit {
        converged: false,
        estimate: f64::NAN,
        lower: f64::NAN,
        upper: f64::NAN,
        aucc: f64::NAN,
        beta: f64::NAN,
        aucc_ratio: f64::NAN,
    };
}

struct Replicate {
    gamma: f64,
    fits: Vec<Fit>,
}

fn fit_method(
    method: AnyMethod,
    studies: &[Study],
    tau2: Option<f64>,
    scenario: &SimScenario,
) -> Fit {
    let level = scenario.level;
    match method {
        AnyMethod::Combined(m) => {
            let tau2 = match scenario.adjust {
                Adjust::None => 0.0,
                Adjust::AdditiveReml => match tau2 {
                    Some(t) => t,
                    None => return Fit::FAILED,
                },
            };
            let Ok(f) = make_pfunction(studies, m, scenario.orientation, tau2, 1.0) else {
                return Fit::FAILED;
            };
            match analyze(&f, level) {
                Ok(r) if r.converged => Fit {
                    converged: true,
                    estimate: r.estimate,
                    lower: r.lower,
                    upper: r.upper,
                    aucc: r.aucc,
                    beta: r.beta_skew,
                    aucc_ratio: r.aucc_ratio,
                },
                _ => Fit::FAILED,
            }
        }
        AnyMethod::Classic(c) => {
            let result = match (c, tau2) {
                (ClassicMethod::Fixed, _) => fixed_effect(studies, level),
                (_, None) => return Fit::FAILED,
                (ClassicMethod::Dl, Some(t)) => dl_with_tau2(studies, level, t),
                (ClassicMethod::Hk, Some(t)) => hk_with_tau2(studies, level, t),
            };
            match result {
                Ok(r) => Fit {
                    converged: true,
                    estimate: r.estimate,
                    lower: r.lower,
                    upper: r.upper,
                    aucc: f64::NAN,
                    beta: 0.0,
                    aucc_ratio: f64::NAN,
                },
                Err(_) => Fit::FAILED,
            }
        }
    }
}

fn replicate(scenario: &SimScenario, methods: &[AnyMethod], rep: u64) -> Result<Replicate> {
    let studies = generate_dataset(scenario, rep)?;
    let tau2 = if studies.len() >= 2 {
        tau2_reml(&studies)
            .ok()
            .filter(|h| h.converged)
            .map(|h| h.tau2)
    } else {
        Some(0.0)
    };
    let estimates: Vec<f64> = studies.iter().map(|s| s.estimate).collect();
    let extra = match scenario.adjust {
        Adjust::None => 0.0,
        Adjust::AdditiveReml => tau2.unwrap_or(f64::NAN),
    };
    let weights: Vec<f64> = studies
        .iter()
        .map(|s| 1.0 / (s.variance() + extra))
        .collect();
    let gamma = gamma_weighted_skewness(&estimates, &weights).unwrap_or(f64::NAN);
    let fits = methods
        .iter()
        .map(|&m| fit_method(m, &studies, tau2, scenario))
        .collect();
    Ok(Replicate { gamma, fits })
}

/// Performance of one method in one scenario.
///
/// Coverage, bias and width use converged repetitions only. Quantities
/// that do not apply (AUCC and kappa for the classical methods) are NaN.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: AnyMethod,
    pub n_converged: usize,
    pub convergence_rate: f64,
    pub coverage_mean: f64,
    pub coverage_mean_mcse: f64,
    pub coverage_median: f64,
    pub coverage_median_mcse: f64,
    pub bias_mean: f64,
    pub bias_median: f64,
    /// Shared by both bias columns: sd(estimate) / sqrt(n).
    pub bias_mcse: f64,
    pub width: f64,
    pub width_mcse: f64,
    pub aucc: f64,
    pub beta_mean: f64,
    pub beta_median: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub kappa_beta_gamma: f64,
    pub kappa_ratio_gamma: f64,
    pub corr_beta_gamma: f64,
}

/// All method summaries of one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    pub scenario: SimScenario,
    pub tau2: f64,
    pub estimand_mean: f64,
    pub estimand_median: f64,
    pub methods: Vec<MethodSummary>,
}

impl SimSummary {
    pub fn get(&self, method: AnyMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn proportion(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let c = hits as f64 / n as f64;
    (c, (c * (1.0 - c) / n as f64).sqrt())
}

fn kappa_vs_gamma(x: &[f64], gamma: &[f64]) -> f64 {
    let (a, b): (Vec<i8>, Vec<i8>) = x
        .iter()
        .zip(gamma)
        .filter(|(v, g)| v.is_finite() && g.is_finite())
        .map(|(v, g)| (sign_class(*v), sign_class(*g)))
        .unzip();
    cohen_kappa(&a, &b).map(|k| k.kappa).unwrap_or(f64::NAN)
}

fn summarize(
    method: AnyMethod,
    idx: usize,
    reps: &[Replicate],
    mean_target: f64,
    median_target: f64,
) -> MethodSummary {
    let n_sim = reps.len();
    let fits: Vec<(&Fit, f64)> = reps
        .iter()
        .map(|r| (&r.fits[idx], r.gamma))
        .filter(|(f, _)| f.converged)
        .collect();
    let n = fits.len();
    let covers = |t: f64| {
        fits.iter()
            .filter(|(f, _)| f.lower <= t && t <= f.upper)
            .count()
    };
    let (coverage_mean, coverage_mean_mcse) = proportion(covers(mean_target), n);
    let (coverage_median, coverage_median_mcse) = proportion(covers(median_target), n);
    let estimates: Vec<f64> = fits.iter().map(|(f, _)| f.estimate).collect();
    let widths: Vec<f64> = fits.iter().map(|(f, _)| f.upper - f.lower).collect();
    let betas: Vec<f64> = fits
        .iter()
        .map(|(f, _)| f.beta)
        .filter(|b| b.is_finite())
        .collect();
    let auccs: Vec<f64> = fits
        .iter()
        .map(|(f, _)| f.aucc)
        .filter(|a| a.is_finite())
        .collect();
    let root_n = (n as f64).sqrt();
    let combined = matches!(method, AnyMethod::Combined(_));
    let (kappa_beta_gamma, kappa_ratio_gamma, corr_beta_gamma) = if combined {
        let beta_all: Vec<f64> = fits.iter().map(|(f, _)| f.beta).collect();
        let ratio_all: Vec<f64> = fits.iter().map(|(f, _)| f.aucc_ratio).collect();
        let gamma_all: Vec<f64> = fits.iter().map(|(_, g)| *g).collect();
        let (bx, gy): (Vec<f64>, Vec<f64>) = beta_all
            .iter()
            .zip(&gamma_all)
            .filter(|(b, g)| b.is_finite() && g.is_finite())
            .map(|(b, g)| (*b, *g))
            .unzip();
        (
            kappa_vs_gamma(&beta_all, &gamma_all),
            kappa_vs_gamma(&ratio_all, &gamma_all),
            pearson_correlation(&bx, &gy).unwrap_or(f64::NAN),
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    MethodSummary {
        method,
        n_converged: n,
        convergence_rate: n as f64 / n_sim as f64,
        coverage_mean,
        coverage_mean_mcse,
        coverage_median,
        coverage_median_mcse,
        bias_mean: mean(&estimates) - mean_target,
        bias_median: mean(&estimates) - median_target,
        bias_mcse: sd(&estimates) / root_n,
        width: mean(&widths),
        width_mcse: sd(&widths) / root_n,
        aucc: mean(&auccs),
        beta_mean: mean(&betas),
        beta_median: median(&betas),
        beta_min: betas.iter().copied().fold(f64::NAN, f64::min),
        beta_max: betas.iter().copied().fold(f64::NAN, f64::max),
        kappa_beta_gamma,
        kappa_ratio_gamma,
        corr_beta_gamma,
    }
}

/// Run `scenario.n_sim` repetitions of every method.
///
/// `threads = None` uses the global rayon pool; the result does not depend
/// on the choice.
pub fn run_scenario(
    scenario: &SimScenario,
    methods: &[AnyMethod],
    threads: Option<usize>,
) -> Result<SimSummary> {
    scenario.validate()?;
    if methods.is_empty() {
        return Err(Error::Empty("methods"));
    }
    let (estimand_mean, estimand_median) = estimands(scenario)?;
    let work = || -> Result<Vec<Replicate>> {
        (0..scenario.n_sim as u64)
            .into_par_iter()
            .map(|rep| replicate(scenario, methods, rep))
            .collect()
    };
    let reps = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|_| Error::Degenerate("could not start worker threads"))?
            .install(work)?,
        None => work()?,
    };
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(i, &m)| summarize(m, i, &reps, estimand_mean, estimand_median))
        .collect();
    Ok(SimSummary {
        scenario: *scenario,
        tau2: scenario.tau2()?,
        estimand_mean,
        estimand_median,
        methods: summaries,
    })
}

/// Methods used by default: all five combination rules, then the three
/// classical comparators.
pub fn default_methods() -> Vec<AnyMethod> {
    Method::ALL
        .into_iter()
        .map(AnyMethod::Combined)
        .chain(ClassicMethod::ALL.into_iter().map(AnyMethod::Classic))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_abs_diff_eq;

    fn scenario(k: usize, n_large: usize, i2: f64, alpha: f64, n_sim: usize) -> SimScenario {
        SimScenario::new(k, n_large, i2, alpha, n_sim, 42, Adjust::None).unwrap()
    }

    #[test]
    fn tau2_examples() {
        assert_eq!(tau2_from_i2(&[50, 50, 500], 0.0).unwrap(), 0.0);
        let eps2 = (0.04 + 0.04 + 0.004) / 3.0;
        assert_abs_diff_eq!(
            tau2_from_i2(&[50, 50, 500], 0.5).unwrap(),
            eps2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(tau2_from_i2(&[50; 10], 0.9).unwrap(), 0.36, epsilon = 1e-12);
        assert!(tau2_from_i2(&[50], 1.0).is_err());
        assert!(tau2_from_i2(&[], 0.3).is_err());
    }

    #[test]
    fn skew_params_moments() {
        assert_eq!(skew_normal_params(0.2, 0.1, 0.0).unwrap(), (0.2, 0.1));
        let (xi, omega) = skew_normal_params(0.2, 0.1, 8.0).unwrap();
        let sn = SkewNormal::new(xi, omega, 8.0).unwrap();
        let (a, b) = (xi - 40.0 * omega, xi + 40.0 * omega);
        let m = integrate(|x| x * sn.density(x), a, b, 1e-13);
        let v = integrate(|x| (x - m).powi(2) * sn.density(x), a, b, 1e-13);
        assert_abs_diff_eq!(m, 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(v.sqrt(), 0.1, epsilon = 1e-6);
        let (xi_neg, _) = skew_normal_params(0.2, 0.1, -8.0).unwrap();
        assert_abs_diff_eq!(xi_neg, 2.0 * 0.2 - xi, epsilon = 1e-15);
        assert!(skew_normal_params(0.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn estimand_examples() {
        assert_eq!(estimands(&scenario(5, 0, 0.6, 0.0, 1)).unwrap(), (0.2, 0.2));
        let s = scenario(5, 0, 0.6, 8.0, 1);
        let (m, med) = estimands(&s).unwrap();
        assert_eq!(m, 0.2);
        assert!(med < m);
        // bisection on the quadrature CDF
        let tau = s.tau2().unwrap().sqrt();
        let (xi, omega) = skew_normal_params(0.2, tau, 8.0).unwrap();
        let sn = SkewNormal::new(xi, omega, 8.0).unwrap();
        let cdf = |x: f64| integrate(|t| sn.density(t), xi - 40.0 * omega, x, 1e-13);
        let (mut lo, mut hi) = (xi - omega, xi + 3.0 * omega);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(med, 0.5 * (lo + hi), epsilon = 1e-8);
    }

    #[test]
    fn dataset_layout_and_determinism() {
        let s = scenario(5, 2, 0.3, 8.0, 1);
        let a = generate_dataset(&s, 7).unwrap();
        let b = generate_dataset(&s, 7).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.estimate.to_bits(), y.estimate.to_bits());
            assert_eq!(x.se.to_bits(), y.se.to_bits());
        }
        let c = generate_dataset(&s, 8).unwrap();
        assert_ne!(a[0].estimate, c[0].estimate);
        // large studies come first and are more precise on average
        let mut big = 0.0;
        let mut small = 0.0;
        for rep in 0..200 {
            let d = generate_dataset(&s, rep).unwrap();
            big += d[0].variance() + d[1].variance();
            small += d[2].variance() + d[3].variance();
        }
        assert!(big * 5.0 < small);
    }

    #[test]
    fn dataset_moments() {
        let s = SimScenario::new(1, 1, 0.0, 0.0, 1, 3, Adjust::None).unwrap();
        let reps = 100_000u64;
        let mean_est = (0..reps)
            .map(|r| generate_dataset(&s, r).unwrap()[0].estimate)
            .sum::<f64>()
            / reps as f64;
        assert_abs_diff_eq!(mean_est, 0.2, epsilon = 0.002);
        let small = SimScenario::new(1, 0, 0.0, 0.0, 1, 3, Adjust::None).unwrap();
        let mean_var = (0..reps)
            .map(|r| generate_dataset(&small, r).unwrap()[0].variance())
            .sum::<f64>()
            / reps as f64;
        assert_abs_diff_eq!(mean_var, 0.04, epsilon = 1e-3);
    }

    #[test]
    fn invalid_scenarios() {
        assert!(SimScenario::new(3, 4, 0.0, 0.0, 10, 1, Adjust::None).is_err());
        assert!(SimScenario::new(3, 0, 1.0, 0.0, 10, 1, Adjust::None).is_err());
        assert!(SimScenario::new(3, 0, 0.0, 0.0, 0, 1, Adjust::None).is_err());
    }

    #[test]
    fn grid_skips_impossible_cells() {
        let t = scenario(3, 0, 0.0, 0.0, 10);
        let g = scenario_grid(&[1, 3], &[0, 1, 2], &[0.0, 0.9], &[0.0], &t).unwrap();
        assert_eq!(g.len(), 2 * 2 + 3 * 2);
    }

    #[test]
    fn mcse_formula() {
        let (c, m) = proportion(10_000, 20_000);
        assert_eq!(c, 0.5);
        assert_abs_diff_eq!(m, 0.003_535_5, epsilon = 1e-7);
    }

    #[test]
    fn small_run_is_thread_independent() {
        let s = scenario(3, 1, 0.6, 8.0, 24);
        let methods = default_methods();
        let a = run_scenario(&s, &methods, Some(1)).unwrap();
        let b = run_scenario(&s, &methods, Some(4)).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        for m in &a.methods {
            assert!((0.0..=1.0).contains(&m.coverage_mean));
            if let AnyMethod::Classic(_) = m.method {
                assert_eq!(m.beta_mean, 0.0);
                assert!(m.kappa_beta_gamma.is_nan());
            }
        }
    }

    #[test]
    fn fisher_greater_matches_pearson_less() {
        let mut s = scenario(5, 0, 0.3, 0.0, 40);
        let fisher = run_scenario(&s, &[AnyMethod::Combined(Method::Fisher)], Some(2)).unwrap();
        s.orientation = Orientation::Less;
        let pearson = run_scenario(&s, &[AnyMethod::Combined(Method::Pearson)], Some(2)).unwrap();
        let (f, p) = (&fisher.methods[0], &pearson.methods[0]);
        assert_eq!(f.n_converged, p.n_converged);
        assert_eq!(f.coverage_mean, p.coverage_mean);
        assert_abs_diff_eq!(f.bias_mean, p.bias_mean, epsilon = 1e-8);
        assert_abs_diff_eq!(f.width, p.width, epsilon = 1e-8);
        assert_abs_diff_eq!(f.beta_mean, p.beta_mean, epsilon = 1e-6);
        assert_abs_diff_eq!(f.aucc, p.aucc, epsilon = 1e-6);
    }
}
