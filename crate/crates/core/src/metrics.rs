//! Skewness and agreement diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values closer to zero than this are classified as sign 0.
pub const SIGN_ZERO: f64 = 1e-12;

/// Interval and curve skewness of one analysis next to the data skewness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewDiagnostics {
    pub beta: f64,
    pub gamma: f64,
    pub aucc_ratio: f64,
}

/// Interval skewness `(upper + lower - 2 estimate) / (upper - lower)`.
pub fn beta_skewness(estimate: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(upper > lower) {
        return Err(Error::Degenerate("interval has zero or negative width"));
    }
    if !(lower <= estimate && estimate <= upper) {
        return Err(Error::OutOfRange {
            name: "estimate",
            value: estimate,
            expected: "lower <= estimate <= upper",
        });
    }
    Ok((upper + lower - 2.0 * estimate) / (upper - lower))
}

/// Fisher's weighted skewness coefficient of `estimates` with `weights`.
pub fn gamma_weighted_skewness(estimates: &[f64], weights: &[f64]) -> Result<f64> {
    if estimates.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: weights.len(),
        });
    }
    if estimates.len() < 3 {
        return Err(Error::TooFewStudies {
            needed: 3,
            got: estimates.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::OutOfRange {
            name: "weight",
            value: w,
            expected: "finite and > 0",
        });
    }
    let sw: f64 = weights.iter().sum();
    let mean = estimates
        .iter()
        .zip(weights)
        .map(|(x, w)| w * x)
        .sum::<f64>()
        / sw;
    let (mut m2, mut m3) = (0.0, 0.0);
    for (x, w) in estimates.iter().zip(weights) {
        let d = x - mean;
        m2 += w * d * d;
        m3 += w * d * d * d;
    }
    let scale = estimates
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if m2 <= sw * (1e-14 * scale).powi(2) {
        return Err(Error::Degenerate("all estimates are equal"));
    }
    Ok(m3 * sw.sqrt() / m2.powf(1.5))
}

/// Three-way sign of `x` with a zero band of width [`SIGN_ZERO`].
pub fn sign_class(x: f64) -> i8 {
    if x.abs() < SIGN_ZERO {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Cohen's kappa and whether the chance-agreement margin was degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    /// Expected agreement was 1 (both raters used a single category).
    pub degenerate: bool,
}

/// Cohen's kappa over the categories {-1, 0, +1}.
pub fn cohen_kappa(signs_a: &[i8], signs_b: &[i8]) -> Result<Kappa> {
    if signs_a.len() != signs_b.len() {
        return Err(Error::LengthMismatch {
            left: signs_a.len(),
            right: signs_b.len(),
        });
    }
    if signs_a.is_empty() {
        return Err(Error::Empty("no ratings"));
    }
    let mut table = [[0usize; 3]; 3];
    for (&a, &b) in signs_a.iter().zip(signs_b) {
        if !(-1..=1).contains(&a) || !(-1..=1).contains(&b) {
            return Err(Error::OutOfRange {
                name: "sign",
                value: f64::from(if (-1..=1).contains(&a) { b } else { a }),
                expected: "-1, 0 or +1",
            });
        }
        table[(a + 1) as usize][(b + 1) as usize] += 1;
    }
    let n = signs_a.len() as f64;
    let observed = (0..3).map(|i| table[i][i]).sum::<usize>() as f64 / n;
    let expected: f64 = (0..3)
        .map(|i| {
            let row: usize = table[i].iter().sum();
            let col: usize = (0..3).map(|j| table[j][i]).sum();
            row as f64 * col as f64
        })
        .sum::<f64>()
        / (n * n);
    if expected >= 1.0 - 1e-15 {
        return Ok(Kappa {
            kappa: if observed >= 1.0 { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    Ok(Kappa {
        kappa: (observed - expected) / (1.0 - expected),
        degenerate: false,
    })
}

/// Sample Pearson correlation.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewStudies {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn beta_examples() {
        assert_eq!(beta_skewness(1.0, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(beta_skewness(0.0, -1.0, 3.0).unwrap(), 0.5);
        assert_abs_diff_eq!(
            beta_skewness(-0.27, -0.53, 0.18).unwrap(),
            0.27,
            epsilon = 0.01
        );
        assert!(beta_skewness(0.0, 0.0, 0.0).is_err());
        assert!(beta_skewness(5.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_abs_diff_eq!(
            gamma_weighted_skewness(&[-1.0, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert!(gamma_weighted_skewness(&[0.2, 0.2, 0.2], &[1.0, 2.0, 3.0]).is_err());
        assert!(gamma_weighted_skewness(&[0.1, 0.2], &[1.0, 2.0]).is_err());
        assert!(gamma_weighted_skewness(&[0.1, 0.2, 0.3], &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn gamma_four_point_instance() {
        let x: [f64; 4] = [0.3, -0.1, 1.2, 0.05];
        let w = [4.0, 1.0, 0.5, 9.0];
        // direct evaluation
        let sw: f64 = 14.5;
        let mean = (0.3 * 4.0 - 0.1 + 0.6 + 0.45) / sw;
        let m2: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mean).powi(2)).sum();
        let m3: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mean).powi(3)).sum();
        let expected = m3 * sw.sqrt() / m2.powf(1.5);
        assert_abs_diff_eq!(
            gamma_weighted_skewness(&x, &w).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kappa_examples() {
        let a = [1, 0, -1, 1, -1];
        assert_eq!(cohen_kappa(&a, &a).unwrap().kappa, 1.0);
        let k = cohen_kappa(&[1, 1, -1, -1], &[1, -1, 1, -1]).unwrap();
        assert_abs_diff_eq!(k.kappa, 0.0, epsilon = 1e-15);
        let d = cohen_kappa(&[1, 1, 1], &[1, 1, 1]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.kappa, 1.0);
        assert!(cohen_kappa(&[1], &[1, 0]).is_err());
        assert!(cohen_kappa(&[2], &[1]).is_err());
    }

    #[test]
    fn kappa_brute_force() {
        let a = [1, 0, -1, 1, 1, -1, 0, 0, 1, -1, 1, 1];
        let b = [1, 1, -1, 0, 1, -1, 0, -1, 1, 1, -1, 1];
        let n = a.len() as f64;
        let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / n;
        let mut chance = 0.0;
        for c in [-1i8, 0, 1] {
            let pa = a.iter().filter(|&&x| x == c).count() as f64 / n;
            let pb = b.iter().filter(|&&x| x == c).count() as f64 / n;
            chance += pa * pb;
        }
        let expected = (agree - chance) / (1.0 - chance);
        assert_abs_diff_eq!(
            cohen_kappa(&a, &b).unwrap().kappa,
            expected,
            epsilon = 1e-14
        );
    }

    #[test]
    fn correlation_examples() {
        let x = [0.1, 0.5, -0.3, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson_correlation(&x, &y).unwrap(), 1.0, epsilon = 1e-14);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson_correlation(&x, &y).unwrap(), -1.0, epsilon = 1e-14);
        // direct covariance formula
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 1.0, 4.0, 3.0];
        // cov = 0.8333.., sd_x = sd_y = 1.29099
        assert_abs_diff_eq!(pearson_correlation(&x, &y).unwrap(), 0.6, epsilon = 1e-14);
        assert!(pearson_correlation(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson_correlation(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn sign_classes() {
        assert_eq!(sign_class(0.0), 0);
        assert_eq!(sign_class(1e-13), 0);
        assert_eq!(sign_class(-1e-3), -1);
        assert_eq!(sign_class(0.2), 1);
    }

    proptest! {
        #[test]
        fn beta_affine_invariant(
            lower in -5.0f64..0.0, width in 0.1f64..5.0, frac in 0.0f64..1.0,
            a in 0.1f64..10.0, b in -10.0f64..10.0,
        ) {
            let upper = lower + width;
            let est = lower + frac * width;
            let base = beta_skewness(est, lower, upper).unwrap();
            let moved = beta_skewness(a * est + b, a * lower + b, a * upper + b).unwrap();
            prop_assert!((base - moved).abs() < 1e-9);
            prop_assert!(base.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn gamma_scale_and_shift_invariant(
            xs in proptest::collection::vec(-3.0f64..3.0, 3..12),
            ws in proptest::collection::vec(0.1f64..10.0, 12),
            c in 0.01f64..100.0, shift in -5.0f64..5.0,
        ) {
            let w = &ws[..xs.len()];
            if let Ok(g) = gamma_weighted_skewness(&xs, w) {
                let w2: Vec<f64> = w.iter().map(|v| v * c).collect();
                let x2: Vec<f64> = xs.iter().map(|v| v + shift).collect();
                let g2 = gamma_weighted_skewness(&x2, &w2).unwrap();
                prop_assert!((g - g2).abs() < 1e-6 * (1.0 + g.abs()));
            }
        }
    }
}
