//! The five p-value combination rules and their lift to p-value functions
//! of the pooled effect `mu`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::effects::{one_sided, z_unchecked, OneSided, Orientation, Study};
use crate::error::{Error, Result};
use crate::exact_binary::ExactTable;
use crate::special::{chi2_cdf, chi2_sf, irwin_hall_cdf};

/// Floor applied to p-values before taking logarithms.
const LOG_FLOOR: f64 = 1e-300;

/// A p-value combination rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Sum of p-values, referred to the Irwin-Hall distribution.
    Edgington,
    /// `-2 sum log p`, chi-squared upper tail.
    Fisher,
    /// `-2 sum log(1 - p)`, chi-squared lower tail.
    Pearson,
    /// Smallest p-value.
    Tippett,
    /// Largest p-value.
    Wilkinson,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Edgington,
        Method::Fisher,
        Method::Pearson,
        Method::Tippett,
        Method::Wilkinson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Edgington => "edgington",
            Method::Fisher => "fisher",
            Method::Pearson => "pearson",
            Method::Tippett => "tippett",
            Method::Wilkinson => "wilkinson",
        }
    }

    /// The rule whose opposite-orientation p-value function is the
    /// complement of this one.
    pub fn mirror(self) -> Method {
        match self {
            Method::Edgington => Method::Edgington,
            Method::Fisher => Method::Pearson,
            Method::Pearson => Method::Fisher,
            Method::Tippett => Method::Wilkinson,
            Method::Wilkinson => Method::Tippett,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown combination method `{s}`"))
    }
}

/// Combine one-sided p-values with `method`.
pub fn combine_p(method: Method, p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Empty("no p-values to combine"));
    }
    if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRange {
            name: "p",
            value: bad,
            expected: "0 <= p <= 1",
        });
    }
    Ok(combine_pairs(
        method,
        p.iter().map(|&v| OneSided::from_p(v)),
    ))
}

/// Combine p-values carried together with their complements.
///
/// The iterator must be non-empty and yield valid probabilities.
pub fn combine_pairs<I>(method: Method, inputs: I) -> f64
where
    I: IntoIterator<Item = OneSided>,
{
    let mut k: u32 = 0;
    let mut acc = 0.0;
    let mut at_boundary = false;
    let mut max_p = 0.0f64;
    let mut max_q = 0.0f64;
    for OneSided { p, q } in inputs {
        k += 1;
        match method {
            Method::Edgington => acc += p,
            Method::Fisher => {
                at_boundary |= p == 0.0;
                acc += p.max(LOG_FLOOR).ln();
            }
            Method::Pearson => {
                at_boundary |= q == 0.0;
                acc += q.max(LOG_FLOOR).ln();
            }
            Method::Tippett => max_q = max_q.max(q),
            Method::Wilkinson => max_p = max_p.max(p),
        }
    }
    debug_assert!(k > 0, "combine_pairs needs at least one input");
    let df = 2.0 * f64::from(k);
    let value = match method {
        Method::Edgington => irwin_hall_cdf(acc, k).expect("k >= 1"),
        Method::Fisher if at_boundary => 0.0,
        Method::Fisher => chi2_sf(-2.0 * acc, df).expect("valid chi-squared argument"),
        Method::Pearson if at_boundary => 1.0,
        Method::Pearson => chi2_cdf(-2.0 * acc, df).expect("valid chi-squared argument"),
        // 1 - (1 - min p)^k = 1 - (max q)^k
        Method::Tippett if max_q == 0.0 => 1.0,
        Method::Tippett => -(f64::from(k) * max_q.ln()).exp_m1(),
        Method::Wilkinson => max_p.powi(k as i32),
    };
    value.clamp(0.0, 1.0)
}

#[derive(Debug, Clone)]
pub(crate) enum Source {
    Normal {
        studies: Vec<Study>,
        tau2: f64,
        phi: f64,
    },
    Exact {
        tables: Vec<ExactTable>,
    },
}

/// A combined p-value function `mu -> p(mu)`.
///
/// Immutable after construction and cheap to evaluate; monotone increasing
/// in `mu` for [`Orientation::Greater`] and decreasing for
/// [`Orientation::Less`].
#[derive(Debug, Clone)]
pub struct PValueFunction {
    source: Source,
    method: Method,
    orientation: Orientation,
}

/// Build the normal-theory p-value function for `studies`.
///
/// `tau2 > 0` applies additive heterogeneity, `phi > 1` multiplicative;
/// at most one of them may be active.
pub fn make_pfunction(
    studies: &[Study],
    method: Method,
    orientation: Orientation,
    tau2: f64,
    phi: f64,
) -> Result<PValueFunction> {
    PValueFunction::normal(studies.to_vec(), method, orientation, tau2, phi)
}

impl PValueFunction {
    pub fn normal(
        studies: Vec<Study>,
        method: Method,
        orientation: Orientation,
        tau2: f64,
        phi: f64,
    ) -> Result<Self> {
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
        if !(phi >= 1.0 && phi.is_finite()) {
            return Err(Error::OutOfRange {
                name: "phi",
                value: phi,
                expected: "finite and >= 1",
            });
        }
        if tau2 > 0.0 && phi > 1.0 {
            return Err(Error::ConflictingAdjustment);
        }
        for s in &studies {
            if !(s.se > 0.0 && s.se.is_finite() && s.estimate.is_finite()) {
                return Err(Error::OutOfRange {
                    name: "se",
                    value: s.se,
                    expected: "finite and > 0",
                });
            }
        }
        Ok(Self {
            source: Source::Normal { studies, tau2, phi },
            method,
            orientation,
        })
    }

    pub(crate) fn exact(
        tables: Vec<ExactTable>,
        method: Method,
        orientation: Orientation,
    ) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::TooFewStudies { needed: 1, got: 0 });
        }
        Ok(Self {
            source: Source::Exact { tables },
            method,
            orientation,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Number of combined studies.
    pub fn k(&self) -> usize {
        match &self.source {
            Source::Normal { studies, .. } => studies.len(),
            Source::Exact { tables } => tables.len(),
        }
    }

    /// Studies behind a normal-theory function; `None` for exact functions.
    pub fn studies(&self) -> Option<&[Study]> {
        match &self.source {
            Source::Normal { studies, .. } => Some(studies),
            Source::Exact { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.source, Source::Exact { .. })
    }

    /// Same inputs, different rule and/or orientation.
    pub fn with(&self, method: Method, orientation: Orientation) -> Self {
        Self {
            source: self.source.clone(),
            method,
            orientation,
        }
    }

    /// Study-level one-sided p-values at `mu`.
    pub fn inputs(&self, mu: f64) -> Vec<OneSided> {
        self.inputs_iter(mu).collect()
    }

    fn inputs_iter(&self, mu: f64) -> Box<dyn Iterator<Item = OneSided> + '_> {
        let orientation = self.orientation;
        match &self.source {
            Source::Normal { studies, tau2, phi } => Box::new(studies.iter().map(move |s| {
                one_sided(
                    z_unchecked(s.estimate, s.se * s.se, mu, *tau2, *phi),
                    orientation,
                )
            })),
            Source::Exact { tables } => {
                Box::new(tables.iter().map(move |t| t.midp(mu, orientation)))
            }
        }
    }

    /// Combined one-sided p-value at `mu`.
    pub fn evaluate(&self, mu: f64) -> f64 {
        match &self.source {
            // avoid the boxed iterator on the hot path
            Source::Normal { studies, tau2, phi } => combine_pairs(
                self.method,
                studies.iter().map(|s| {
                    one_sided(
                        z_unchecked(s.estimate, s.se * s.se, mu, *tau2, *phi),
                        self.orientation,
                    )
                }),
            ),
            Source::Exact { .. } => combine_pairs(self.method, self.inputs_iter(mu)),
        }
    }

    /// Confidence curve `2 min{p(mu), 1 - p(mu)}`.
    pub fn centrality(&self, mu: f64) -> f64 {
        let p = self.evaluate(mu);
        2.0 * p.min(1.0 - p)
    }

    /// Location and scale used to seed root-finding brackets:
    /// `(min estimate, max estimate, max effective se)`.
    pub fn spread(&self) -> (f64, f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut scale: f64 = 0.0;
        match &self.source {
            Source::Normal { studies, tau2, phi } => {
                for s in studies {
                    lo = lo.min(s.estimate);
                    hi = hi.max(s.estimate);
                    scale = scale.max((phi * s.se * s.se + tau2).sqrt());
                }
            }
            Source::Exact { tables } => {
                for t in tables {
                    let (est, se) = t.rough_log_or();
                    lo = lo.min(est);
                    hi = hi.max(est);
                    scale = scale.max(se);
                }
            }
        }
        (lo, hi, scale)
    }

    /// Initial bracket `[min est - 10 se, max est + 10 se]`.
    pub fn initial_bracket(&self) -> (f64, f64) {
        let (lo, hi, scale) = self.spread();
        (lo - 10.0 * scale, hi + 10.0 * scale)
    }
}
