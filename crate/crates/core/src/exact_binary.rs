//! Exact mid-p one-sided p-value functions for 2x2 tables.
//!
//! Conditioning on both margins, the treated-arm event count follows
//! Fisher's noncentral hypergeometric distribution with odds ratio
//! `psi = exp(mu)`. The mid-p value counts half of the observed atom, so the
//! "greater" and "less" p-values still sum to one.

use serde::{Deserialize, Serialize};

use crate::combine::{Method, PValueFunction};
use crate::effects::{Counts, OneSided, Orientation};
use crate::error::{Error, Result};
use crate::special::NcHypergeom;

/// A 2x2 table: `a`/`b` treated events/non-events, `c`/`d` control
/// events/non-events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Result<Self> {
        let table = Self { a, b, c, d };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        if self.a + self.b == 0 || self.c + self.d == 0 {
            return Err(Error::InfeasibleTable(
                "both arms need at least one participant".into(),
            ));
        }
        Ok(())
    }

    pub fn n_treat(&self) -> u64 {
        self.a + self.b
    }

    pub fn n_ctrl(&self) -> u64 {
        self.c + self.d
    }

    pub fn events(&self) -> u64 {
        self.a + self.c
    }
}

impl TryFrom<Counts> for Table2x2 {
    type Error = Error;

    fn try_from(c: Counts) -> Result<Self> {
        let (a, b, c, d) = c.cells();
        Table2x2::new(a, b, c, d)
    }
}

/// A table with its conditional distribution precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactTable {
    table: Table2x2,
    dist: NcHypergeom,
}

impl ExactTable {
    pub fn new(table: Table2x2) -> Result<Self> {
        table.validate()?;
        let dist = NcHypergeom::new(table.n_treat(), table.n_ctrl(), table.events())?;
        Ok(Self { table, dist })
    }

    pub fn table(&self) -> Table2x2 {
        self.table
    }

    /// Mid-p values at log odds ratio `mu`, oriented as requested.
    pub fn midp(&self, mu: f64, orientation: Orientation) -> OneSided {
        let (lo, _) = self.dist.support();
        let probs = self.dist.pmf_all(mu);
        let obs = (self.table.a - lo) as usize;
        let below: f64 = probs[..obs].iter().sum();
        let at = probs[obs];
        let above: f64 = probs[obs + 1..].iter().sum();
        let greater = OneSided {
            p: above + 0.5 * at,
            q: below + 0.5 * at,
        };
        match orientation {
            Orientation::Greater => greater,
            Orientation::Less => greater.flipped(),
        }
    }

    /// Log odds ratio and Woolf SE with 0.5 added to every cell; only used
    /// to place initial root-finding brackets.
    pub(crate) fn rough_log_or(&self) -> (f64, f64) {
        let Table2x2 { a, b, c, d } = self.table;
        let (a, b, c, d) = (
            a as f64 + 0.5,
            b as f64 + 0.5,
            c as f64 + 0.5,
            d as f64 + 0.5,
        );
        (
            (a * d / (b * c)).ln(),
            (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt(),
        )
    }
}

/// Exact mid-p one-sided p-value of `table` at log odds ratio `mu`.
pub fn exact_midp(table: &Table2x2, mu: f64, orientation: Orientation) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::NonFinite {
            name: "mu",
            value: mu,
        });
    }
    Ok(ExactTable::new(*table)?.midp(mu, orientation).p)
}

/// Combined p-value function over exact mid-p inputs (no heterogeneity
/// adjustment).
pub fn make_exact_pfunction(
    tables: &[Table2x2],
    method: Method,
    orientation: Orientation,
) -> Result<PValueFunction> {
    let tables = tables
        .iter()
        .map(|t| ExactTable::new(*t))
        .collect::<Result<Vec<_>>>()?;
    PValueFunction::exact(tables, method, orientation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn orientations_sum_to_one() {
        let t = Table2x2::new(6, 9, 2, 12).unwrap();
        for i in -40..=40 {
            let mu = f64::from(i) / 10.0;
            let g = exact_midp(&t, mu, Orientation::Greater).unwrap();
            let l = exact_midp(&t, mu, Orientation::Less).unwrap();
            assert_abs_diff_eq!(g + l, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_support() {
        let t = Table2x2::new(0, 5, 0, 8).unwrap();
        assert_eq!(exact_midp(&t, 0.7, Orientation::Greater).unwrap(), 0.5);
        assert_eq!(exact_midp(&t, -3.0, Orientation::Less).unwrap(), 0.5);
        let f = make_exact_pfunction(&[t], Method::Fisher, Orientation::Greater).unwrap();
        for mu in [-4.0, 0.0, 2.5] {
            assert_abs_diff_eq!(f.evaluate(mu), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn dexa_central_enumeration() {
        // a=2,b=5,c=2,d=10: n1=7, n0=12, t=4
        let t = Table2x2::new(2, 5, 2, 10).unwrap();
        let total = binom(19, 4);
        let pmf: Vec<f64> = (0..=4)
            .map(|x| binom(7, x) * binom(12, 4 - x) / total)
            .collect();
        let greater = pmf[3] + pmf[4] + 0.5 * pmf[2];
        let less = pmf[0] + pmf[1] + 0.5 * pmf[2];
        assert_abs_diff_eq!(
            exact_midp(&t, 0.0, Orientation::Greater).unwrap(),
            greater,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            exact_midp(&t, 0.0, Orientation::Less).unwrap(),
            less,
            epsilon = 1e-14
        );
    }

    #[test]
    fn greater_midp_increases_with_mu() {
        let t = Table2x2::new(11, 64, 20, 53).unwrap();
        let mut prev = 0.0;
        for i in -60..=60 {
            let p = exact_midp(&t, f64::from(i) / 10.0, Orientation::Greater).unwrap();
            assert!(p >= prev - 1e-15);
            prev = p;
        }
    }

    #[test]
    fn infeasible_table() {
        assert!(Table2x2::new(0, 0, 1, 1).is_err());
        assert!(exact_midp(
            &Table2x2 {
                a: 1,
                b: 1,
                c: 0,
                d: 0
            },
            0.0,
            Orientation::Less
        )
        .is_err());
        assert!(make_exact_pfunction(&[], Method::Edgington, Orientation::Less).is_err());
    }

    #[test]
    fn edgington_exact_orientation_invariant() {
        let tables = [
            Table2x2::new(2, 5, 2, 10).unwrap(),
            Table2x2::new(6, 9, 2, 12).unwrap(),
        ];
        let g = make_exact_pfunction(&tables, Method::Edgington, Orientation::Greater).unwrap();
        let l = make_exact_pfunction(&tables, Method::Edgington, Orientation::Less).unwrap();
        for i in -20..=20 {
            let mu = f64::from(i) / 10.0;
            assert_abs_diff_eq!(g.evaluate(mu), 1.0 - l.evaluate(mu), epsilon = 1e-12);
        }
    }
}
