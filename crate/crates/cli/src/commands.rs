//! The four subcommands, each producing a table.

use confcurve::classic::{hk_with_tau2, ClassicResult};
use confcurve::heterogeneity::{self, phi_multiplicative};
use confcurve::simulate::{run_scenario, scenario_grid, Adjust, SimScenario};
use confcurve::special::{norm_cdf, student_t_cdf};
use confcurve::{
    analyze, confidence_density, dl_random_effects, fixed_effect, make_exact_pfunction,
    make_pfunction, median_estimate, AnyMethod, ClassicMethod, Grid, Method, Orientation,
    PValueFunction, Study, Tau2Method,
};

use crate::input::Dataset;
use crate::output::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Het {
    None,
    Additive,
    Multiplicative,
}

/// Settings shared by analyze, drapery and density.
#[derive(Debug, Clone)]
pub struct Settings {
    pub methods: Vec<AnyMethod>,
    pub orientation: Orientation,
    pub level: f64,
    pub het: Het,
    pub tau2: Tau2Method,
    pub exact: bool,
}

/// Everything derived from the data once: normal-theory studies (absent
/// for exact analyses of tables with zero cells), the heterogeneity
/// adjustment and the p-value function factory.
struct Prepared {
    studies: Option<Vec<Study>>,
    tables: Option<Vec<confcurve::Table2x2>>,
    tau2: f64,
    phi: f64,
}

fn prepare(data: &Dataset, s: &Settings) -> Result<Prepared, CliError> {
    if s.exact && s.het != Het::None {
        return Err(CliError::Input(
            "--exact cannot be combined with a heterogeneity adjustment; use --het none".into(),
        ));
    }
    let (studies, tables) = if s.exact {
        (data.studies().ok(), Some(data.tables()?))
    } else {
        (Some(data.studies()?), None)
    };
    let (mut tau2, mut phi) = (0.0, 1.0);
    if let Some(st) = studies.as_ref().filter(|st| st.len() >= 2) {
        match s.het {
            Het::None => {}
            Het::Additive => {
                tau2 = heterogeneity::estimate(st, s.tau2)
                    .map_err(CliError::internal)?
                    .tau2
            }
            Het::Multiplicative => {
                let q = heterogeneity::cochran_q(st).map_err(CliError::internal)?;
                phi = phi_multiplicative(q, st.len());
            }
        }
    }
    Ok(Prepared {
        studies,
        tables,
        tau2,
        phi,
    })
}

impl Prepared {
    fn pfunction(
        &self,
        method: Method,
        orientation: Orientation,
    ) -> Result<PValueFunction, CliError> {
        match (&self.tables, &self.studies) {
            (Some(t), _) => {
                make_exact_pfunction(t, method, orientation).map_err(CliError::internal)
            }
            (None, Some(st)) => make_pfunction(st, method, orientation, self.tau2, self.phi)
                .map_err(CliError::internal),
            (None, None) => Err(CliError::Internal("no usable study data".into())),
        }
    }

    fn classic(&self, method: ClassicMethod, s: &Settings) -> Option<ClassicResult> {
        let st = self.studies.as_ref()?;
        match method {
            ClassicMethod::Fixed => fixed_effect(st, s.level).ok(),
            ClassicMethod::Dl => dl_random_effects(st, s.level, s.tau2).ok(),
            ClassicMethod::Hk => {
                if st.len() < 2 {
                    return None;
                }
                let tau2 = heterogeneity::estimate(st, s.tau2).ok()?.tau2;
                hk_with_tau2(st, s.level, tau2).ok()
            }
        }
    }
}

pub const ANALYZE_COLUMNS: [&str; 12] = [
    "method",
    "estimate",
    "lower",
    "upper",
    "p_value",
    "width",
    "aucc",
    "ci_skewness",
    "aucc_ratio",
    "converged",
    "tau2",
    "phi",
];

/// One row per method. The flag is false when some method did not
/// converge.
pub fn analyze_table(data: &Dataset, s: &Settings) -> Result<(Table, bool), CliError> {
    let prep = prepare(data, s)?;
    let mut table = Table::new(&ANALYZE_COLUMNS);
    let mut all_ok = true;
    for &m in &s.methods {
        let row: Vec<Cell> = match m {
            AnyMethod::Combined(method) => {
                let f = prep.pfunction(method, s.orientation)?;
                let r = analyze(&f, s.level).map_err(CliError::internal)?;
                all_ok &= r.converged;
                vec![
                    m.as_str().into(),
                    r.estimate.into(),
                    r.lower.into(),
                    r.upper.into(),
                    r.p_null.into(),
                    r.width.into(),
                    r.aucc.into(),
                    r.beta_skew.into(),
                    r.aucc_ratio.into(),
                    r.converged.into(),
                    prep.tau2.into(),
                    prep.phi.into(),
                ]
            }
            AnyMethod::Classic(c) => match prep.classic(c, s) {
                Some(r) => vec![
                    m.as_str().into(),
                    r.estimate.into(),
                    r.lower.into(),
                    r.upper.into(),
                    r.p_null.into(),
                    r.width().into(),
                    f64::NAN.into(),
                    0.0.into(),
                    f64::NAN.into(),
                    true.into(),
                    r.tau2_used.into(),
                    1.0.into(),
                ],
                None => {
                    all_ok = false;
                    let mut row: Vec<Cell> = vec![m.as_str().into()];
                    row.extend(std::iter::repeat_n(Cell::Num(f64::NAN), 8));
                    row.push(false.into());
                    row.push(f64::NAN.into());
                    row.push(f64::NAN.into());
                    row
                }
            },
        };
        table.push(row);
    }
    Ok((table, all_ok))
}

fn default_grid(prep: &Prepared) -> Result<Grid, CliError> {
    let (lo, hi, scale) = match (&prep.studies, &prep.tables) {
        (Some(st), _) => {
            let lo = st.iter().map(|x| x.estimate).fold(f64::INFINITY, f64::min);
            let hi = st
                .iter()
                .map(|x| x.estimate)
                .fold(f64::NEG_INFINITY, f64::max);
            let scale = st.iter().map(|x| x.se).fold(0.0, f64::max);
            (lo, hi, scale)
        }
        (None, Some(t)) => {
            let f = make_exact_pfunction(t, Method::Edgington, Orientation::Greater)
                .map_err(CliError::internal)?;
            f.spread()
        }
        (None, None) => return Err(CliError::Internal("no usable study data".into())),
    };
    Grid::new(lo - 3.0 * scale, hi + 3.0 * scale, 501).map_err(CliError::internal)
}

fn classic_curve(r: &ClassicResult, k: usize, mu: f64) -> f64 {
    if r.se == 0.0 {
        return if mu == r.estimate { 1.0 } else { 0.0 };
    }
    let t = -((mu - r.estimate) / r.se).abs();
    match r.method {
        ClassicMethod::Hk => 2.0 * student_t_cdf(t, (k - 1) as f64).unwrap_or(f64::NAN),
        _ => 2.0 * norm_cdf(t),
    }
}

pub const DRAPERY_COLUMNS: [&str; 3] = ["mu", "series_id", "value"];

/// Long-format confidence curves: one series per study and per method.
/// Each method's series also contains its point estimate.
pub fn drapery_table(
    data: &Dataset,
    s: &Settings,
    grid: Option<Grid>,
) -> Result<(Table, bool), CliError> {
    let prep = prepare(data, s)?;
    let grid = match grid {
        Some(g) => g,
        None => default_grid(&prep)?,
    };
    let base: Vec<f64> = grid.values().collect();
    let mut table = Table::new(&DRAPERY_COLUMNS);
    let mut all_ok = true;
    let mut emit = |series: String, points: &[f64], curve: &dyn Fn(f64) -> f64| {
        for &mu in points {
            table.push(vec![
                mu.into(),
                series.clone().into(),
                curve(mu).clamp(0.0, 1.0).into(),
            ]);
        }
    };
    let ids = data.ids();
    for (i, id) in ids.iter().enumerate() {
        let single = match (&prep.tables, &prep.studies) {
            (Some(t), _) => make_exact_pfunction(&t[i..=i], Method::Edgington, s.orientation),
            (None, Some(st)) => make_pfunction(
                &st[i..=i],
                Method::Edgington,
                s.orientation,
                prep.tau2,
                prep.phi,
            ),
            (None, None) => unreachable!("prepare always yields data"),
        }
        .map_err(CliError::internal)?;
        emit(format!("study:{id}"), &base, &|mu| single.centrality(mu));
    }
    let with_point = |x: f64| -> Vec<f64> {
        let mut v = base.clone();
        if x.is_finite() {
            let pos = v.partition_point(|&g| g < x);
            if v.get(pos) != Some(&x) {
                v.insert(pos, x);
            }
        }
        v
    };
    for &m in &s.methods {
        match m {
            AnyMethod::Combined(method) => {
                let f = prep.pfunction(method, s.orientation)?;
                let est = match median_estimate(&f) {
                    Ok(e) => e,
                    Err(_) => {
                        all_ok = false;
                        f64::NAN
                    }
                };
                emit(format!("method:{m}"), &with_point(est), &|mu| {
                    f.centrality(mu)
                });
            }
            AnyMethod::Classic(c) => match prep.classic(c, s) {
                Some(r) => {
                    let k = data.len();
                    emit(format!("method:{m}"), &with_point(r.estimate), &|mu| {
                        classic_curve(&r, k, mu)
                    });
                }
                None => all_ok = false,
            },
        }
    }
    Ok((table, all_ok))
}

pub const DENSITY_COLUMNS: [&str; 2] = ["mu", "density"];

pub fn density_table(
    data: &Dataset,
    s: &Settings,
    grid: Option<Grid>,
) -> Result<(Table, bool), CliError> {
    let method = match s.methods.as_slice() {
        [AnyMethod::Combined(m)] => *m,
        _ => {
            return Err(CliError::Input(
                "density needs exactly one combination method, e.g. --method edgington".into(),
            ))
        }
    };
    let prep = prepare(data, s)?;
    let f = prep.pfunction(method, s.orientation)?;
    let mut table = Table::new(&DENSITY_COLUMNS);
    match confidence_density(&f, grid) {
        Ok(points) => {
            for (mu, d) in points {
                table.push(vec![mu.into(), d.into()]);
            }
            Ok((table, true))
        }
        Err(confcurve::Error::NoConvergence(_)) => Ok((table, false)),
        Err(e) => Err(CliError::internal(e)),
    }
}

/// Factor levels of a simulation run.
#[derive(Debug, Clone)]
pub struct SimSettings {
    pub ks: Vec<usize>,
    pub n_large: Vec<usize>,
    pub i2: Vec<f64>,
    pub shape: Vec<f64>,
    pub theta: f64,
    pub n_sim: usize,
    pub seed: u64,
    pub adjust: Adjust,
    pub level: f64,
    pub orientation: Orientation,
    pub methods: Vec<AnyMethod>,
    pub threads: Option<usize>,
}

pub const SIMULATE_COLUMNS: [&str; 34] = [
    "scenario",
    "k",
    "n_large",
    "i2",
    "shape",
    "theta",
    "adjust",
    "n_sim",
    "seed",
    "tau2",
    "estimand_mean",
    "estimand_median",
    "method",
    "n_converged",
    "convergence_rate",
    "coverage_mean",
    "coverage_mean_mcse",
    "coverage_median",
    "coverage_median_mcse",
    "bias_mean",
    "bias_median",
    "bias_mcse",
    "width",
    "width_mcse",
    "aucc",
    "beta_mean",
    "beta_median",
    "beta_min",
    "beta_max",
    "kappa_beta_gamma",
    "kappa_ratio_gamma",
    "corr_beta_gamma",
    "level",
    "alternative",
];

pub fn simulate_table(cfg: &SimSettings) -> Result<(Table, bool), CliError> {
    let template = SimScenario {
        k: 1,
        n_large: 0,
        i2: 0.0,
        theta: cfg.theta,
        alpha: 0.0,
        n_sim: cfg.n_sim,
        base_seed: cfg.seed,
        adjust: cfg.adjust,
        level: cfg.level,
        orientation: cfg.orientation,
    };
    let scenarios = scenario_grid(&cfg.ks, &cfg.n_large, &cfg.i2, &cfg.shape, &template)
        .map_err(|e| CliError::Input(format!("invalid scenario grid: {e}")))?;
    if scenarios.is_empty() {
        return Err(CliError::Input(
            "scenario grid is empty (n_large exceeds every k?)".into(),
        ));
    }
    let mut table = Table::new(&SIMULATE_COLUMNS);
    let mut all_ok = true;
    for sc in &scenarios {
        let summary = run_scenario(sc, &cfg.methods, cfg.threads).map_err(CliError::internal)?;
        for m in &summary.methods {
            all_ok &= m.n_converged == sc.n_sim;
            table.push(vec![
                sc.id().into(),
                sc.k.into(),
                sc.n_large.into(),
                sc.i2.into(),
                sc.alpha.into(),
                sc.theta.into(),
                sc.adjust.as_str().into(),
                sc.n_sim.into(),
                sc.base_seed.into(),
                summary.tau2.into(),
                summary.estimand_mean.into(),
                summary.estimand_median.into(),
                m.method.as_str().into(),
                m.n_converged.into(),
                m.convergence_rate.into(),
                m.coverage_mean.into(),
                m.coverage_mean_mcse.into(),
                m.coverage_median.into(),
                m.coverage_median_mcse.into(),
                m.bias_mean.into(),
                m.bias_median.into(),
                m.bias_mcse.into(),
                m.width.into(),
                m.width_mcse.into(),
                m.aucc.into(),
                m.beta_mean.into(),
                m.beta_median.into(),
                m.beta_min.into(),
                m.beta_max.into(),
                m.kappa_beta_gamma.into(),
                m.kappa_ratio_gamma.into(),
                m.corr_beta_gamma.into(),
                sc.level.into(),
                sc.orientation.as_str().into(),
            ]);
        }
    }
    Ok((table, all_ok))
}
