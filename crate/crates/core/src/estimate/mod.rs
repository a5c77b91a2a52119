//! Estimation: global or sequential maximum likelihood with parametric
//! Weibull margins (one-stage) or nonparametric margins (two-stage), AIC
//! model selection and parametric bootstrap standard errors.

mod bootstrap;
mod one_stage;
pub(crate) mod params;
mod two_stage;

use std::fmt;
use std::str::FromStr;

pub use bootstrap::{bootstrap_se, BootstrapSummary, CensoringDistribution};
pub use one_stage::{fit_one_stage_global, fit_one_stage_sequential, loglik_one_stage};
pub use two_stage::{fit_two_stage, loglik_two_stage};

use crate::bicop::{tau_of_theta, CopulaFamily};
use crate::data::GapDataset;
use crate::dvine::edge_of_index;
use crate::error::{Error, Result};
use crate::margins::WeibullMargin;
use crate::model::{CopulaModel, ModelSpec};
use crate::optim::NelderMeadOptions;
use params::CopulaSkeleton;

/// Nelson–Aalen total-time survival above this level at the last observed
/// time marks the data as heavily censored in the tail.
pub const HEAVY_TAIL_THRESHOLD: f64 = 0.3;

/// One-stage: parametric Weibull margins fitted jointly with the copula.
/// Two-stage: nonparametric margins first, then the copula on pseudo data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stages {
    One,
    Two,
}

impl fmt::Display for Stages {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stages::One => "one-stage",
            Stages::Two => "two-stage",
        })
    }
}

impl FromStr for Stages {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "one" | "one-stage" | "parametric" | "weibull" => Ok(Stages::One),
            "2" | "two" | "two-stage" | "nonparametric" | "semiparametric" => Ok(Stages::Two),
            other => Err(Error::Invalid(format!("unknown stages '{other}' (use 1 or 2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Global,
    Sequential,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Global => "global",
            Strategy::Sequential => "sequential",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(Strategy::Global),
            "sequential" | "seq" => Ok(Strategy::Sequential),
            other => Err(Error::Invalid(format!("unknown strategy '{other}' (use global or sequential)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub model: ModelSpec,
    pub stages: Stages,
    pub strategy: Strategy,
    pub optim: NelderMeadOptions,
}

impl FitSpec {
    pub fn new(model: ModelSpec, stages: Stages, strategy: Strategy) -> Self {
        Self { model, stages, strategy, optim: NelderMeadOptions::default() }
    }
}

/// Estimate for one pair copula (or the single Archimedean parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEstimate {
    /// Conditioned pair and conditioning set, e.g. "13;2"; "all" for an
    /// Archimedean copula.
    pub label: String,
    /// 1-based tree and position; 0 for an Archimedean copula.
    pub tree: usize,
    pub pos: usize,
    pub family: CopulaFamily,
    /// None when the data cannot identify the parameter.
    pub theta: Option<f64>,
    pub tau: Option<f64>,
}

impl EdgeEstimate {
    pub fn is_free(&self) -> bool {
        self.family != CopulaFamily::Independence && self.theta.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model_label: String,
    pub stages: Stages,
    pub strategy: Strategy,
    /// Fitted copula; non-estimable edges are independence.
    pub copula: CopulaModel,
    pub edges: Vec<EdgeEstimate>,
    /// One per gap index up to the largest cluster size; empty for two-stage.
    pub margins: Vec<WeibullMargin>,
    pub loglik: f64,
    pub initial_loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub converged: bool,
    /// Objective evaluations over all optimizer runs.
    pub iterations: usize,
    /// Two-stage only: Nelson–Aalen total-time survival at the last observation.
    pub tail_survival: Option<f64>,
    pub heavy_tail: bool,
    pub bootstrap: Option<BootstrapSummary>,
}

impl FitResult {
    pub fn free_edges(&self) -> impl Iterator<Item = (usize, &EdgeEstimate)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_free())
    }
}

pub fn aic_of(fit: &FitResult) -> f64 {
    -2.0 * fit.loglik + 2.0 * fit.n_params as f64
}

/// Index of the fit with the smallest AIC; ties go to fewer parameters, then
/// to the earlier fit.
pub fn select_by_aic(fits: &[FitResult]) -> Result<usize> {
    let first = fits.first().ok_or_else(|| Error::Invalid("no fits to compare".into()))?;
    if let Some(f) = fits.iter().find(|f| f.stages != first.stages || f.strategy != first.strategy) {
        return Err(Error::Invalid(format!(
            "cannot compare a {} {} fit with a {} {} fit",
            first.stages, first.strategy, f.stages, f.strategy
        )));
    }
    let mut best = 0;
    for (i, f) in fits.iter().enumerate().skip(1) {
        let b = &fits[best];
        let (a, ab) = (aic_of(f), aic_of(b));
        if a < ab || (a == ab && f.n_params < b.n_params) {
            best = i;
        }
    }
    Ok(best)
}

/// Fits with the method the spec asks for.
pub fn fit(data: &GapDataset, spec: &FitSpec) -> Result<FitResult> {
    match (spec.stages, spec.strategy) {
        (Stages::One, Strategy::Global) => fit_one_stage_global(data, spec),
        (Stages::One, Strategy::Sequential) => fit_one_stage_sequential(data, spec),
        (Stages::Two, s) => fit_two_stage(data, spec, s),
    }
}

pub(crate) fn skeleton_for(spec: &ModelSpec, d_data: usize) -> Result<CopulaSkeleton> {
    let d = spec.dim_for(d_data)?;
    match spec {
        ModelSpec::Archimedean { family, .. } => Ok(CopulaSkeleton::archimedean(*family, d, d_data)),
        _ => CopulaSkeleton::vine(&spec.layout_for(d_data)?.expect("vine-like spec"), d_data),
    }
}

/// "13;2"-style label of vine edge (tree, pos).
pub fn edge_label(d: usize, tree: usize, pos: usize) -> String {
    let sep = if d > 9 { "," } else { "" };
    let given: Vec<String> = (pos + 1..pos + tree).map(|v| v.to_string()).collect();
    let mut s = format!("{pos}{sep}{}", pos + tree);
    if !given.is_empty() {
        s.push(';');
        s.push_str(&given.join(sep));
    }
    s
}

pub(crate) fn edge_estimates(skeleton: &CopulaSkeleton, spec: &ModelSpec) -> Vec<EdgeEstimate> {
    match skeleton {
        CopulaSkeleton::Vine { layout, thetas, .. } => {
            let requested = match spec {
                ModelSpec::Vine(l) => l.families().to_vec(),
                _ => layout.families().to_vec(),
            };
            let d = layout.dim();
            layout
                .families()
                .iter()
                .enumerate()
                .map(|(i, &fam)| {
                    let (tree, pos) = edge_of_index(d, i);
                    let estimable = fam != CopulaFamily::Independence || requested[i] == CopulaFamily::Independence;
                    let theta = estimable.then_some(if fam == CopulaFamily::Independence { 0.0 } else { thetas[i] });
                    EdgeEstimate {
                        label: edge_label(d, tree, pos),
                        tree,
                        pos,
                        family: requested[i],
                        theta,
                        tau: theta.map(|t| tau_of_theta(fam, t).unwrap_or(f64::NAN)),
                    }
                })
                .collect()
        }
        CopulaSkeleton::Archimedean { family, theta, free, .. } => {
            let theta = free.then_some(*theta);
            vec![EdgeEstimate {
                label: "all".into(),
                tree: 0,
                pos: 0,
                family: *family,
                theta,
                tau: theta.map(|t| tau_of_theta(*family, t).unwrap_or(f64::NAN)),
            }]
        }
    }
}
