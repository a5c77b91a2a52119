use crate::data::GapDataset;
use crate::dvine::{DVineModel, Status};
use crate::error::{Error, Result};
use crate::margins::WeibullMargin;
use crate::model::{CopulaModel, ModelSpec};
use crate::optim::minimize;

use super::params::{margin_of_x, x_of_margin, CopulaSkeleton};
use super::{aic_of, edge_estimates, skeleton_for, FitResult, FitSpec, Stages, Strategy};

/// Gap times with their logs, precomputed once per fit.
pub(crate) struct PrepCluster {
    ln_y: Vec<f64>,
    status: Status,
}

pub(crate) fn prepare(data: &GapDataset) -> Vec<PrepCluster> {
    data.clusters()
        .iter()
        .map(|c| PrepCluster { ln_y: c.gaps.iter().map(|y| y.ln()).collect(), status: c.status })
        .collect()
}

#[derive(Clone, Copy)]
struct MarginCache {
    lambda: f64,
    rho: f64,
    ln_lambda_rho: f64,
}

impl From<&WeibullMargin> for MarginCache {
    fn from(m: &WeibullMargin) -> Self {
        Self { lambda: m.lambda(), rho: m.rho(), ln_lambda_rho: (m.lambda() * m.rho()).ln() }
    }
}

/// One cluster's one-stage log-likelihood: Σ log f_j over observed gaps plus
/// the copula term at the survival values; a size-1 censored cluster adds
/// log S_1.
fn cluster_contrib(c: &PrepCluster, copula: &CopulaModel, m: &[MarginCache], u: &mut Vec<f64>) -> f64 {
    let size = c.ln_y.len();
    u.clear();
    let mut s = 0.0;
    for (j, (&ly, mj)) in c.ln_y.iter().zip(m).enumerate() {
        let h = mj.lambda * (mj.rho * ly).exp();
        u.push((-h).exp());
        if j + 1 < size || c.status == Status::Event {
            s += mj.ln_lambda_rho + (mj.rho - 1.0) * ly - h;
        } else if size == 1 {
            s -= h;
        }
    }
    if size == 1 {
        return s;
    }
    s + copula.cluster_loglik(u, c.status).unwrap_or(f64::NEG_INFINITY)
}

fn total(prep: &[PrepCluster], copula: &CopulaModel, margins: &[MarginCache]) -> f64 {
    let mut u = Vec::with_capacity(margins.len());
    let mut s = 0.0;
    for c in prep {
        s += cluster_contrib(c, copula, margins, &mut u);
        if !s.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    s
}

/// One-stage log-likelihood of the data under a copula and per-gap Weibull
/// margins.
pub fn loglik_one_stage(data: &GapDataset, copula: &CopulaModel, margins: &[WeibullMargin]) -> Result<f64> {
    let d = data.max_size();
    if margins.len() < d {
        return Err(Error::Invalid(format!("{} margins given for clusters of size up to {d}", margins.len())));
    }
    if d > 1 && copula.dim() < d {
        return Err(Error::Invalid(format!(
            "copula of dimension {} cannot describe clusters of size {d}",
            copula.dim()
        )));
    }
    let cache: Vec<MarginCache> = margins.iter().map(MarginCache::from).collect();
    let mut u = Vec::with_capacity(d);
    let mut s = 0.0;
    for (i, c) in prepare(data).iter().enumerate() {
        let v = cluster_contrib(c, copula, &cache, &mut u);
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "cluster {i} ('{}') has a non-finite log-likelihood contribution",
                data.clusters()[i].id
            )));
        }
        s += v;
    }
    Ok(s)
}

/// Method-of-moments start from the uncensored gaps of each index; (1, 1)
/// when that fails.
pub(crate) fn initial_margins(data: &GapDataset) -> Vec<WeibullMargin> {
    let fallback = WeibullMargin::new(1.0, 1.0).expect("valid");
    (0..data.max_size())
        .map(|j| {
            let times: Vec<f64> = data
                .clusters()
                .iter()
                .filter(|c| c.size() > j + 1 || (c.size() == j + 1 && !c.is_censored()))
                .map(|c| c.gaps[j])
                .collect();
            WeibullMargin::method_of_moments(&times).unwrap_or(fallback)
        })
        .collect()
}

fn margins_of_x(x: &[f64]) -> Option<Vec<MarginCache>> {
    x.chunks(2).map(|p| margin_of_x(p).map(|m| MarginCache::from(&m))).collect()
}

fn check_stages(spec: &FitSpec) -> Result<()> {
    if spec.stages != Stages::One {
        return Err(Error::Invalid("one-stage estimation needs parametric margins".into()));
    }
    Ok(())
}

pub fn fit_one_stage_global(data: &GapDataset, spec: &FitSpec) -> Result<FitResult> {
    check_stages(spec)?;
    let d_data = data.max_size();
    let mut skel = skeleton_for(&spec.model, d_data)?;
    let prep = prepare(data);
    let nc = skel.n_free();
    let objective = |x: &[f64]| -> f64 {
        let (Some(cop), Some(m)) = (skel.model_at(&x[..nc]), margins_of_x(&x[nc..])) else {
            return f64::INFINITY;
        };
        let ll = total(&prep, &cop, &m);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let mut x0 = skel.x0();
    for m in initial_margins(data) {
        x0.extend(x_of_margin(&m));
    }
    if !objective(&x0).is_finite() {
        let unit = x_of_margin(&WeibullMargin::new(1.0, 1.0).expect("valid"));
        x0.truncate(nc);
        for _ in 0..d_data {
            x0.extend(unit);
        }
    }
    let initial = -objective(&x0);
    let res = minimize(objective, &x0, &spec.optim);
    if !res.fx.is_finite() {
        return Err(Error::Numeric(format!(
            "one-stage likelihood of model {} is not finite anywhere the optimizer looked",
            spec.model
        )));
    }
    skel.set_x(&res.x[..nc]).expect("optimum is feasible");
    let margins = res.x[nc..].chunks(2).map(|p| margin_of_x(p).expect("optimum is feasible")).collect();
    Ok(assemble(spec, Strategy::Global, &skel, margins, -res.fx, initial, res.converged, res.evals))
}

/// Left-to-right: step j fits margin j and the pair copulas that first
/// appear with gap j (k + ℓ = j) on the clusters of size ≥ j cut to j gaps,
/// holding earlier estimates fixed.
pub fn fit_one_stage_sequential(data: &GapDataset, spec: &FitSpec) -> Result<FitResult> {
    check_stages(spec)?;
    if matches!(spec.model, ModelSpec::Archimedean { .. }) {
        return Err(Error::Unsupported(
            "sequential estimation applies to D-vines; fit Archimedean copulas globally".into(),
        ));
    }
    let d_data = data.max_size();
    let mut skel = skeleton_for(&spec.model, d_data)?;
    let CopulaSkeleton::Vine { layout, thetas, free } = &mut skel else {
        unreachable!("vine-like spec gives a vine skeleton")
    };
    let d = layout.dim();
    let init_margins = initial_margins(data);
    let initial = {
        let cop = CopulaModel::Vine(DVineModel::from_layout(layout, thetas)?);
        loglik_one_stage(data, &cop, &init_margins).unwrap_or(f64::NEG_INFINITY)
    };
    let mut margins: Vec<MarginCache> = Vec::with_capacity(d_data);
    let mut fitted_margins = Vec::with_capacity(d_data);
    let mut converged = true;
    let mut evals = 0;
    for j in 1..=d_data {
        let sub = data.truncated(j).expect("some cluster has size >= j for j <= max size");
        let prep = prepare(&sub);
        let step_edges: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&i| {
                let (tree, pos) = crate::dvine::edge_of_index(d, i);
                tree + pos == j
            })
            .collect();
        let ne = step_edges.len();
        let fams: Vec<_> = step_edges.iter().map(|&i| layout.families()[i]).collect();
        let objective = |x: &[f64]| -> f64 {
            let mut th = thetas.clone();
            for (k, &i) in step_edges.iter().enumerate() {
                match super::params::theta_of_x(fams[k], x[k], false) {
                    Some(t) => th[i] = t,
                    None => return f64::INFINITY,
                }
            }
            let Ok(vine) = DVineModel::from_layout(layout, &th) else { return f64::INFINITY };
            let Some(mj) = margin_of_x(&x[ne..]) else { return f64::INFINITY };
            let mut m = margins.clone();
            m.push(MarginCache::from(&mj));
            let ll = total(&prep, &CopulaModel::Vine(vine), &m);
            if ll.is_finite() {
                -ll
            } else {
                f64::INFINITY
            }
        };
        let mut x0: Vec<f64> =
            step_edges.iter().map(|&i| super::params::x_of_theta(layout.families()[i], thetas[i])).collect();
        x0.extend(x_of_margin(&init_margins[j - 1]));
        if !objective(&x0).is_finite() {
            x0.truncate(ne);
            x0.extend(x_of_margin(&WeibullMargin::new(1.0, 1.0).expect("valid")));
        }
        let res = minimize(objective, &x0, &spec.optim);
        if !res.fx.is_finite() {
            return Err(Error::Numeric(format!("sequential step {j} found no finite likelihood")));
        }
        converged &= res.converged;
        evals += res.evals;
        for (k, &i) in step_edges.iter().enumerate() {
            thetas[i] = super::params::theta_of_x(fams[k], res.x[k], false).expect("feasible optimum");
        }
        let mj = margin_of_x(&res.x[ne..]).expect("feasible optimum");
        margins.push(MarginCache::from(&mj));
        fitted_margins.push(mj);
    }
    let cop = skel.model().ok_or_else(|| Error::Numeric("assembled vine is invalid".into()))?;
    let loglik = loglik_one_stage(data, &cop, &fitted_margins)?;
    Ok(assemble(spec, Strategy::Sequential, &skel, fitted_margins, loglik, initial, converged, evals))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    spec: &FitSpec,
    strategy: Strategy,
    skel: &CopulaSkeleton,
    margins: Vec<WeibullMargin>,
    loglik: f64,
    initial_loglik: f64,
    converged: bool,
    iterations: usize,
) -> FitResult {
    let copula = skel.model().expect("fitted parameters are valid");
    let n_params = skel.n_free() + 2 * margins.len();
    let mut fit = FitResult {
        model_label: spec.model.label(),
        stages: Stages::One,
        strategy,
        copula,
        edges: edge_estimates(skel, &spec.model),
        margins,
        loglik,
        initial_loglik,
        n_params,
        aic: 0.0,
        converged,
        iterations,
        tail_survival: None,
        heavy_tail: false,
        bootstrap: None,
    };
    fit.aic = aic_of(&fit);
    fit
}
