use crate::bicop::{clamp_unit, BivariateCopula, CopulaFamily};
use crate::data::GapDataset;
use crate::dvine::{edge_index, Status, LOGLIK_SENTINEL};
use crate::error::{Error, Result};
use crate::margins::{dataset_jumps, pseudo_copula_data, JumpMethod};
use crate::model::{CopulaModel, ModelSpec};
use crate::optim::{minimize, NelderMeadOptions};

use super::params::{theta_of_x, x_of_theta, CopulaSkeleton};
use super::{aic_of, edge_estimates, skeleton_for, FitResult, FitSpec, Stages, Strategy, HEAVY_TAIL_THRESHOLD};

/// Copula log-likelihood of pseudo observations: log density for events,
/// log of the censored partial derivative otherwise.
pub fn loglik_two_stage(pseudo: &[Vec<f64>], statuses: &[Status], copula: &CopulaModel) -> Result<f64> {
    if pseudo.len() != statuses.len() {
        return Err(Error::Invalid("pseudo data and statuses differ in length".into()));
    }
    let mut s = 0.0;
    for (i, (u, &st)) in pseudo.iter().zip(statuses).enumerate() {
        let v = copula.cluster_loglik(u, st)?;
        if !v.is_finite() {
            return Err(Error::Numeric(format!("cluster {i} has a non-finite copula contribution")));
        }
        s += v;
    }
    Ok(s)
}

fn total(pseudo: &[Vec<f64>], statuses: &[Status], copula: &CopulaModel) -> f64 {
    let mut s = 0.0;
    for (u, &st) in pseudo.iter().zip(statuses) {
        if u.len() > 1 {
            s += copula.cluster_loglik(u, st).unwrap_or(f64::NEG_INFINITY);
        }
    }
    s
}

/// Stage 1: Nelson–Aalen pseudo copula data; stage 2: the copula by global
/// maximum likelihood or tree by tree.
pub fn fit_two_stage(data: &GapDataset, spec: &FitSpec, strategy: Strategy) -> Result<FitResult> {
    if spec.stages != Stages::Two {
        return Err(Error::Invalid("two-stage estimation needs nonparametric margins".into()));
    }
    let jumps = dataset_jumps(data, JumpMethod::NelsonAalen)?;
    let pseudo = pseudo_copula_data(data, &jumps)?;
    let statuses = data.statuses();
    let d_data = data.max_size();
    let mut skel = skeleton_for(&spec.model, d_data)?;
    let initial = skel.model().map_or(f64::NEG_INFINITY, |m| total(&pseudo, &statuses, &m));

    let (converged, evals) = match strategy {
        Strategy::Global => {
            let objective = |x: &[f64]| -> f64 {
                let Some(cop) = skel.model_at(x) else { return f64::INFINITY };
                let ll = total(&pseudo, &statuses, &cop);
                if ll.is_finite() {
                    -ll
                } else {
                    f64::INFINITY
                }
            };
            let res = minimize(objective, &skel.x0(), &spec.optim);
            if !res.fx.is_finite() {
                return Err(Error::Numeric(format!("two-stage likelihood of {} is not finite", spec.model)));
            }
            skel.set_x(&res.x).expect("feasible optimum");
            (res.converged, res.evals)
        }
        Strategy::Sequential => {
            if matches!(spec.model, ModelSpec::Archimedean { .. }) {
                return Err(Error::Unsupported(
                    "sequential estimation applies to D-vines; fit Archimedean copulas globally".into(),
                ));
            }
            tree_by_tree(&mut skel, &pseudo, &statuses, &spec.optim)?
        }
    };
    let copula = skel.model().ok_or_else(|| Error::Numeric("fitted copula is invalid".into()))?;
    let loglik = total(&pseudo, &statuses, &copula);
    let tail = jumps.tail_survival();
    let mut fit = FitResult {
        model_label: spec.model.label(),
        stages: Stages::Two,
        strategy,
        copula,
        edges: edge_estimates(&skel, &spec.model),
        margins: vec![],
        loglik,
        initial_loglik: initial,
        n_params: skel.n_free(),
        aic: 0.0,
        converged,
        iterations: evals,
        tail_survival: Some(tail),
        heavy_tail: tail > HEAVY_TAIL_THRESHOLD,
        bootstrap: None,
    };
    fit.aic = aic_of(&fit);
    Ok(fit)
}

/// Censored bivariate log-likelihood of one edge: log c(a, b) for an event,
/// log C(b | a) when b is censored.
fn edge_loglik(cop: &BivariateCopula, obs: &[(f64, f64, Status)]) -> f64 {
    obs.iter()
        .map(|&(a, b, st)| {
            let v = match st {
                Status::Event => cop.log_pdf_clamped(a, b),
                Status::Censored => cop.hfun_clamped(b, a).ln(),
            };
            if v.is_nan() || v < LOGLIK_SENTINEL {
                LOGLIK_SENTINEL
            } else {
                v
            }
        })
        .sum()
}

/// Top-down sequential fit: every edge of tree ℓ from its own censored
/// bivariate likelihood, then h-transforms feed tree ℓ + 1. A cluster of size
/// m enters edge (ℓ, k) when k + ℓ ≤ m, censored only if k + ℓ = m and its
/// last gap is censored.
fn tree_by_tree(
    skel: &mut CopulaSkeleton,
    pseudo: &[Vec<f64>],
    statuses: &[Status],
    opts: &NelderMeadOptions,
) -> Result<(bool, usize)> {
    let CopulaSkeleton::Vine { layout, thetas, .. } = skel else { unreachable!("vine skeleton") };
    let d = layout.dim();
    // per cluster: a[k] = F(u_k | between), b[k] = F(u_{k+ℓ} | between)
    let mut a: Vec<Vec<f64>> = pseudo.iter().map(|u| u[..u.len().saturating_sub(1)].to_vec()).collect();
    let mut b: Vec<Vec<f64>> = pseudo.iter().map(|u| u.get(1..).unwrap_or(&[]).to_vec()).collect();
    let mut converged = true;
    let mut evals = 0;
    for tree in 1..d {
        for pos in 1..=d - tree {
            let idx = edge_index(d, tree, pos);
            let family = layout.families()[idx];
            if family == CopulaFamily::Independence {
                continue;
            }
            let obs: Vec<(f64, f64, Status)> = pseudo
                .iter()
                .enumerate()
                .filter(|(_, u)| u.len() >= pos + tree)
                .map(|(i, u)| {
                    let st = if u.len() > pos + tree { Status::Event } else { statuses[i] };
                    (a[i][pos - 1], b[i][pos - 1], st)
                })
                .collect();
            let objective = |x: &[f64]| -> f64 {
                let Some(th) = theta_of_x(family, x[0], false) else { return f64::INFINITY };
                let Ok(cop) = BivariateCopula::new(family, th) else { return f64::INFINITY };
                -edge_loglik(&cop, &obs)
            };
            let res = minimize(objective, &[x_of_theta(family, thetas[idx])], opts);
            converged &= res.converged;
            evals += res.evals;
            thetas[idx] = theta_of_x(family, res.x[0], false).expect("feasible optimum");
        }
        // h-transforms into the next tree
        if tree + 1 < d {
            let edges: Vec<BivariateCopula> = (1..=d - tree)
                .map(|pos| {
                    let idx = edge_index(d, tree, pos);
                    BivariateCopula::new(layout.families()[idx], thetas[idx])
                })
                .collect::<Result<_>>()?;
            for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
                let len = ai.len();
                // positions with k + ℓ + 1 ≤ m, i.e. k < m − 1 − ℓ (0-based)
                for k in 0..(len + 1).saturating_sub(tree + 1) {
                    let na = clamp_unit(edges[k].hfun_clamped(ai[k], bi[k]));
                    let nb = clamp_unit(edges[k + 1].hfun_clamped(bi[k + 1], ai[k + 1]));
                    ai[k] = na;
                    bi[k] = nb;
                }
            }
        }
    }
    Ok((converged, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Cluster;
    use crate::dvine::{DVineModel, VineLayout};
    use rand::SeedableRng;

    fn uncensored_vine_data(n: usize, seed: u64) -> GapDataset {
        let vine = DVineModel::from_layout(&"CG|F".parse::<VineLayout>().unwrap(), &[2.0, 1.8, 3.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let clusters = (0..n)
            .map(|i| {
                let u = vine.sample_one(&mut rng).unwrap();
                let gaps = u.iter().map(|&x| (-x.ln()).max(1e-12)).collect();
                Cluster::new(format!("{i}"), gaps, Status::Event).unwrap()
            })
            .collect();
        GapDataset::new(clusters).unwrap()
    }

    #[test]
    fn sequential_tree_one_equals_bivariate_mles() {
        let data = uncensored_vine_data(300, 11);
        let spec = FitSpec::new("CG|F".parse().unwrap(), Stages::Two, Strategy::Sequential);
        let fit = fit_two_stage(&data, &spec, Strategy::Sequential).unwrap();
        let pseudo = pseudo_copula_data(&data, &dataset_jumps(&data, JumpMethod::NelsonAalen).unwrap()).unwrap();
        // brute force: golden grid search over θ for each tree-1 edge
        for (pos, family) in [(1usize, CopulaFamily::Clayton), (2, CopulaFamily::Gumbel)] {
            let ll = |th: f64| -> f64 {
                let c = BivariateCopula::new(family, th).unwrap();
                pseudo.iter().map(|u| c.log_pdf_clamped(u[pos - 1], u[pos])).sum()
            };
            let lo0 = if family == CopulaFamily::Gumbel { 1.0001 } else { 0.01 };
            let (mut lo, mut hi) = (lo0, 20.0);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let m1 = hi - g * (hi - lo);
                let m2 = lo + g * (hi - lo);
                if ll(m1) > ll(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let brute = 0.5 * (lo + hi);
            let got = fit.edges[pos - 1].theta.unwrap();
            assert!((got - brute).abs() < 1e-6 * brute.max(1.0), "{family}: {got} vs {brute}");
        }
    }

    #[test]
    fn global_two_stage_recovers_and_is_monotone() {
        let data = uncensored_vine_data(400, 5);
        let spec = FitSpec::new("CG|F".parse().unwrap(), Stages::Two, Strategy::Global);
        let fit = fit_two_stage(&data, &spec, Strategy::Global).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.n_params, 3);
        assert!(fit.loglik >= fit.initial_loglik);
        assert!(fit.margins.is_empty());
        let want = [0.5, 1.0 - 1.0 / 1.8, crate::bicop::tau_of_theta(CopulaFamily::Frank, 3.0).unwrap()];
        for (e, w) in fit.edges.iter().zip(want) {
            assert!((e.tau.unwrap() - w).abs() < 0.08, "{} {w}", e.tau.unwrap());
        }
        assert!(fit.tail_survival.unwrap() < 0.01);
        assert!(!fit.heavy_tail);
        // sequential is close to global on uncensored data
        let seq =
            fit_two_stage(&data, &FitSpec { strategy: Strategy::Sequential, ..spec }, Strategy::Sequential).unwrap();
        assert!(seq.loglik <= fit.loglik + 1e-6);
        for (a, b) in fit.edges.iter().zip(&seq.edges) {
            assert!((a.tau.unwrap() - b.tau.unwrap()).abs() < 0.03);
        }
    }

    #[test]
    fn censored_sequential_propagates_status() {
        let data = GapDataset::new(vec![
            Cluster::new("a", vec![0.5, 1.0, 0.3], Status::Censored).unwrap(),
            Cluster::new("b", vec![0.2, 0.4, 0.9], Status::Event).unwrap(),
            Cluster::new("c", vec![1.5, 0.1], Status::Censored).unwrap(),
            Cluster::new("d", vec![0.7, 0.8, 0.6], Status::Event).unwrap(),
            Cluster::new("e", vec![0.3], Status::Censored).unwrap(),
        ])
        .unwrap();
        let spec = FitSpec::new("CC|C".parse().unwrap(), Stages::Two, Strategy::Sequential);
        let fit = fit_two_stage(&data, &spec, Strategy::Sequential).unwrap();
        assert!(fit.loglik.is_finite());
        assert!(fit.tail_survival.unwrap() > 0.0);
        let arch = FitSpec::new("3dC".parse().unwrap(), Stages::Two, Strategy::Sequential);
        assert!(matches!(fit_two_stage(&data, &arch, Strategy::Sequential), Err(Error::Unsupported(_))));
    }
}
