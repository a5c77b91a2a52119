use rand::Rng;
use rayon::prelude::*;

use crate::data::GapDataset;
use crate::dvine::Status;
use crate::error::{Error, Result};
use crate::margins::{total_time_jumps, JumpMethod};
use crate::simulate::{generate_with, replicate_rng};

use super::{fit, FitResult, FitSpec, Stages};

/// Fraction of dropped replicates above which bootstrap SEs are flagged.
pub const MAX_DROP_FRACTION: f64 = 0.2;

/// Kaplan–Meier estimate of the censoring distribution from the total times
/// (a censored cluster is a censoring "event"). Mass the estimate leaves
/// unassigned sits at the largest observed total time.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringDistribution {
    times: Vec<f64>,
    cum: Vec<f64>,
    max_time: f64,
}

impl CensoringDistribution {
    pub fn from_data(data: &GapDataset) -> Result<Self> {
        let totals = data.total_times();
        let flipped: Vec<Status> = data.statuses().iter().map(|s| Status::from_indicator(!s.is_event())).collect();
        let jumps = total_time_jumps(&totals, &flipped, JumpMethod::KaplanMeier)?;
        let mut times = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for &(t, w) in jumps.sorted() {
            if w > 0.0 {
                acc += w;
                times.push(t);
                cum.push(acc);
            }
        }
        let max_time = totals.iter().copied().fold(0.0, f64::max);
        Ok(Self { times, cum, max_time })
    }

    /// Observed censoring times carrying mass.
    pub fn support(&self) -> &[f64] {
        &self.times
    }

    pub fn leftover_mass(&self) -> f64 {
        1.0 - self.cum.last().copied().unwrap_or(0.0)
    }

    /// Inverse-CDF draw over the step function.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self.cum.partition_point(|&c| c < u) {
            k if k < self.times.len() => self.times[k],
            _ => self.max_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub requested: usize,
    pub used: usize,
    /// Replicates that failed or did not converge.
    pub dropped: usize,
    pub unreliable: bool,
    /// Aligned with the fit's edges; None where not estimated.
    pub theta_se: Vec<Option<f64>>,
    pub tau_se: Vec<Option<f64>>,
    pub lambda_se: Vec<Option<f64>>,
    pub rho_se: Vec<Option<f64>>,
    /// Average n_j over replicates (index j − 1).
    pub mean_size_counts: Vec<f64>,
    pub mean_censoring_rate: f64,
    pub data_censoring_rate: f64,
}

fn sd(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
}

/// Parametric bootstrap of a one-stage fit: replicate datasets from the
/// fitted copula and Weibull margins, censored by draws from the estimated
/// censoring distribution, refitted with `spec`. Replicate r uses stream r of
/// `seed`.
pub fn bootstrap_se(
    data: &GapDataset,
    spec: &FitSpec,
    fitted: &FitResult,
    b: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if spec.stages != Stages::One || fitted.stages != Stages::One {
        return Err(Error::Unsupported("the bootstrap resamples from one-stage (Weibull) fits only".into()));
    }
    if b < 2 {
        return Err(Error::Invalid("bootstrap needs B >= 2".into()));
    }
    let g = CensoringDistribution::from_data(data)?;
    let n = data.n();
    let d = fitted.margins.len();
    let reps: Vec<(GapStats, Result<FitResult>)> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            match generate_with(&fitted.copula, &fitted.margins, n, &mut rng, |rng| Ok(g.sample(rng))) {
                Ok(rep) => {
                    let stats = GapStats { rate: rep.censoring_rate(), counts: rep.size_counts() };
                    (stats, fit(&rep, spec))
                }
                Err(e) => (GapStats { rate: f64::NAN, counts: vec![] }, Err(e)),
            }
        })
        .collect();

    let mut counts = vec![0.0; d];
    let mut rates = Vec::new();
    for (s, _) in &reps {
        if s.rate.is_finite() {
            rates.push(s.rate);
            for (j, &c) in s.counts.iter().enumerate() {
                counts[j] += c as f64;
            }
        }
    }
    let generated = rates.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= generated);

    let good: Vec<&FitResult> = reps.iter().filter_map(|(_, f)| f.as_ref().ok()).filter(|f| f.converged).collect();
    let dropped = b - good.len();
    let per_edge = |pick: fn(&super::EdgeEstimate) -> Option<f64>| -> Vec<Option<f64>> {
        (0..fitted.edges.len())
            .map(|i| {
                if !fitted.edges[i].is_free() {
                    return None;
                }
                let v: Vec<f64> = good.iter().filter_map(|f| f.edges.get(i).and_then(pick)).collect();
                sd(&v)
            })
            .collect()
    };
    let per_margin = |pick: fn(&crate::margins::WeibullMargin) -> f64| -> Vec<Option<f64>> {
        (0..d).map(|j| sd(&good.iter().filter_map(|f| f.margins.get(j).map(pick)).collect::<Vec<_>>())).collect()
    };
    Ok(BootstrapSummary {
        requested: b,
        used: good.len(),
        dropped,
        unreliable: dropped as f64 > MAX_DROP_FRACTION * b as f64,
        theta_se: per_edge(|e| e.theta),
        tau_se: per_edge(|e| e.tau),
        lambda_se: per_margin(|m| m.lambda()),
        rho_se: per_margin(|m| m.rho()),
        mean_size_counts: counts,
        mean_censoring_rate: rates.iter().sum::<f64>() / generated,
        data_censoring_rate: data.censoring_rate(),
    })
}

struct GapStats {
    rate: f64,
    counts: Vec<usize>,
}
