//! Marginal gap-time survival: parametric Weibull margins and the
//! total-time jump estimator behind the pseudo copula data.

use std::io::Write;

use statrs::function::gamma::ln_gamma;

use crate::bicop::EPS;
use crate::data::GapDataset;
use crate::dvine::Status;
use crate::error::{domain, Error, Result};

/// S(g) = exp(−λ g^ρ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullMargin {
    lambda: f64,
    rho: f64,
}

impl WeibullMargin {
    pub fn new(lambda: f64, rho: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && rho > 0.0 && rho.is_finite()) {
            return domain(format!("Weibull parameters must be positive, got λ = {lambda}, ρ = {rho}"));
        }
        Ok(Self { lambda, rho })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn surv(&self, g: f64) -> Result<f64> {
        if g < 0.0 || g.is_nan() {
            return domain(format!("gap time {g} is negative"));
        }
        Ok(self.log_surv(g).exp())
    }

    pub fn dens(&self, g: f64) -> Result<f64> {
        if g < 0.0 || g.is_nan() {
            return domain(format!("gap time {g} is negative"));
        }
        if g == 0.0 {
            return Ok(match self.rho {
                r if r < 1.0 => f64::INFINITY,
                r if r == 1.0 => self.lambda,
                _ => 0.0,
            });
        }
        Ok(self.log_dens(g).exp())
    }

    /// ln S(g) = −λ g^ρ, for g ≥ 0.
    #[inline]
    pub fn log_surv(&self, g: f64) -> f64 {
        -self.lambda * g.powf(self.rho)
    }

    /// ln f(g), for g > 0.
    #[inline]
    pub fn log_dens(&self, g: f64) -> f64 {
        let lg = g.ln();
        self.lambda.ln() + self.rho.ln() + (self.rho - 1.0) * lg - self.lambda * (self.rho * lg).exp()
    }

    /// S⁻¹(u) = (−ln u / λ)^{1/ρ}.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return domain(format!("survival level {u} must lie in (0, 1)"));
        }
        Ok((-u.ln() / self.lambda).powf(1.0 / self.rho))
    }

    /// Method-of-moments fit from a sample of (uncensored) times: the shape
    /// matches the coefficient of variation, the scale the mean.
    pub fn method_of_moments(times: &[f64]) -> Result<Self> {
        let n = times.len();
        if n < 2 {
            return Err(Error::Invalid("method of moments needs at least two times".into()));
        }
        let mean = times.iter().sum::<f64>() / n as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(mean > 0.0) || !(var > 0.0) {
            return Err(Error::Invalid("degenerate sample for method of moments".into()));
        }
        let cv2 = var / (mean * mean);
        // CV²(ρ) = Γ(1+2/ρ)/Γ(1+1/ρ)² − 1 decreases in ρ
        let cv2_of = |rho: f64| (ln_gamma(1.0 + 2.0 / rho) - 2.0 * ln_gamma(1.0 + 1.0 / rho)).exp() - 1.0;
        let (mut lo, mut hi) = (0.05f64, 50.0f64);
        let rho = if cv2 >= cv2_of(lo) {
            lo
        } else if cv2 <= cv2_of(hi) {
            hi
        } else {
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if cv2_of(mid) > cv2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo * hi).sqrt()
        };
        // mean = λ^{−1/ρ} Γ(1+1/ρ)
        let lambda = (ln_gamma(1.0 + 1.0 / rho) - mean.ln()).exp().powf(rho);
        Self::new(lambda, rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpMethod {
    KaplanMeier,
    NelsonAalen,
}

/// Survival jumps of the total follow-up times, one weight per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalJumpTable {
    method: JumpMethod,
    /// weights in the order the observations were given
    weights: Vec<f64>,
    /// distinct event times with the survival right after each
    curve: Vec<(f64, f64)>,
    /// all observations sorted: (time, weight)
    sorted: Vec<(f64, f64)>,
    no_events: bool,
}

impl SurvivalJumpTable {
    pub fn method(&self) -> JumpMethod {
        self.method
    }

    /// W_i of observation i (input order); zero for censored observations.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Observations sorted by time with their weights.
    pub fn sorted(&self) -> &[(f64, f64)] {
        &self.sorted
    }

    /// (event time, survival just after it) pairs.
    pub fn curve(&self) -> &[(f64, f64)] {
        &self.curve
    }

    /// Set when there were no events, so every weight is zero.
    pub fn no_events(&self) -> bool {
        self.no_events
    }

    /// Right-continuous survival estimate at t.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.curve.partition_point(|&(s, _)| s <= t) {
            0 => 1.0,
            k => self.curve[k - 1].1,
        }
    }

    /// Survival after the last event time (the mass never assigned).
    pub fn tail_survival(&self) -> f64 {
        self.curve.last().map_or(1.0, |&(_, s)| s)
    }

    /// Writes `time,survival,jump` rows, one per observation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "survival", "jump"])?;
        for &(t, j) in &self.sorted {
            w.write_record([format!("{t}"), format!("{}", self.survival_at(t)), format!("{j}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Kaplan–Meier or exp(−Nelson–Aalen) jumps of the total times. At tied
/// times events precede censorings, and a drop is shared equally among the
/// tied events.
pub fn total_time_jumps(total_times: &[f64], statuses: &[Status], method: JumpMethod) -> Result<SurvivalJumpTable> {
    if total_times.len() != statuses.len() {
        return Err(Error::Invalid("times and statuses differ in length".into()));
    }
    if let Some(t) = total_times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return domain(format!("total time {t} is not positive"));
    }
    let n = total_times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        total_times[a].total_cmp(&total_times[b]).then_with(|| statuses[b].is_event().cmp(&statuses[a].is_event()))
    });
    let mut weights = vec![0.0; n];
    let mut curve = Vec::new();
    let mut surv = 1.0f64;
    let mut cum_hazard = 0.0f64;
    let mut at_risk = n;
    let mut i = 0;
    while i < n {
        let t = total_times[order[i]];
        let mut j = i;
        while j < n && total_times[order[j]] == t {
            j += 1;
        }
        let events: Vec<usize> = order[i..j].iter().copied().filter(|&k| statuses[k].is_event()).collect();
        if !events.is_empty() {
            let dn = events.len() as f64 / at_risk as f64;
            let next = match method {
                JumpMethod::KaplanMeier => surv * (1.0 - dn),
                JumpMethod::NelsonAalen => {
                    cum_hazard += dn;
                    (-cum_hazard).exp()
                }
            };
            let share = (surv - next) / events.len() as f64;
            for &k in &events {
                weights[k] = share;
            }
            surv = next;
            curve.push((t, surv));
        }
        at_risk -= j - i;
        i = j;
    }
    let sorted = order.iter().map(|&k| (total_times[k], weights[k])).collect();
    Ok(SurvivalJumpTable { method, weights, curve, sorted, no_events: curve_is_empty(statuses) })
}

fn curve_is_empty(statuses: &[Status]) -> bool {
    !statuses.iter().any(|s| s.is_event())
}

/// Jumps of the dataset's total times.
pub fn dataset_jumps(data: &GapDataset, method: JumpMethod) -> Result<SurvivalJumpTable> {
    total_time_jumps(&data.total_times(), &data.statuses(), method)
}

/// û_{ij} = 1 − Σ_{ℓ: d_ℓ ≥ j} W_ℓ I(y_{ℓj} ≤ y_{ij}), one vector per cluster
/// in dataset order. `jumps` must be indexed like the dataset's clusters.
/// Values that reach 1 (the smallest observation of a zero-weight cluster)
/// are pulled to 1 − 1e-10; a value ≤ 0 is an error.
pub fn pseudo_copula_data(data: &GapDataset, jumps: &SurvivalJumpTable) -> Result<Vec<Vec<f64>>> {
    let clusters = data.clusters();
    if jumps.weights.len() != clusters.len() {
        return Err(Error::Invalid("jump table does not match the dataset".into()));
    }
    let mut out: Vec<Vec<f64>> = clusters.iter().map(|c| vec![0.0; c.size()]).collect();
    for j in 0..data.max_size() {
        let mut col: Vec<(f64, f64)> = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.size() > j)
            .map(|(l, c)| (c.gaps[j], jumps.weights[l]))
            .collect();
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = Vec::with_capacity(col.len());
        let mut acc = 0.0;
        for &(_, w) in &col {
            acc += w;
            cum.push(acc);
        }
        for (i, c) in clusters.iter().enumerate().filter(|(_, c)| c.size() > j) {
            let y = c.gaps[j];
            let k = col.partition_point(|&(t, _)| t <= y);
            let u = 1.0 - cum[k - 1];
            if u <= 0.0 {
                return Err(Error::Numeric(format!(
                    "pseudo observation of cluster '{}' gap {} is {u}; the survival estimate \
                     reached zero (use the Nelson-Aalen method)",
                    c.id,
                    j + 1
                )));
            }
            out[i][j] = u.min(1.0 - EPS);
        }
    }
    Ok(out)
}
