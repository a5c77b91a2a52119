//! Simulation of unbalanced recurrent-event gap times: copula draws pushed
//! through Weibull survival quantiles, cut by a per-cluster total-time
//! censoring budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bicop::{clamp_unit, theta_of_tau, CopulaFamily};
use crate::data::{Cluster, GapDataset};
use crate::dvine::{DVineModel, Status, VineLayout};
use crate::error::{domain, Error, Result};
use crate::estimate::{fit, FitResult, FitSpec};
use crate::margins::WeibullMargin;
use crate::model::CopulaModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub copula: CopulaModel,
    /// One per gap index; as many as the copula has dimensions.
    pub margins: Vec<WeibullMargin>,
    pub censoring: WeibullMargin,
    pub n: usize,
    pub seed: u64,
}

/// Built-in scenarios: `<tree-1 families>-<censoring>`.
pub const PRESETS: [&str; 10] =
    ["ccf-15", "ccf-30", "ccf-30ht", "cfg-15", "cfg-30", "cfg-30ht", "ccc-15", "ccc-30", "ccc-30ht", "fgg-15"];

impl Scenario {
    pub fn new(
        copula: CopulaModel,
        margins: Vec<WeibullMargin>,
        censoring: WeibullMargin,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        if margins.len() != copula.dim() {
            return Err(Error::Invalid(format!(
                "{} gap margins given for a {}-dimensional copula",
                margins.len(),
                copula.dim()
            )));
        }
        if n == 0 {
            return Err(Error::Invalid("scenario needs n >= 1".into()));
        }
        Ok(Self { copula, margins, censoring, n, seed })
    }

    pub fn d(&self) -> usize {
        self.margins.len()
    }

    /// A named built-in scenario with n = 500 (250 for `fgg-15`) and seed 1.
    ///
    /// 3-d (`ccf-*`): Clayton τ = 0.5, 0.5 in tree 1 and Frank τ = 0.25 in
    /// tree 2. 4-d (`cfg-*`, `ccc-*`, `fgg-*`): tree 1 as named, Frank trees 2
    /// and 3 with τ = 0.25, 0.25 and 0.167. Gap 1 is Weibull(0.5, 1.5), later
    /// gaps Weibull(1, 1.5); the suffix picks the censoring Weibull.
    pub fn preset(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase();
        let (kind, cens) = key.split_once('-').ok_or_else(|| Error::Invalid(format!("unknown preset '{name}'")))?;
        let (copula, d) = match kind {
            "ccf" => (vine("CC|F", &[2.0, 2.0, 2.37])?, 3),
            "cfg" => (vine("CFG|FF|F", &[2.0, 5.76, 2.0, 2.37, 2.37, 1.53])?, 4),
            "ccc" => (vine("CCC|FF|F", &[0.86, 2.0, 4.67, 2.37, 2.37, 1.53])?, 4),
            "fgg" => {
                let t1 = [
                    theta_of_tau(CopulaFamily::Frank, 0.2)?,
                    theta_of_tau(CopulaFamily::Gumbel, 0.5)?,
                    theta_of_tau(CopulaFamily::Gumbel, 0.7)?,
                ];
                (vine("FGG|FF|F", &[t1[0], t1[1], t1[2], 2.37, 2.37, 1.53])?, 4)
            }
            _ => return Err(Error::Invalid(format!("unknown preset '{name}'"))),
        };
        let light = if d == 3 { 0.1 } else { 0.085 };
        let (cl, cr) = match cens {
            "15" => (light, 1.5),
            "30" if kind != "fgg" => (0.25, 1.5),
            "30ht" if kind != "fgg" => (light, 3.0),
            _ => return Err(Error::Invalid(format!("unknown preset '{name}'"))),
        };
        let mut margins = vec![WeibullMargin::new(0.5, 1.5)?];
        margins.extend((1..d).map(|_| WeibullMargin::new(1.0, 1.5).expect("valid")));
        let n = if kind == "fgg" { 250 } else { 500 };
        Self::new(copula, margins, WeibullMargin::new(cl, cr)?, n, 1)
    }
}

fn vine(code: &str, thetas: &[f64]) -> Result<CopulaModel> {
    Ok(CopulaModel::Vine(DVineModel::from_layout(&code.parse::<VineLayout>()?, thetas)?))
}

/// S⁻¹(u) = (−ln u / λ)^{1/ρ}.
pub fn weibull_quantile(m: &WeibullMargin, u: f64) -> Result<f64> {
    m.quantile(u)
}

/// Applies a total-time censoring budget c to a full gap sequence: the
/// cluster stops at the first event time T_j ≥ c, whose gap becomes the
/// censored c − T_{j−1}; if every event occurs before c all gaps are events.
pub fn censor_cluster(id: impl Into<String>, gaps: &[f64], c: f64) -> Result<Cluster> {
    if !(c > 0.0) {
        return domain(format!("censoring time {c} must be positive"));
    }
    let mut t = 0.0;
    for (j, &g) in gaps.iter().enumerate() {
        if t + g >= c {
            let mut kept = gaps[..j].to_vec();
            kept.push(c - t);
            return Cluster::new(id, kept, Status::Censored);
        }
        t += g;
    }
    Cluster::new(id, gaps.to_vec(), Status::Event)
}

/// Draws one dataset of `s.n` clusters.
pub fn generate<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<GapDataset> {
    generate_with(&s.copula, &s.margins, s.n, rng, |rng| s.censoring.quantile(clamp_unit(rng.random())))
}

/// Shared with the bootstrap: gap j = S_j⁻¹(u_j) for a copula draw u, then
/// a censoring budget from `censor`.
pub(crate) fn generate_with<R: Rng + ?Sized>(
    copula: &CopulaModel,
    margins: &[WeibullMargin],
    n: usize,
    rng: &mut R,
    mut censor: impl FnMut(&mut R) -> Result<f64>,
) -> Result<GapDataset> {
    let d = margins.len();
    let mut clusters = Vec::with_capacity(n);
    let mut gaps = vec![0.0; d];
    for i in 0..n {
        let u = copula.sample_one(rng)?;
        for j in 0..d {
            gaps[j] = margins[j].quantile(clamp_unit(u[j]))?;
        }
        let c = censor(rng)?;
        clusters.push(censor_cluster(format!("{}", i + 1), &gaps, c)?);
    }
    GapDataset::new(clusters)
}

/// Generator for replicate r of a study seeded with `seed`: one ChaCha
/// stream per replicate, so parallel and serial runs agree.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Empirical mean and standard deviation (n − 1) over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl ParamSummary {
    pub fn of(name: impl Into<String>, truth: Option<f64>, values: &[f64]) -> Self {
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { name: name.into(), truth, mean, sd, count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub requested: usize,
    /// Replicates whose fit converged and enter the summaries.
    pub used: usize,
    pub not_converged: usize,
    /// Replicates where generation or fitting raised an error.
    pub failed: usize,
    /// Per free copula parameter, in edge order.
    pub tau: Vec<ParamSummary>,
    pub theta: Vec<ParamSummary>,
    /// λ_j and ρ_j per gap index (one-stage only).
    pub margins: Vec<ParamSummary>,
    pub mean_censoring_rate: f64,
    pub fits: Vec<Option<FitResult>>,
}

/// R generate→fit cycles on independent streams; summaries use converged
/// replicates only.
pub fn run_replication_study(s: &Scenario, spec: &FitSpec, r: usize, seed: u64) -> Result<ReplicationSummary> {
    if r < 2 {
        return Err(Error::Invalid("a replication study needs R >= 2".into()));
    }
    let runs: Vec<(Option<f64>, Result<FitResult>)> = (0..r)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(seed, k as u64);
            match generate(s, &mut rng) {
                Ok(data) => (Some(data.censoring_rate()), fit(&data, spec)),
                Err(e) => (None, Err(e)),
            }
        })
        .collect();
    let rates: Vec<f64> = runs.iter().filter_map(|(c, _)| *c).collect();
    let failed = runs.iter().filter(|(_, f)| f.is_err()).count();
    let fits: Vec<Option<FitResult>> = runs.into_iter().map(|(_, f)| f.ok()).collect();
    let good: Vec<&FitResult> = fits.iter().flatten().filter(|f| f.converged).collect();
    let not_converged = fits.iter().flatten().count() - good.len();

    let truth_edges: Vec<(f64, f64)> = match &s.copula {
        CopulaModel::Vine(v) => v.edges().iter().map(|e| (e.theta(), e.tau())).collect(),
        CopulaModel::Archimedean(a) => vec![(a.theta(), a.tau())],
    };
    let mut tau = Vec::new();
    let mut theta = Vec::new();
    if let Some(first) = good.first() {
        for (i, e) in first.edges.iter().enumerate() {
            if !e.is_free() {
                continue;
            }
            let th: Vec<f64> = good.iter().filter_map(|f| f.edges[i].theta).collect();
            let ta: Vec<f64> = good.iter().filter_map(|f| f.edges[i].tau).collect();
            let truth = truth_edges.get(i).filter(|_| first.edges.len() == truth_edges.len());
            theta.push(ParamSummary::of(format!("theta_{}", e.label), truth.map(|t| t.0), &th));
            tau.push(ParamSummary::of(format!("tau_{}", e.label), truth.map(|t| t.1), &ta));
        }
    }
    let mut margins = Vec::new();
    let nm = good.iter().map(|f| f.margins.len()).min().unwrap_or(0);
    for j in 0..nm {
        let l: Vec<f64> = good.iter().map(|f| f.margins[j].lambda()).collect();
        let p: Vec<f64> = good.iter().map(|f| f.margins[j].rho()).collect();
        margins.push(ParamSummary::of(format!("lambda_{}", j + 1), s.margins.get(j).map(|m| m.lambda()), &l));
        margins.push(ParamSummary::of(format!("rho_{}", j + 1), s.margins.get(j).map(|m| m.rho()), &p));
    }
    Ok(ReplicationSummary {
        requested: r,
        used: good.len(),
        not_converged,
        failed,
        tau,
        theta,
        margins,
        mean_censoring_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{Stages, Strategy};

    #[test]
    fn quantile_examples() {
        let m = WeibullMargin::new(1.0, 1.0).unwrap();
        assert!((weibull_quantile(&m, (-1f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        let m = WeibullMargin::new(0.5, 1.5).unwrap();
        assert!((weibull_quantile(&m, 0.60653).unwrap() - 1.0).abs() < 1e-5);
        for u in [1e-9, 0.1, 0.5, 0.999] {
            let g = weibull_quantile(&m, u).unwrap();
            assert!((m.surv(g).unwrap() - u).abs() < 1e-12);
        }
        assert!(weibull_quantile(&m, 0.0).is_err() && weibull_quantile(&m, 1.0).is_err());
    }

    #[test]
    fn censoring_truncation() {
        let c = censor_cluster("a", &[1.0, 2.0, 3.0], 2.5).unwrap();
        assert_eq!(c.gaps, vec![1.0, 1.5]);
        assert_eq!(c.status, Status::Censored);
        let c = censor_cluster("a", &[1.0, 2.0, 3.0], 0.5).unwrap();
        assert_eq!(c.gaps, vec![0.5]);
        let c = censor_cluster("a", &[1.0, 2.0, 3.0], 5.5).unwrap();
        assert_eq!(c.gaps, vec![1.0, 2.0, 2.5]);
        assert_eq!(c.status, Status::Censored);
        let c = censor_cluster("a", &[1.0, 2.0, 3.0], 7.0).unwrap();
        assert_eq!(c.size(), 3);
        assert_eq!(c.status, Status::Event);
    }

    #[test]
    fn generated_data_invariants() {
        let s = Scenario::preset("cfg-30").unwrap();
        let data = generate(&s, &mut replicate_rng(5, 0)).unwrap();
        assert_eq!(data.n(), 500);
        assert_eq!(data.size_counts().iter().sum::<usize>(), 500);
        for c in data.clusters() {
            assert!(c.gaps.iter().all(|&g| g > 0.0));
            if c.size() < 4 {
                assert!(c.is_censored());
            }
        }
        let sizes: Vec<usize> = data.clusters().iter().map(|c| c.size()).collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        // deterministic per stream
        assert_eq!(data, generate(&s, &mut replicate_rng(5, 0)).unwrap());
    }

    #[test]
    fn negligible_censoring_keeps_full_clusters() {
        let mut s = Scenario::preset("ccf-15").unwrap();
        s.censoring = WeibullMargin::new(1e-30, 1.5).unwrap();
        s.n = 200;
        let data = generate(&s, &mut replicate_rng(1, 0)).unwrap();
        assert!(data.clusters().iter().all(|c| c.size() == 3 && !c.is_censored()));
    }

    #[test]
    fn censoring_increases_with_scale() {
        let mut rates = Vec::new();
        for l in [0.05, 0.1, 0.25] {
            let mut s = Scenario::preset("ccf-15").unwrap();
            s.censoring = WeibullMargin::new(l, 1.5).unwrap();
            s.n = 2000;
            rates.push(generate(&s, &mut replicate_rng(9, 0)).unwrap().censoring_rate());
        }
        assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
    }

    #[test]
    fn presets_parse() {
        for p in PRESETS {
            let s = Scenario::preset(p).unwrap();
            assert_eq!(s.d(), s.copula.dim());
        }
        assert!(Scenario::preset("fgg-30").is_err());
        assert!(Scenario::preset("abc-15").is_err());
        let fgg = Scenario::preset("fgg-15").unwrap();
        let CopulaModel::Vine(v) = &fgg.copula else { panic!() };
        assert!((v.edge(1, 3).tau() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn replication_study_is_reproducible() {
        let mut s = Scenario::preset("ccf-15").unwrap();
        s.n = 60;
        let spec = FitSpec::new("CC|F".parse().unwrap(), Stages::Two, Strategy::Sequential);
        let a = run_replication_study(&s, &spec, 2, 3).unwrap();
        let b = run_replication_study(&s, &spec, 2, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tau.len(), 3);
        assert_eq!(a.tau[0].truth, Some(0.5));
        assert!(run_replication_study(&s, &spec, 1, 3).is_err());
    }
}
