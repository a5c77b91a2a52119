//! Plain-text reports. Numbers carry 6 significant digits.

use std::fmt::Write;

use crate::data::GapDataset;
use crate::estimate::{aic_of, BootstrapSummary, FitResult};
use crate::simulate::{ParamSummary, ReplicationSummary};

/// `%g`-style formatting with 6 significant digits.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (5 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

/// n, d, n_j and the censoring rate.
pub fn dataset_summary(data: &GapDataset) -> String {
    let mut s = String::new();
    writeln!(s, "clusters,{}", data.n()).unwrap();
    writeln!(s, "max_cluster_size,{}", data.max_size()).unwrap();
    writeln!(s, "gaps,{}", data.total_gaps()).unwrap();
    writeln!(s, "censored,{}", data.n_censored()).unwrap();
    writeln!(s, "censoring_rate,{}", fmt6(data.censoring_rate())).unwrap();
    s.push_str("size,clusters,last_event,last_censored\n");
    for (j, &c) in data.size_counts().iter().enumerate() {
        let cens = data.clusters().iter().filter(|cl| cl.size() == j + 1 && cl.is_censored()).count();
        writeln!(s, "{},{c},{},{cens}", j + 1, c - cens).unwrap();
    }
    s
}

/// Key-value header, one table per tree (or the Archimedean parameter), the
/// margins and, if present, bootstrap diagnostics.
pub fn fit_report(fit: &FitResult) -> String {
    let mut s = String::new();
    let kv = |s: &mut String, k: &str, v: String| writeln!(s, "{k},{v}").unwrap();
    kv(&mut s, "model", fit.model_label.clone());
    kv(&mut s, "stages", fit.stages.to_string());
    kv(&mut s, "strategy", fit.strategy.to_string());
    kv(&mut s, "loglik", fmt6(fit.loglik));
    kv(&mut s, "aic", fmt6(aic_of(fit)));
    kv(&mut s, "n_params", fit.n_params.to_string());
    kv(&mut s, "converged", fit.converged.to_string());
    kv(&mut s, "iterations", fit.iterations.to_string());
    if let Some(t) = fit.tail_survival {
        kv(&mut s, "tail_survival", fmt6(t));
        kv(&mut s, "heavy_tail", fit.heavy_tail.to_string());
    }
    let bs = fit.bootstrap.as_ref();
    let mut tree = usize::MAX;
    for (i, e) in fit.edges.iter().enumerate() {
        if e.tree != tree {
            tree = e.tree;
            if tree == 0 {
                s.push_str("\n[archimedean]\n");
            } else {
                writeln!(s, "\n[tree {tree}]").unwrap();
            }
            s.push_str("edge,family,theta,tau,se_theta,se_tau\n");
        }
        let (se_t, se_tau) = bs.map_or((None, None), |b| (b.theta_se[i], b.tau_se[i]));
        let theta = if e.theta.is_none() { "NA".into() } else { opt(e.theta) };
        let tau = if e.tau.is_none() { "NA".into() } else { opt(e.tau) };
        writeln!(s, "{},{},{theta},{tau},{},{}", e.label, e.family, opt(se_t), opt(se_tau)).unwrap();
    }
    if !fit.margins.is_empty() {
        s.push_str("\n[margins]\ngap,lambda,rho,se_lambda,se_rho\n");
        for (j, m) in fit.margins.iter().enumerate() {
            let (sl, sr) = bs.map_or((None, None), |b| (b.lambda_se[j], b.rho_se[j]));
            writeln!(s, "{},{},{},{},{}", j + 1, fmt6(m.lambda()), fmt6(m.rho()), opt(sl), opt(sr)).unwrap();
        }
    }
    if let Some(b) = bs {
        s.push('\n');
        s.push_str(&bootstrap_diagnostics(b));
    }
    s
}

pub fn bootstrap_diagnostics(b: &BootstrapSummary) -> String {
    let mut s = String::from("[bootstrap]\n");
    writeln!(s, "replicates,{}", b.requested).unwrap();
    writeln!(s, "used,{}", b.used).unwrap();
    writeln!(s, "dropped,{}", b.dropped).unwrap();
    writeln!(s, "unreliable,{}", b.unreliable).unwrap();
    writeln!(s, "data_censoring_rate,{}", fmt6(b.data_censoring_rate)).unwrap();
    writeln!(s, "replicate_censoring_rate,{}", fmt6(b.mean_censoring_rate)).unwrap();
    s.push_str("size,mean_clusters\n");
    for (j, c) in b.mean_size_counts.iter().enumerate() {
        writeln!(s, "{},{}", j + 1, fmt6(*c)).unwrap();
    }
    s
}

/// A candidate in a selection run: its fit, or why it failed.
pub type Candidate = (String, std::result::Result<FitResult, String>);

/// Successful fits ranked by AIC (ties: fewer parameters), then failures.
pub fn selection_table(cands: &[Candidate]) -> String {
    let mut ok: Vec<&FitResult> = cands.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    ok.sort_by(|a, b| aic_of(a).total_cmp(&aic_of(b)).then(a.n_params.cmp(&b.n_params)));
    let best = ok.first().map(|f| aic_of(f));
    let mut s = String::from("rank,model,n_params,loglik,aic,delta_aic,converged\n");
    for (i, f) in ok.iter().enumerate() {
        let a = aic_of(f);
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            i + 1,
            f.model_label,
            f.n_params,
            fmt6(f.loglik),
            fmt6(a),
            fmt6(a - best.unwrap_or(a)),
            f.converged
        )
        .unwrap();
    }
    let failed: Vec<_> = cands.iter().filter_map(|(m, r)| r.as_ref().err().map(|e| (m, e))).collect();
    if !failed.is_empty() {
        s.push_str("\n[failed]\nmodel,reason\n");
        for (m, e) in failed {
            writeln!(s, "{m},\"{}\"", e.replace('"', "'")).unwrap();
        }
    }
    s
}

fn param_rows(s: &mut String, rows: &[ParamSummary]) {
    for p in rows {
        writeln!(s, "{},{},{},{},{}", p.name, opt(p.truth), fmt6(p.mean), fmt6(p.sd), p.count).unwrap();
    }
}

pub fn replication_report(r: &ReplicationSummary) -> String {
    let mut s = String::new();
    writeln!(s, "replications,{}", r.requested).unwrap();
    writeln!(s, "used,{}", r.used).unwrap();
    writeln!(s, "not_converged,{}", r.not_converged).unwrap();
    writeln!(s, "failed,{}", r.failed).unwrap();
    writeln!(s, "mean_censoring_rate,{}", fmt6(r.mean_censoring_rate)).unwrap();
    s.push_str("parameter,truth,mean,sd,count\n");
    param_rows(&mut s, &r.tau);
    param_rows(&mut s, &r.theta);
    param_rows(&mut s, &r.margins);
    s
}
