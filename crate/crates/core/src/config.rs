//! Scenario files: `key = value` lines, `#` comments.
//!
//! ```text
//! preset = cfg-15                 # optional starting point
//! n = 250
//! seed = 7
//! tree1 = clayton(theta=2), frank(tau=0.5), gumbel(theta=2)
//! tree2 = frank(tau=0.25), frank(tau=0.25)
//! tree3 = frank(theta=1.53)
//! margin1 = weibull(lambda=0.5, rho=1.5)
//! margins = weibull(lambda=1, rho=1.5)   # every gap not set individually
//! censoring = weibull(lambda=0.085, rho=1.5)
//! ```
//!
//! `archimedean = gumbel(tau=0.5)` with `d = 4` replaces the tree keys.

use std::collections::BTreeMap;
use std::path::Path;

use crate::archimedean::ArchimedeanModel;
use crate::bicop::{theta_of_tau, CopulaFamily};
use crate::dvine::{DVineModel, VineLayout};
use crate::error::{Error, Result};
use crate::margins::WeibullMargin;
use crate::model::CopulaModel;
use crate::simulate::Scenario;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// `name(k=v, ...)` or a bare `k=v, ...` list.
fn parse_call(s: &str, line: usize) -> Result<(Option<String>, BTreeMap<String, f64>)> {
    let s = s.trim();
    let (name, args) = match s.find('(') {
        Some(i) => {
            let inner = s[i + 1..].strip_suffix(')').ok_or_else(|| perr(line, format!("missing ')' in '{s}'")))?;
            (Some(s[..i].trim().to_ascii_lowercase()), inner)
        }
        None => (None, s),
    };
    let mut map = BTreeMap::new();
    for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| perr(line, format!("expected key=value, got '{part}'")))?;
        let v: f64 = v.trim().parse().map_err(|_| perr(line, format!("'{}' is not a number", v.trim())))?;
        map.insert(k.trim().to_ascii_lowercase(), v);
    }
    Ok((name, map))
}

/// Splits at commas outside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.into_iter().filter(|p| !p.is_empty()).collect()
}

fn parse_pair(s: &str, line: usize) -> Result<(CopulaFamily, f64)> {
    let (name, args) = parse_call(s, line)?;
    let family: CopulaFamily = name.as_deref().unwrap_or(s).parse().map_err(|e: Error| perr(line, e.to_string()))?;
    if family == CopulaFamily::Independence {
        return Ok((family, 0.0));
    }
    let theta = match (args.get("theta"), args.get("tau")) {
        (Some(&t), None) => t,
        (None, Some(&tau)) => theta_of_tau(family, tau).map_err(|e| perr(line, e.to_string()))?,
        _ => return Err(perr(line, format!("'{s}' needs exactly one of theta= or tau="))),
    };
    family.check_theta(theta).map_err(|e| perr(line, e.to_string()))?;
    Ok((family, theta))
}

fn parse_weibull(s: &str, line: usize) -> Result<WeibullMargin> {
    let (name, args) = parse_call(s, line)?;
    if let Some(n) = name.filter(|n| n != "weibull") {
        return Err(perr(line, format!("unknown margin '{n}' (only weibull)")));
    }
    let (Some(&l), Some(&r)) = (args.get("lambda"), args.get("rho")) else {
        return Err(perr(line, format!("'{s}' needs lambda= and rho=")));
    };
    WeibullMargin::new(l, r).map_err(|e| perr(line, e.to_string()))
}

pub fn read_scenario_path(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut base: Option<Scenario> = None;
    let mut n = None;
    let mut seed = None;
    let mut d_key = None;
    let mut trees: BTreeMap<usize, (usize, Vec<(CopulaFamily, f64)>)> = BTreeMap::new();
    let mut arch = None;
    let mut margin_at: BTreeMap<usize, WeibullMargin> = BTreeMap::new();
    let mut margin_all = None;
    let mut censoring = None;
    let mut seen = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) =
            content.split_once('=').ok_or_else(|| perr(line, format!("expected key = value, got '{content}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let val = val.trim();
        if let Some(prev) = seen.insert(key.clone(), line) {
            return Err(perr(line, format!("key '{key}' already set on line {prev}")));
        }
        let int = |v: &str| -> Result<u64> {
            v.parse().map_err(|_| perr(line, format!("'{v}' is not a non-negative integer")))
        };
        match key.as_str() {
            "preset" => base = Some(Scenario::preset(val).map_err(|e| perr(line, e.to_string()))?),
            "n" => n = Some(int(val)? as usize),
            "seed" => seed = Some(int(val)?),
            "d" => d_key = Some(int(val)? as usize),
            "archimedean" => arch = Some((parse_pair(val, line)?, line)),
            "censoring" => censoring = Some(parse_weibull(val, line)?),
            "margins" => margin_all = Some(parse_weibull(val, line)?),
            k if k.starts_with("tree") => {
                let t: usize = k[4..].parse().map_err(|_| perr(line, format!("unknown key '{k}'")))?;
                let pairs = split_top(val).into_iter().map(|p| parse_pair(p, line)).collect::<Result<Vec<_>>>()?;
                trees.insert(t, (line, pairs));
            }
            k if k.starts_with("margin") => {
                let j: usize =
                    k[6..].parse().ok().filter(|&j| j >= 1).ok_or_else(|| perr(line, format!("unknown key '{k}'")))?;
                margin_at.insert(j, parse_weibull(val, line)?);
            }
            k => return Err(perr(line, format!("unknown key '{k}'"))),
        }
    }

    let end = text.lines().count().max(1);
    let copula = if let Some(((family, theta), line)) = arch {
        if !trees.is_empty() {
            return Err(perr(line, "give either archimedean or tree keys, not both"));
        }
        let d = d_key.or(base.as_ref().map(|b| b.d())).ok_or_else(|| perr(line, "archimedean needs d"))?;
        CopulaModel::Archimedean(ArchimedeanModel::new(family, theta, d).map_err(|e| perr(line, e.to_string()))?)
    } else if !trees.is_empty() {
        let first_line = trees.values().next().map_or(end, |t| t.0);
        let d = trees.get(&1).map(|t| t.1.len() + 1).ok_or_else(|| perr(first_line, "tree1 missing"))?;
        if trees.len() != d - 1 || trees.keys().copied().ne(1..d) {
            return Err(perr(first_line, format!("a vine with {} tree-1 edges needs tree1..tree{}", d - 1, d - 1)));
        }
        let mut fams = Vec::new();
        let mut thetas = Vec::new();
        for (t, (line, pairs)) in &trees {
            if pairs.len() != d - t {
                return Err(perr(*line, format!("tree{t} needs {} pair copulas, got {}", d - t, pairs.len())));
            }
            for &(f, th) in pairs {
                fams.push(f);
                thetas.push(th);
            }
        }
        let layout = VineLayout::new(d, fams)?;
        CopulaModel::Vine(DVineModel::from_layout(&layout, &thetas)?)
    } else {
        base.as_ref()
            .map(|b| b.copula.clone())
            .ok_or_else(|| perr(end, "no copula given (preset, tree1.. or archimedean)"))?
    };
    let d = copula.dim();
    if let Some(dk) = d_key.filter(|&dk| dk != d) {
        return Err(perr(seen["d"], format!("d = {dk} but the copula has dimension {d}")));
    }
    let mut margins = Vec::with_capacity(d);
    for j in 1..=d {
        let m = margin_at
            .get(&j)
            .copied()
            .or(margin_all)
            .or_else(|| base.as_ref().and_then(|b| b.margins.get(j - 1).copied()))
            .ok_or_else(|| perr(end, format!("no margin for gap {j} (margin{j} = ... or margins = ...)")))?;
        margins.push(m);
    }
    if let Some((&j, _)) = margin_at.iter().find(|(&j, _)| j > d) {
        return Err(perr(seen[&format!("margin{j}")], format!("margin{j} exceeds d = {d}")));
    }
    let censoring = censoring
        .or(base.as_ref().map(|b| b.censoring))
        .ok_or_else(|| perr(end, "censoring = weibull(lambda=..., rho=...) missing"))?;
    let n = n.or(base.as_ref().map(|b| b.n)).ok_or_else(|| perr(end, "n missing"))?;
    let seed = seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(1);
    Scenario::new(copula, margins, censoring, n, seed)
}
