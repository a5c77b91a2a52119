//! Copula models as used by estimation and simulation: a D-vine or an
//! exchangeable Archimedean copula, plus the unfitted model specification.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::archimedean::ArchimedeanModel;
use crate::bicop::CopulaFamily;
use crate::dvine::{DVineModel, Status, VineLayout, LOGLIK_SENTINEL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CopulaModel {
    Vine(DVineModel),
    Archimedean(ArchimedeanModel),
}

impl CopulaModel {
    pub fn dim(&self) -> usize {
        match self {
            CopulaModel::Vine(v) => v.dim(),
            CopulaModel::Archimedean(a) => a.dim(),
        }
    }

    /// Copula factor of a cluster's likelihood on the copula scale: density
    /// for an event, the censored partial derivative otherwise; 0 for size 1.
    pub fn cluster_loglik(&self, u: &[f64], status: Status) -> Result<f64> {
        match self {
            CopulaModel::Vine(v) => v.cluster_loglik(u, status),
            CopulaModel::Archimedean(a) => {
                if u.len() == 1 {
                    return Ok(0.0);
                }
                let v = match status {
                    Status::Event => a.log_apdf(u)?,
                    Status::Censored => a.log_acens_deriv(u)?,
                };
                Ok(if v.is_nan() || v < LOGLIK_SENTINEL { LOGLIK_SENTINEL } else { v })
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            CopulaModel::Vine(v) => v.sample_one(rng),
            CopulaModel::Archimedean(a) => Ok(a.sample_one(rng)),
        }
    }
}

impl fmt::Display for CopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CopulaModel::Vine(v) => write!(f, "{v}"),
            CopulaModel::Archimedean(a) => write!(f, "{}d {}({})", a.dim(), a.family(), a.theta()),
        }
    }
}

/// A copula model to be fitted: families fixed, parameters free. Dimensions
/// left open are taken from the data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    Vine(VineLayout),
    Archimedean { family: CopulaFamily, d: Option<usize> },
    Independence { d: Option<usize> },
}

impl ModelSpec {
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Vine(l) => l.code(),
            ModelSpec::Archimedean { family, d: Some(d) } => format!("{d}d{}", family.letter()),
            ModelSpec::Archimedean { family, d: None } => format!("archimedean-{family}"),
            ModelSpec::Independence { d: Some(d) } => format!("{d}dInd"),
            ModelSpec::Independence { d: None } => "independence".into(),
        }
    }

    pub fn is_vine_like(&self) -> bool {
        !matches!(self, ModelSpec::Archimedean { .. })
    }

    /// Model dimension for data whose largest cluster has `d_data` gaps.
    pub fn dim_for(&self, d_data: usize) -> Result<usize> {
        let d = match self {
            ModelSpec::Vine(l) => l.dim(),
            ModelSpec::Archimedean { d, .. } | ModelSpec::Independence { d } => d.unwrap_or(d_data.max(2)),
        };
        if d_data > d {
            return Err(Error::Invalid(format!(
                "model {} has dimension {d} but the data has clusters of size {d_data}",
                self.label()
            )));
        }
        Ok(d)
    }

    /// The layout to fit for vine-like specs (independence = all-independence vine).
    pub fn layout_for(&self, d_data: usize) -> Result<Option<VineLayout>> {
        let d = self.dim_for(d_data)?;
        Ok(match self {
            ModelSpec::Vine(l) => Some(l.clone()),
            ModelSpec::Independence { .. } => Some(VineLayout::uniform(d, CopulaFamily::Independence)?),
            ModelSpec::Archimedean { .. } => None,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// "CFG|FF|F" or "tree1=[..];tree2=[..]" for a D-vine; "4dC", "3dG",
    /// "archimedean-frank" for Archimedean; "independence" or "4dInd".
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        if lower == "independence" || lower == "ind" {
            return Ok(ModelSpec::Independence { d: None });
        }
        if let Some(fam) = lower.strip_prefix("archimedean-").or_else(|| lower.strip_prefix("archimedean:")) {
            return Ok(ModelSpec::Archimedean { family: fam.parse()?, d: None });
        }
        if let Some((digits, rest)) = lower.split_once('d') {
            if let Ok(d) = digits.parse::<usize>() {
                if rest == "ind" || rest == "independence" {
                    return Ok(ModelSpec::Independence { d: Some(d) });
                }
                let family: CopulaFamily = rest.parse()?;
                if family == CopulaFamily::Independence {
                    return Ok(ModelSpec::Independence { d: Some(d) });
                }
                ArchimedeanModel::new(family, crate::bicop::theta_of_tau(family, 0.2)?, d)?;
                return Ok(ModelSpec::Archimedean { family, d: Some(d) });
            }
        }
        Ok(ModelSpec::Vine(t.parse()?))
    }
}
