//! Unconstrained parameterizations used by the optimizer. Every map returns
//! None outside its box, which the objectives turn into +∞.

use crate::archimedean::ArchimedeanModel;
use crate::bicop::{theta_of_tau, CopulaFamily};
use crate::dvine::{edge_of_index, DVineModel, VineLayout};
use crate::error::Result;
use crate::margins::WeibullMargin;
use crate::model::CopulaModel;

const CLAYTON_MIN: f64 = 1e-4;
const CLAYTON_MAX: f64 = 100.0;
const GUMBEL_MAX_EXCESS: f64 = 99.0;
const FRANK_MAX: f64 = 100.0;
/// Frank θ closer to 0 than this is evaluated as the independence limit.
const FRANK_TINY: f64 = 1e-12;
const LOG_LAMBDA_MAX: f64 = 30.0;
const RHO_MIN: f64 = 0.02;
const RHO_MAX: f64 = 50.0;

/// Starting dependence: Kendall's τ = 0.2.
pub(crate) const INIT_TAU: f64 = 0.2;

pub(crate) fn init_theta(family: CopulaFamily) -> f64 {
    match family {
        CopulaFamily::Independence => 0.0,
        f => theta_of_tau(f, INIT_TAU).expect("τ = 0.2 is attainable by every family"),
    }
}

/// θ from the unconstrained coordinate. `positive_frank` restricts Frank to
/// θ > 0 (Archimedean Frank in more than two dimensions).
pub(crate) fn theta_of_x(family: CopulaFamily, x: f64, positive_frank: bool) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    match family {
        CopulaFamily::Independence => Some(0.0),
        CopulaFamily::Clayton => (CLAYTON_MIN.ln()..=CLAYTON_MAX.ln()).contains(&x).then(|| x.exp()),
        CopulaFamily::Gumbel => (CLAYTON_MIN.ln()..=GUMBEL_MAX_EXCESS.ln()).contains(&x).then(|| 1.0 + x.exp()),
        CopulaFamily::Frank => {
            if x.abs() > FRANK_MAX || (positive_frank && x <= 0.0) {
                None
            } else if x.abs() < FRANK_TINY {
                Some(FRANK_TINY.copysign(if x == 0.0 { 1.0 } else { x }))
            } else {
                Some(x)
            }
        }
    }
}

pub(crate) fn x_of_theta(family: CopulaFamily, theta: f64) -> f64 {
    match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Clayton => theta.ln(),
        CopulaFamily::Gumbel => (theta - 1.0).max(CLAYTON_MIN).ln(),
        CopulaFamily::Frank => theta,
    }
}

pub(crate) fn margin_of_x(x: &[f64]) -> Option<WeibullMargin> {
    let (ll, lr) = (x[0], x[1]);
    if !(ll.abs() <= LOG_LAMBDA_MAX) || !(RHO_MIN.ln()..=RHO_MAX.ln()).contains(&lr) {
        return None;
    }
    WeibullMargin::new(ll.exp(), lr.exp()).ok()
}

pub(crate) fn x_of_margin(m: &WeibullMargin) -> [f64; 2] {
    [m.lambda().ln().clamp(-LOG_LAMBDA_MAX, LOG_LAMBDA_MAX), m.rho().ln().clamp(RHO_MIN.ln(), RHO_MAX.ln())]
}

/// The copula part of a fit: a model skeleton with some free parameters and
/// the remaining ones held fixed.
#[derive(Debug, Clone)]
pub(crate) enum CopulaSkeleton {
    /// `layout` already has non-estimable edges set to independence.
    Vine {
        layout: VineLayout,
        thetas: Vec<f64>,
        free: Vec<usize>,
    },
    Archimedean {
        family: CopulaFamily,
        d: usize,
        theta: f64,
        free: bool,
    },
}

impl CopulaSkeleton {
    /// Vine whose edges with k + ℓ > `d_data` become independence; all other
    /// non-independence edges are free and start at τ = 0.2.
    pub(crate) fn vine(layout: &VineLayout, d_data: usize) -> Result<Self> {
        let d = layout.dim();
        let families: Vec<CopulaFamily> = layout
            .families()
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let (tree, pos) = edge_of_index(d, i);
                if pos + tree > d_data {
                    CopulaFamily::Independence
                } else {
                    f
                }
            })
            .collect();
        let thetas = families.iter().map(|&f| init_theta(f)).collect();
        let free = (0..families.len()).filter(|&i| families[i] != CopulaFamily::Independence).collect();
        Ok(CopulaSkeleton::Vine { layout: VineLayout::new(d, families)?, thetas, free })
    }

    pub(crate) fn archimedean(family: CopulaFamily, d: usize, d_data: usize) -> Self {
        CopulaSkeleton::Archimedean { family, d, theta: init_theta(family), free: d_data >= 2 }
    }

    pub(crate) fn n_free(&self) -> usize {
        match self {
            CopulaSkeleton::Vine { free, .. } => free.len(),
            CopulaSkeleton::Archimedean { free, .. } => usize::from(*free),
        }
    }

    pub(crate) fn x0(&self) -> Vec<f64> {
        match self {
            CopulaSkeleton::Vine { layout, thetas, free } => {
                free.iter().map(|&i| x_of_theta(layout.families()[i], thetas[i])).collect()
            }
            CopulaSkeleton::Archimedean { family, theta, free, .. } => {
                if *free {
                    vec![x_of_theta(*family, *theta)]
                } else {
                    vec![]
                }
            }
        }
    }

    /// Writes free parameters back into the skeleton.
    pub(crate) fn set_x(&mut self, x: &[f64]) -> Option<()> {
        match self {
            CopulaSkeleton::Vine { layout, thetas, free } => {
                for (&i, &xi) in free.iter().zip(x) {
                    thetas[i] = theta_of_x(layout.families()[i], xi, false)?;
                }
            }
            CopulaSkeleton::Archimedean { family, d, theta, free } => {
                if *free {
                    *theta = theta_of_x(*family, x[0], *d > 2)?;
                }
            }
        }
        Some(())
    }

    pub(crate) fn model(&self) -> Option<CopulaModel> {
        match self {
            CopulaSkeleton::Vine { layout, thetas, .. } => {
                DVineModel::from_layout(layout, thetas).ok().map(CopulaModel::Vine)
            }
            CopulaSkeleton::Archimedean { family, d, theta, .. } => {
                ArchimedeanModel::new(*family, *theta, *d).ok().map(CopulaModel::Archimedean)
            }
        }
    }

    /// Model at the given free parameters, leaving the skeleton untouched.
    pub(crate) fn model_at(&self, x: &[f64]) -> Option<CopulaModel> {
        let mut s = self.clone();
        s.set_x(x)?;
        s.model()
    }
}
