//! Copula models for recurrent event gap times under induced dependent
//! right-censoring: bivariate pair-copulas, exchangeable Archimedean copulas,
//! ordered D-vines, Weibull and nonparametric margins, the one- and two-stage
//! censored likelihood estimators, simulation and bootstrap.

pub mod archimedean;
pub mod bicop;
pub mod config;
pub mod data;
pub mod dvine;
pub mod error;
pub mod estimate;
pub mod io;
pub mod margins;
pub mod model;
pub mod optim;
pub mod report;
pub mod simulate;
pub mod special;

pub use archimedean::ArchimedeanModel;
pub use bicop::{tau_of_theta, theta_of_tau, BivariateCopula, CopulaFamily};
pub use data::{Cluster, GapDataset};
pub use dvine::{DVineModel, Status, VineLayout};
pub use error::{Error, Result};
pub use estimate::{
    aic_of, bootstrap_se, fit, select_by_aic, BootstrapSummary, EdgeEstimate, FitResult, FitSpec, Stages, Strategy,
};
pub use margins::{JumpMethod, SurvivalJumpTable, WeibullMargin};
pub use model::{CopulaModel, ModelSpec};
pub use simulate::{generate, run_replication_study, Scenario};
