//! Command implementations behind the `gapvine` binary. Each command writes
//! its report to the given sink and returns whether estimation converged.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gapvine::config::read_scenario_path;
use gapvine::estimate::HEAVY_TAIL_THRESHOLD;
use gapvine::io::{read_long_csv_path, write_long_csv_path};
use gapvine::margins::dataset_jumps;
use gapvine::report::{dataset_summary, fit_report, fmt6, selection_table, Candidate};
use gapvine::simulate::{generate, replicate_rng};
use gapvine::{
    bootstrap_se, fit, CopulaFamily, Error, FitSpec, GapDataset, JumpMethod, ModelSpec, Scenario, Stages, Strategy,
    VineLayout,
};

#[derive(Debug, Parser)]
#[command(name = "gapvine", version, about = "Copula models for recurrent event gap times")]
pub struct Cli {
    /// Worker threads for bootstrap replicates and selection candidates.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one copula model and print estimates, log-likelihood and AIC.
    Fit(FitArgs),
    /// Simulate a dataset from a scenario file or preset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit several candidate models and rank them by AIC.
    Select(SelectArgs),
    /// One-stage fit with parametric bootstrap standard errors.
    Bootstrap(BootstrapArgs),
    /// Nelson-Aalen survival of the total times and its tail level.
    CheckTail(CheckTailArgs),
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    /// `1`/`weibull` (one-stage) or `2`/`nonparametric` (two-stage).
    #[arg(long, alias = "margins", default_value = "1")]
    pub stages: Stages,
    #[arg(long, default_value = "global")]
    pub strategy: Strategy,
    /// Optimizer evaluation budget per run.
    #[arg(long, default_value_t = 5000)]
    pub max_evals: usize,
}

impl EstimationArgs {
    fn spec(&self, model: ModelSpec) -> FitSpec {
        let mut s = FitSpec::new(model, self.stages, self.strategy);
        s.optim.max_evals = self.max_evals;
        s
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Long-format CSV: cluster_id,gap_index,gap_time,status.
    #[arg(long)]
    pub data: PathBuf,
    /// "CFG|FF|F", "tree1=[clayton,frank,gumbel];tree2=[frank,frank];tree3=[frank]",
    /// "4dC", "4dG", "4dF" or "independence".
    #[arg(long)]
    pub model: ModelSpec,
    #[command(flatten)]
    pub est: EstimationArgs,
    /// Also print the Nelson-Aalen tail check.
    #[arg(long)]
    pub check_tail: bool,
    /// Write the fit report here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (key = value lines).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario, e.g. ccf-15, cfg-30ht.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Candidate model; repeat for several.
    #[arg(long = "model")]
    pub models: Vec<ModelSpec>,
    /// Adds every D-vine with tree-1 families drawn from this list and the
    /// `--upper` family in the higher trees.
    #[arg(long, value_delimiter = ',')]
    pub tree1_permutations: Vec<CopulaFamily>,
    #[arg(long, default_value = "frank")]
    pub upper: CopulaFamily,
    /// Adds the Clayton, Gumbel and Frank Archimedean copulas.
    #[arg(long)]
    pub with_archimedean: bool,
    /// Adds the independence copula.
    #[arg(long)]
    pub with_independence: bool,
    #[command(flatten)]
    pub est: EstimationArgs,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: ModelSpec,
    #[arg(long, default_value = "global")]
    pub strategy: Strategy,
    /// Number of bootstrap replicates.
    #[arg(long = "replicates", short = 'B', default_value_t = 100)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub max_evals: usize,
}

#[derive(Debug, Args)]
pub struct CheckTailArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Write the survival curve (time,survival,jump) here.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => 2,
        }
    }
}

/// 2 for estimation failures, 1 for everything else (bad input, I/O).
pub fn error_exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::Numeric(_)) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> anyhow::Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| match cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Select(a) => cmd_select(a, out),
        Command::Bootstrap(a) => cmd_bootstrap(a, out),
        Command::CheckTail(a) => cmd_check_tail(a, out),
    })
}

fn load(path: &PathBuf) -> anyhow::Result<GapDataset> {
    read_long_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

fn tail_check(data: &GapDataset) -> anyhow::Result<String> {
    let jumps = dataset_jumps(data, JumpMethod::NelsonAalen)?;
    let tail = jumps.tail_survival();
    let verdict = if tail > HEAVY_TAIL_THRESHOLD {
        "heavily censored tail: prefer one-stage parametric estimation"
    } else {
        "tail not heavily censored: two-stage estimation is an option"
    };
    Ok(format!("tail_survival,{}\nheavy_tail,{}\nverdict,{verdict}\n", fmt6(tail), tail > HEAVY_TAIL_THRESHOLD))
}

pub fn cmd_fit(a: FitArgs, out: &mut (dyn Write + Send)) -> anyhow::Result<Outcome> {
    let data = load(&a.data)?;
    writeln!(out, "[data]\n{}", dataset_summary(&data))?;
    if a.check_tail {
        writeln!(out, "[tail]\n{}", tail_check(&data)?)?;
    }
    let f = fit(&data, &a.est.spec(a.model))?;
    let report = fit_report(&f);
    writeln!(out, "[fit]\n{report}")?;
    if let Some(p) = a.out {
        fs::write(&p, &report).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if f.converged { Outcome::Done } else { Outcome::NotConverged })
}

pub fn cmd_simulate(a: SimulateArgs, out: &mut (dyn Write + Send)) -> anyhow::Result<Outcome> {
    let mut s: Scenario = match (&a.config, &a.preset) {
        (Some(c), None) => read_scenario_path(c).with_context(|| format!("reading {}", c.display()))?,
        (None, Some(p)) => Scenario::preset(p)?,
        _ => bail!("give exactly one of --config or --preset"),
    };
    if let Some(n) = a.n {
        s.n = n;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    let data = generate(&s, &mut replicate_rng(s.seed, 0))?;
    write_long_csv_path(&data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(out, "copula,{}\nseed,{}\n{}", s.copula, s.seed, dataset_summary(&data))?;
    Ok(Outcome::Done)
}

/// Explicit candidates, then tree-1 permutations, Archimedean and independence.
pub fn candidate_models(a: &SelectArgs, d_data: usize) -> anyhow::Result<Vec<ModelSpec>> {
    let mut models = a.models.clone();
    if !a.tree1_permutations.is_empty() {
        if d_data < 2 {
            bail!("tree-1 permutations need clusters of size >= 2");
        }
        let fams = &a.tree1_permutations;
        let edges = d_data - 1;
        let total = fams.len().pow(edges as u32);
        for mut code in 0..total {
            let mut first = Vec::with_capacity(edges);
            for _ in 0..edges {
                first.push(fams[code % fams.len()]);
                code /= fams.len();
            }
            first.reverse();
            models.push(ModelSpec::Vine(VineLayout::with_first_tree(&first, a.upper)?));
        }
    }
    if a.with_archimedean {
        for f in [CopulaFamily::Clayton, CopulaFamily::Gumbel, CopulaFamily::Frank] {
            models.push(ModelSpec::Archimedean { family: f, d: Some(d_data.max(2)) });
        }
    }
    if a.with_independence {
        models.push(ModelSpec::Independence { d: None });
    }
    if models.is_empty() {
        bail!("no candidate models (use --model, --tree1-permutations, --with-archimedean, --with-independence)");
    }
    Ok(models)
}

pub fn cmd_select(a: SelectArgs, out: &mut (dyn Write + Send)) -> anyhow::Result<Outcome> {
    let data = load(&a.data)?;
    let models = candidate_models(&a, data.max_size())?;
    let cands: Vec<Candidate> =
        models.par_iter().map(|m| (m.label(), fit(&data, &a.est.spec(m.clone())).map_err(|e| e.to_string()))).collect();
    write!(out, "{}", selection_table(&cands))?;
    let fits: Vec<_> = cands.iter().filter_map(|(_, r)| r.as_ref().ok()).cloned().collect();
    if fits.is_empty() {
        return Err(Error::Numeric("no candidate could be fitted".into()).into());
    }
    let best = &fits[gapvine::select_by_aic(&fits)?];
    writeln!(out, "\nselected,{}", best.model_label)?;
    Ok(if best.converged { Outcome::Done } else { Outcome::NotConverged })
}

pub fn cmd_bootstrap(a: BootstrapArgs, out: &mut (dyn Write + Send)) -> anyhow::Result<Outcome> {
    let data = load(&a.data)?;
    let mut spec = FitSpec::new(a.model, Stages::One, a.strategy);
    spec.optim.max_evals = a.max_evals;
    let mut f = fit(&data, &spec)?;
    let bs = bootstrap_se(&data, &spec, &f, a.b, a.seed)?;
    let unreliable = bs.unreliable;
    f.bootstrap = Some(bs);
    writeln!(out, "{}", fit_report(&f))?;
    if unreliable {
        writeln!(out, "warning,more than 20% of bootstrap replicates were dropped")?;
    }
    Ok(if f.converged && !unreliable { Outcome::Done } else { Outcome::NotConverged })
}

pub fn cmd_check_tail(a: CheckTailArgs, out: &mut (dyn Write + Send)) -> anyhow::Result<Outcome> {
    let data = load(&a.data)?;
    write!(out, "{}", tail_check(&data)?)?;
    if let Some(p) = a.curve_out {
        let jumps = dataset_jumps(&data, JumpMethod::NelsonAalen)?;
        let file = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        jumps.write_csv(file)?;
    }
    Ok(Outcome::Done)
}
