use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use weibull_ce::params::{DEFAULT_K0, DV_22KV};

#[derive(Debug, Parser)]
#[command(name = "wce", version, about = "Weibull cumulative exposure model for step-stress life tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum likelihood fit of a dataset.
    Fit(FitArgs),
    /// Mean and standard deviation of the normalized failure time over a grid of prior exposures.
    Curves(CurvesArgs),
    /// Generate a synthetic dataset from a design template.
    Simulate(SimulateArgs),
    /// Chi-square goodness of fit with a parametric bootstrap.
    Gof(GofArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeritArg {
    Either,
    Natural,
    Residual,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Normalized voltage step.
    #[arg(long, default_value_t = DV_22KV)]
    pub dv: f64,
    /// Scale normalizer.
    #[arg(long, default_value_t = DEFAULT_K0)]
    pub k0: f64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Residual max-norm tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Sufficient-decrease test used by the damped Newton steps.
    #[arg(long, value_enum, default_value_t = MeritArg::Either)]
    pub merit: MeritArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Initial guess `beta,n,zeta,v_th`.
    #[arg(long, default_value = "2.0,2,1,0.5")]
    pub init: Quad,
    /// Profile sweep `start,end,step` over v_th.
    #[arg(long, default_value = "0.5,0.999,0.001", conflicts_with = "no_profile")]
    pub profile: Triple,
    /// Skip the profile sweep and solve from `--init` directly.
    #[arg(long)]
    pub no_profile: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Prior-exposure grid `start:end:COUNT(log|lin)`, e.g. `1e3:1e7:50log`.
    #[arg(long)]
    pub grid: TsGrid,
    /// Single parameter set `beta,n,zeta,v_th`.
    #[arg(long, required_unless_present = "table1", conflicts_with = "table1")]
    pub params: Option<Quad>,
    /// Sweep the 54-point reference grid instead of a single parameter set.
    #[arg(long)]
    pub table1: bool,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one CSV per parameter combination into this directory.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generating parameters `beta,n,zeta,v_th`.
    #[arg(long)]
    pub params: Quad,
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Refit every simulated set.
    Refit,
    /// Use the generating parameters for the bin probabilities.
    True,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Parameters to test, `beta,n,zeta,v_th`.
    #[arg(long, required_unless_present = "refit", conflicts_with = "refit")]
    pub params: Option<Quad>,
    /// Fit `--data` first (default fit settings) and test the estimates.
    #[arg(long)]
    pub refit: bool,
    /// Bin JSON.
    #[arg(long)]
    pub bins: PathBuf,
    /// Design template CSV; defaults to the active rows of `--data`.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Profile sweep used by the bootstrap refits.
    #[arg(long, default_value = "0.85,0.999,0.001")]
    pub profile: Triple,
    /// Initial guess of the bootstrap refits; defaults to the tested parameters.
    #[arg(long)]
    pub init: Option<Quad>,
    #[arg(long, value_enum, default_value_t = ModeArg::Refit)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct Quad(pub [f64; 4]);

impl FromStr for Quad {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s).map(Quad)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Triple(pub [f64; 3]);

impl FromStr for Triple {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s).map(Triple)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
    pub log: bool,
}

impl FromStr for TsGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `start:end:COUNTlog` or `start:end:COUNTlin`, got `{s}`");
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts[..] else {
            return Err(bad());
        };
        let start: f64 = a.parse().map_err(|_| bad())?;
        let end: f64 = b.parse().map_err(|_| bad())?;
        let (count, log) = if let Some(n) = c.strip_suffix("log") {
            (n, true)
        } else if let Some(n) = c.strip_suffix("lin") {
            (n, false)
        } else {
            (c, false)
        };
        let count: usize = count.parse().map_err(|_| bad())?;
        if count == 0 || !(start.is_finite() && end.is_finite()) || start < 0.0 || end < start {
            return Err(bad());
        }
        if log && start <= 0.0 {
            return Err(format!("a log grid needs start > 0, got `{s}`"));
        }
        Ok(TsGrid {
            start,
            end,
            count,
            log,
        })
    }
}

impl TsGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|j| {
                let t = j as f64 / last;
                if self.log {
                    (self.start.ln() + t * (self.end.ln() - self.start.ln())).exp()
                } else {
                    self.start + t * (self.end - self.start)
                }
            })
            .collect()
    }
}
