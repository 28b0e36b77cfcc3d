//! Inversion sampling of failure stages and the parametric-bootstrap
//! chi-square goodness-of-fit test.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, ProfileGrid};
use crate::likelihood::{Dataset, Observation};
use crate::model::CeModel;
use crate::params::{ModelParams, Param};

/// Test exposure accumulated at failure for the uniform draw `u`.
///
/// Inverts `u = 1 - exp(ε(0)^β - ε(T)^β)` and returns `ε(T) - ε(0)`.
pub fn failure_exposure(model: &CeModel, ts: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidInput(format!("u must lie in (0, 1), got {u}")));
    }
    let e0 = model.exposure(0.0, ts)?.value();
    let beta = model.params().beta;
    let x = -(-u).ln_1p();
    if e0 == 0.0 {
        Ok(x.powf(1.0 / beta))
    } else {
        Ok(e0 * ((x / e0.powf(beta)).ln_1p() / beta).exp_m1())
    }
}

/// Inverts the stage-wise exposure, caching cumulative stage rates.
#[derive(Debug, Clone)]
pub struct StageSampler {
    model: CeModel,
    /// `cum[j]`: test exposure through stage `k + j`.
    cum: Vec<f64>,
}

impl StageSampler {
    pub fn new(model: CeModel) -> Self {
        StageSampler {
            model,
            cum: Vec::new(),
        }
    }

    fn rate(&self, m: usize) -> f64 {
        self.model
            .inv_scale(crate::model::Stage::Test(m))
            .expect("stage at or after the first effective stage")
    }

    /// Least stage `i >= k` whose cumulative exposure reaches `d`.
    fn stage_for(&mut self, d: f64) -> usize {
        let k = self.model.first_effective_stage();
        while self.cum.last().is_none_or(|&c| c < d) {
            let m = k + self.cum.len();
            let prev = self.cum.last().copied().unwrap_or(0.0);
            self.cum.push(prev + self.rate(m));
        }
        k + self.cum.partition_point(|&c| c < d)
    }

    /// Stage-start value `t_{l-1} / Δt` of the failure stage.
    pub fn sample(&mut self, ts: f64, u: f64) -> Result<u32> {
        let d = failure_exposure(&self.model, ts, u)?;
        Ok((self.stage_for(d) - 2) as u32)
    }

    /// Continuous normalized failure time.
    pub fn failure_time(&mut self, ts: f64, u: f64) -> Result<f64> {
        let d = failure_exposure(&self.model, ts, u)?;
        let i = self.stage_for(d);
        let j = i - self.model.first_effective_stage();
        let before = if j == 0 { 0.0 } else { self.cum[j - 1] };
        let frac = ((d - before) / self.rate(i)).clamp(0.0, 1.0);
        Ok((i - 2) as f64 + frac)
    }
}

pub fn sample_failure(model: &CeModel, ts: f64, u: f64) -> Result<u32> {
    StageSampler::new(*model).sample(ts, u)
}

pub fn failure_time(model: &CeModel, ts: f64, u: f64) -> Result<f64> {
    StageSampler::new(*model).failure_time(ts, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateRow {
    pub ts: f64,
    pub count: u32,
}

/// Prior exposures and specimen counts of a simulated test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTemplate {
    rows: Vec<TemplateRow>,
}

impl DesignTemplate {
    pub fn new(rows: Vec<TemplateRow>) -> Result<Self> {
        for r in &rows {
            if !(r.ts.is_finite() && r.ts >= 0.0) || r.count == 0 {
                return Err(Error::InvalidInput(format!(
                    "template row ({}, {}) needs ts >= 0 and count >= 1",
                    r.ts, r.count
                )));
            }
        }
        Ok(DesignTemplate { rows })
    }

    /// Counts of the active observations per distinct `ts`, in order of
    /// first appearance.
    pub fn from_dataset(data: &Dataset) -> Self {
        let mut rows: Vec<TemplateRow> = Vec::new();
        for (_, o) in data.active() {
            match rows.iter_mut().find(|r| r.ts == o.ts) {
                Some(r) => r.count += 1,
                None => rows.push(TemplateRow { ts: o.ts, count: 1 }),
            }
        }
        DesignTemplate { rows }
    }

    pub fn rows(&self) -> &[TemplateRow] {
        &self.rows
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.count as usize).sum()
    }

    pub fn count_at(&self, ts: f64) -> Option<u32> {
        self.rows.iter().find(|r| r.ts == ts).map(|r| r.count)
    }
}

/// Draws one observation per template slot from `rng`.
pub fn generate_dataset_with<R: Rng>(
    template: &DesignTemplate,
    model: &CeModel,
    rng: &mut R,
) -> Result<Dataset> {
    let mut sampler = StageSampler::new(*model);
    let mut obs = Vec::with_capacity(template.total());
    for row in template.rows() {
        for _ in 0..row.count {
            let u: f64 = rng.sample(Open01);
            obs.push(Observation::new(row.ts, sampler.sample(row.ts, u)?));
        }
    }
    Ok(Dataset::new(obs, *model.plan()))
}

pub fn generate_dataset(template: &DesignTemplate, model: &CeModel, seed: u64) -> Result<Dataset> {
    generate_dataset_with(template, model, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Bins for one prior exposure.
///
/// With upper edges `e_1 < ... < e_{κ-1}` the bins are `[0, e_1]`,
/// `(e_1, e_2]`, ..., `(e_{κ-1}, ∞)`. Observed counts bin the recorded
/// stage-start values; probabilities bin the continuous failure time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGroup {
    pub ts: f64,
    pub edges: Vec<f64>,
}

impl BinGroup {
    pub fn kappa(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin_of(&self, stage_start: u32) -> usize {
        let x = stage_start as f64;
        self.edges.partition_point(|&e| e < x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    groups: Vec<BinGroup>,
}

impl BinSpec {
    pub fn new(groups: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let mut out: Vec<BinGroup> = Vec::with_capacity(groups.len());
        for (ts, edges) in groups {
            if !(ts.is_finite() && ts >= 0.0) {
                return Err(Error::InvalidInput(format!("bin key {ts} is not a valid ts")));
            }
            if edges.is_empty() {
                return Err(Error::InvalidInput(format!("bins for ts = {ts} need at least one edge")));
            }
            if edges.iter().any(|e| !(e.is_finite() && *e >= 0.0))
                || edges.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(Error::InvalidInput(format!(
                    "bin edges for ts = {ts} must be finite, >= 0 and strictly increasing"
                )));
            }
            if out.iter().any(|g| g.ts == ts) {
                return Err(Error::InvalidInput(format!("duplicate bins for ts = {ts}")));
            }
            out.push(BinGroup { ts, edges });
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("no bins given".into()));
        }
        out.sort_by(|a, b| a.ts.total_cmp(&b.ts));
        Ok(BinSpec { groups: out })
    }

    pub fn groups(&self) -> &[BinGroup] {
        &self.groups
    }
}

/// Probability that the failure time falls in each bin, with the edges
/// read as normalized times: `G(e_1)`, `G(e_2) - G(e_1)`, ..., `1 - G(e_{κ-1})`.
pub fn group_probabilities(model: &CeModel, group: &BinGroup) -> Result<Vec<f64>> {
    let log_surv = group
        .edges
        .iter()
        .map(|&e| model.log_survival(e, group.ts))
        .collect::<Result<Vec<_>>>()?;
    let mut p = Vec::with_capacity(group.kappa());
    p.push(-log_surv[0].exp_m1());
    for w in log_surv.windows(2) {
        p.push(w[0].exp() * -(w[1] - w[0]).exp_m1());
    }
    p.push(log_surv.last().unwrap().exp());
    Ok(p)
}

pub fn bin_counts(values: impl IntoIterator<Item = u32>, group: &BinGroup) -> Vec<u64> {
    let mut counts = vec![0; group.kappa()];
    for v in values {
        counts[group.bin_of(v)] += 1;
    }
    counts
}

/// Pearson statistic `Σ (m_i - N p_i)^2 / (N p_i)` with `N = Σ m_i`.
pub fn chi_square_stat(counts: &[u64], probs: &[f64]) -> Result<f64> {
    if counts.len() != probs.len() {
        return Err(Error::InvalidInput(format!(
            "{} counts but {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let mut t = 0.0;
    for (&m, &p) in counts.iter().zip(probs) {
        if !(p >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid probability {p}")));
        }
        if p == 0.0 {
            if m > 0 {
                return Err(Error::Singular(format!("{m} observations in a bin of probability 0")));
            }
            continue;
        }
        let expected = n * p;
        t += (m as f64 - expected).powi(2) / expected;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub ts: f64,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub statistic: f64,
}

fn group_stat(data: &Dataset, model: &CeModel, group: &BinGroup) -> Result<GroupStat> {
    let counts = bin_counts(
        data.active()
            .filter(|(_, o)| o.ts == group.ts)
            .map(|(_, o)| o.stage_start),
        group,
    );
    let probabilities = group_probabilities(model, group)?;
    let statistic = chi_square_stat(&counts, &probabilities)?;
    Ok(GroupStat {
        ts: group.ts,
        counts,
        probabilities,
        statistic,
    })
}

/// Counts, probabilities and statistics of every bin group on `data`.
pub fn observed_statistics(data: &Dataset, model: &CeModel, bins: &BinSpec) -> Result<Vec<GroupStat>> {
    bins.groups()
        .iter()
        .map(|g| group_stat(data, model, g))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// Refit every simulated set and use its own estimates for `p_i`.
    Refit,
    /// Use the generating parameters for `p_i`.
    TrueParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofConfig {
    /// Number of successful replicates wanted.
    pub replicates: usize,
    pub seed: u64,
    pub mode: BootstrapMode,
    pub fit: FitConfig,
    /// Upper bound on simulated sets, failed ones included.
    pub max_attempts: usize,
}

impl GofConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        let fit = FitConfig {
            profile: Some(ProfileGrid {
                start: 0.85,
                end: 0.999,
                step: 0.001,
            }),
            ..FitConfig::default()
        };
        GofConfig {
            replicates,
            seed,
            mode: BootstrapMode::Refit,
            fit,
            max_attempts: 10 * replicates + 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub param: Param,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub observed: Vec<GroupStat>,
    pub mode: BootstrapMode,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    /// Simulated sets drawn, failed refits included.
    pub attempts: usize,
    pub failed_fits: usize,
    /// Per bin group: replicates with `T_sim >= T`.
    pub exceedances: Vec<usize>,
    /// Replicates exceeding in every group at once.
    pub simultaneous: usize,
    /// `simultaneous / replicates_used`.
    pub p_value_bound: Option<f64>,
    /// Empty unless the replicates were refitted.
    pub estimates: Vec<ParamSummary>,
}

enum Replicate {
    Failed,
    Done {
        estimate: Option<[f64; 4]>,
        statistics: Vec<f64>,
    },
}

fn run_replicate(
    index: usize,
    fitted: &CeModel,
    bins: &BinSpec,
    template: &DesignTemplate,
    config: &GofConfig,
) -> Result<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let data = generate_dataset_with(template, fitted, &mut rng)?;
    let (model, estimate) = match config.mode {
        BootstrapMode::TrueParams => (*fitted, None),
        BootstrapMode::Refit => match fit(&data, &config.fit) {
            Ok(r) if r.converged => (
                CeModel::new(r.params, *fitted.plan())?,
                Some(r.params.as_array()),
            ),
            _ => return Ok(Replicate::Failed),
        },
    };
    let statistics = match observed_statistics(&data, &model, bins) {
        Ok(s) => s.into_iter().map(|g| g.statistic).collect(),
        // a refit under which some simulated datum has probability 0
        Err(_) => return Ok(Replicate::Failed),
    };
    Ok(Replicate::Done {
        estimate,
        statistics,
    })
}

/// Parametric bootstrap of the chi-square statistics.
///
/// Replicate `r` draws from stream `r` of a ChaCha8 generator keyed by the
/// seed. Replicates are evaluated in parallel but consumed in index order
/// until enough have succeeded, so results do not depend on thread count.
pub fn gof_monte_carlo(
    data: &Dataset,
    fitted: &ModelParams,
    bins: &BinSpec,
    template: &DesignTemplate,
    config: &GofConfig,
) -> Result<GofReport> {
    let model = CeModel::new(*fitted, data.plan)?;
    for g in bins.groups() {
        if template.count_at(g.ts).is_none() {
            return Err(Error::InvalidInput(format!(
                "bin group ts = {} is missing from the template",
                g.ts
            )));
        }
    }
    if config.mode == BootstrapMode::Refit {
        config.fit.validate()?;
    }
    let observed = observed_statistics(data, &model, bins)?;
    let t_obs: Vec<f64> = observed.iter().map(|g| g.statistic).collect();

    let mut exceedances = vec![0; t_obs.len()];
    let mut simultaneous = 0;
    let mut estimates: Vec<[f64; 4]> = Vec::new();
    let mut used = 0;
    let mut failed = 0;
    let mut next = 0;
    while used < config.replicates && next < config.max_attempts {
        let want = config.replicates - used;
        let chunk = (want + want / 4 + 8).min(config.max_attempts - next);
        let results: Vec<Result<Replicate>> = (next..next + chunk)
            .into_par_iter()
            .map(|i| run_replicate(i, &model, bins, template, config))
            .collect();
        for r in results {
            next += 1;
            match r? {
                Replicate::Failed => failed += 1,
                Replicate::Done {
                    estimate,
                    statistics,
                } => {
                    let hits: Vec<bool> =
                        statistics.iter().zip(&t_obs).map(|(s, t)| s >= t).collect();
                    for (e, h) in exceedances.iter_mut().zip(&hits) {
                        *e += usize::from(*h);
                    }
                    simultaneous += usize::from(hits.iter().all(|&h| h));
                    estimates.extend(estimate);
                    used += 1;
                }
            }
            if used == config.replicates {
                break;
            }
        }
    }
    if config.replicates > 0 && used == 0 {
        return Err(Error::Solver(format!(
            "no successful replicate in {next} attempts"
        )));
    }
    Ok(GofReport {
        observed,
        mode: config.mode,
        replicates_requested: config.replicates,
        replicates_used: used,
        attempts: next,
        failed_fits: failed,
        exceedances,
        simultaneous,
        p_value_bound: (used > 0).then(|| simultaneous as f64 / used as f64),
        estimates: summarize(fitted, &estimates),
    })
}

/// Mean, bias and unbiased sample variance of each parameter.
fn summarize(truth: &ModelParams, estimates: &[[f64; 4]]) -> Vec<ParamSummary> {
    if estimates.is_empty() {
        return Vec::new();
    }
    let n = estimates.len() as f64;
    Param::ALL
        .iter()
        .map(|&p| {
            let i = p.index();
            let mean = estimates.iter().map(|e| e[i]).sum::<f64>() / n;
            let variance = if estimates.len() > 1 {
                estimates.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ParamSummary {
                param: p,
                truth: truth.get(p),
                mean,
                bias: mean - truth.get(p),
                variance,
            }
        })
        .collect()
}
