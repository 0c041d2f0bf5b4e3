//! Quantitative checks of the sampler against its theoretical guarantees:
//! truncation discrepancy, d-bar bounds, stopping-time bounds, the mixing
//! envelope driven by the comparison random walk, and the heavy-tail
//! expression for that walk's maximum.
//!
//! Every Monte Carlo comparison is one-sided: an estimate passes when it is at
//! most `bound + 3 SE`.

mod mixing;
mod properties;
mod walk;

pub use mixing::{mixing_check, MixingConfig, MixingReport, MixingRow};
pub use properties::{
    decomposition_sweep, lambda_normalization, verify_suite, VerifyConfig, CONSISTENCY_Z, IDENTITY_TOLERANCE,
};
pub use walk::{
    estimate_max_tail, integrated_tail, korshunov_item1, korshunov_item1_by_parts, rw_exponent, MaxTailEstimate,
    RandomWalk,
};

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assign::{coupled_replicas, AssignError, CoupledSampleResult};
use crate::interaction::{gamma, GammaInterval, InteractionModel, ModelError, RangeDistribution};
use crate::lattice::{ball_volume, LatticeError, Site, SiteSet};
use crate::rates::RatesError;
use crate::sketch::{run_backward, stop_statistics_from, CoupledRecord, EventRecord, SketchError, StopStatistics};
use crate::stats::Proportion;
use crate::streams::StreamKey;

/// Standard errors of slack allowed above a bound.
pub const SLACK_SE: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("condition failed: {0}")]
    ConditionFailed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Assign(#[from] AssignError),
}

impl From<SketchError> for AnalysisError {
    fn from(e: SketchError) -> Self {
        AnalysisError::Assign(e.into())
    }
}

impl From<RatesError> for AnalysisError {
    fn from(e: RatesError) -> Self {
        AnalysisError::Assign(e.into())
    }
}

impl From<LatticeError> for AnalysisError {
    fn from(e: LatticeError) -> Self {
        AnalysisError::Assign(RatesError::from(e).into())
    }
}

pub(crate) fn origin_distribution(m: &InteractionModel) -> Result<RangeDistribution, AnalysisError> {
    if !m.is_translation_invariant() {
        return Err(AnalysisError::Unsupported("needs a translation-invariant model".into()));
    }
    Ok(m.range_distribution(&Site::origin(m.dim())))
}

fn origin_gamma(m: &InteractionModel) -> Result<GammaInterval, AnalysisError> {
    origin_distribution(m)?;
    let g = gamma(m, &SiteSet::singleton(Site::origin(m.dim())))?;
    if g.lower <= 0.0 {
        return Err(AnalysisError::ConditionFailed(format!("gamma = {} is not positive", g.lower)));
    }
    Ok(g)
}

fn check_replicas(replicas: u64) -> Result<(), AnalysisError> {
    if replicas == 0 {
        return Err(AnalysisError::Invalid("replicas must be positive".into()));
    }
    Ok(())
}

/// `delta(L) = 1 - exp(-beta S^{>L})`, using the certified upper tail.
pub fn delta(m: &InteractionModel, level: usize) -> Result<f64, AnalysisError> {
    let t = origin_distribution(m)?;
    Ok(-(-m.beta() * t.table().tail_interval(level).1).exp_m1())
}

/// Upper bound `delta(L) / gamma` on `P(X(i) != X^[L](i))`.
pub fn discrepancy_bound(m: &InteractionModel, level: usize) -> Result<f64, AnalysisError> {
    let g = origin_gamma(m)?;
    Ok(delta(m, level)? / g.lower)
}

/// Counts steps at which the sketch is larger than the comparison walk allows:
/// `|C_n| <= |C_0| + sum_{m<=n} xi_m` with `xi = -1` for removals and
/// `|B(k)| - 1` for growth by a ball of radius `k`.
pub fn supermartingale_violations(record: &EventRecord) -> Result<u64, AnalysisError> {
    let sizes = record.replay()?;
    let dim = record.start.iter().next().map_or(1, |s| s.dim());
    let mut walk = record.start.len() as f64;
    let mut violations = 0;
    for (e, c) in record.events.iter().zip(sizes.iter().skip(1)) {
        walk += if e.k == 0 { -1.0 } else { ball_volume(dim, e.k) - 1.0 };
        if c.len() as f64 > walk {
            violations += 1;
        }
    }
    Ok(violations)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscrepancyEstimate {
    pub level: usize,
    pub site: Site,
    pub disagreements: Proportion,
    pub records_differ: Proportion,
    pub bound: f64,
    pub wilson: (f64, f64),
    pub pass: bool,
    pub supermartingale_violations: u64,
}

impl DiscrepancyEstimate {
    pub fn estimate(&self) -> f64 {
        self.disagreements.estimate()
    }
}

/// Monte Carlo estimate of `P(X(site) != X^[L](site))` from coupled samples on
/// `{site}`; replica `r` uses `StreamKey::new(seed, r)`.
pub fn estimate_discrepancy(
    m: &InteractionModel,
    level: usize,
    site: &Site,
    replicas: u64,
    seed: u64,
    max_events: u64,
) -> Result<DiscrepancyEstimate, AnalysisError> {
    check_replicas(replicas)?;
    discrepancy_bound(m, level)?;
    let window = SiteSet::singleton(site.clone());
    let samples = coupled_replicas(m, level, &window, replicas, seed, max_events)?;
    discrepancy_from(m, level, site, &samples)
}

/// Summarizes coupled samples (any window containing `site`) at truncation `level`.
pub fn discrepancy_from(
    m: &InteractionModel,
    level: usize,
    site: &Site,
    samples: &[(CoupledSampleResult, CoupledRecord)],
) -> Result<DiscrepancyEstimate, AnalysisError> {
    check_replicas(samples.len() as u64)?;
    let bound = discrepancy_bound(m, level)?;
    let trials = samples.len() as u64;
    let mut differ = 0;
    let mut unequal = 0;
    let mut violations = 0;
    for (s, rec) in samples {
        differ += !s.agrees_at(site) as u64;
        unequal += !rec.records_equal as u64;
        violations += supermartingale_violations(&rec.full)? + supermartingale_violations(&rec.truncated)?;
    }
    let disagreements = Proportion::new(differ, trials);
    Ok(DiscrepancyEstimate {
        level,
        site: site.clone(),
        disagreements,
        records_differ: Proportion::new(unequal, trials),
        bound,
        wilson: disagreements.wilson(SLACK_SE),
        pass: disagreements.estimate() <= bound + SLACK_SE * disagreements.se(),
        supermartingale_violations: violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DbarBounds {
    pub level: usize,
    /// `delta(L) / gamma`; `None` when `gamma <= 0`.
    pub bound1: Option<f64>,
    /// `beta / (1 - r) * S^{>L}`; `None` when `r >= 1`.
    pub bound2: Option<f64>,
    pub r: f64,
    pub delta: f64,
    pub gamma: Option<GammaInterval>,
}

/// Both upper bounds on `d-bar(mu, mu^[L])`.
pub fn dbar_bounds(m: &InteractionModel, level: usize) -> Result<DbarBounds, AnalysisError> {
    let dist = origin_distribution(m)?;
    let t = dist.table();
    let beta = m.beta();
    let r = beta * t.tail_interval(0).1;
    let g = origin_gamma(m).ok();
    let delta = delta(m, level)?;
    Ok(DbarBounds {
        level,
        bound1: g.map(|g| delta / g.lower),
        bound2: (r < 1.0).then(|| beta / (1.0 - r) * t.tail_interval(level).1),
        r,
        delta,
        gamma: g,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingReport {
    pub gamma: GammaInterval,
    pub stats: StopStatistics,
    /// `(t, exp(-gamma t))` for each grid point.
    pub survival_bounds: Vec<(f64, f64)>,
    pub n_stop_pass: bool,
    pub survival_pass: bool,
    pub supermartingale_violations: u64,
    pub n_stop: Vec<u64>,
    pub t_stop: Vec<f64>,
}

/// Runs the backward sketch from `start` and compares `N_STOP` with
/// `|start| / gamma` and the survival of `T_STOP` with `exp(-gamma t)`
/// (single-site start) at each grid point.
pub fn stopping_check(
    m: &InteractionModel,
    start: &SiteSet,
    replicas: u64,
    seed: u64,
    grid: &[f64],
    max_events: u64,
) -> Result<StoppingReport, AnalysisError> {
    check_replicas(replicas)?;
    let g = origin_gamma(m)?;
    let per: Vec<(u64, f64, u64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let rec = run_backward(m, start, StreamKey::new(seed, r), max_events)?;
            Ok((rec.n_stop(), rec.t_stop(), supermartingale_violations(&rec)?))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let n_stop: Vec<u64> = per.iter().map(|p| p.0).collect();
    let t_stop: Vec<f64> = per.iter().map(|p| p.1).collect();
    let nf: Vec<f64> = n_stop.iter().map(|n| *n as f64).collect();
    let stats = stop_statistics_from(&nf, &t_stop, grid);
    let size = start.len() as f64;
    let survival_bounds: Vec<(f64, f64)> = grid.iter().map(|t| (*t, (size * (-g.lower * t).exp()).min(1.0))).collect();
    let survival_pass = stats.survival.iter().zip(&survival_bounds).all(|((_, p, se), (_, b))| *p <= b + SLACK_SE * se);
    Ok(StoppingReport {
        gamma: g,
        n_stop_pass: stats.mean_n_stop <= size / g.lower + SLACK_SE * stats.se_n_stop,
        survival_pass,
        survival_bounds,
        supermartingale_violations: per.iter().map(|p| p.2).sum(),
        stats,
        n_stop,
        t_stop,
    })
}

/// One row of an aggregate CSV report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub quantity: String,
    pub parameter: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

impl BoundRow {
    pub fn value(quantity: &str, parameter: impl ToString, value: f64) -> Self {
        BoundRow {
            quantity: quantity.into(),
            parameter: parameter.to_string(),
            value,
            ci_low: None,
            ci_high: None,
            bound: None,
            pass: None,
        }
    }

    pub fn with_ci(mut self, (lo, hi): (f64, f64)) -> Self {
        self.ci_low = Some(lo);
        self.ci_high = Some(hi);
        self
    }

    pub fn against(mut self, bound: f64, pass: bool) -> Self {
        self.bound = Some(bound);
        self.pass = Some(pass);
        self
    }
}

pub fn write_rows_csv(out: impl Write, rows: &[BoundRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
