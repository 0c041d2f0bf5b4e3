//! Decay of correlations: `|Cov(sigma(0), sigma(R e_1))|` from joint perfect
//! samples against `C * P(M >= ceil(R/2))`, with `M` the maximum of the
//! comparison walk.

use rayon::prelude::*;
use serde::Serialize;

use super::walk::{estimate_max_tail, rw_exponent, MaxTailEstimate};
use super::{check_replicas, AnalysisError, SLACK_SE};
use crate::assign::sample_window;
use crate::interaction::InteractionModel;
use crate::lattice::{Site, SiteSet};
use crate::sketch::DEFAULT_MAX_EVENTS;
use crate::streams::StreamKey;

/// `2 c_f c_g (|D_f| + |D_g|)` for two single-spin observables.
pub const SPIN_CONSTANT: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingConfig {
    pub distances: Vec<usize>,
    /// Joint samples per distance.
    pub replicas: u64,
    /// Random-walk replicas for the tail of `M`.
    pub walk_replicas: u64,
    pub seed: u64,
    pub eps: f64,
    /// Stopping ceiling for the walk; required when the Lundberg exponent is 0.
    pub ceiling: Option<u64>,
    pub max_events: u64,
    pub constant: f64,
}

impl MixingConfig {
    pub fn new(distances: Vec<usize>, replicas: u64, walk_replicas: u64, seed: u64) -> Self {
        MixingConfig {
            distances,
            replicas,
            walk_replicas,
            seed,
            eps: 1e-6,
            ceiling: None,
            max_events: DEFAULT_MAX_EVENTS,
            constant: SPIN_CONSTANT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingRow {
    pub distance: usize,
    pub covariance: f64,
    pub covariance_se: f64,
    /// `ceil(R/2)`.
    pub threshold: i64,
    /// Set when `R` is odd and `R/2` had to be rounded.
    pub rounded: bool,
    pub tail: f64,
    pub tail_upper: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub rho: f64,
    pub gamma: f64,
    pub max_tail: MaxTailEstimate,
    pub rows: Vec<MixingRow>,
}

impl MixingReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Sample covariance of paired spins and the standard error of
/// `mean((X - mean X)(Y - mean Y))`.
pub fn covariance(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let prods = crate::stats::Moments::of(pairs.iter().map(|(x, y)| (x - mx) * (y - my)));
    (prods.mean, prods.se())
}

/// Checks `|Cov(sigma(0), sigma(R e_1))| <= C * P(M >= ceil(R/2))` for each
/// distance. A distance passes when `|cov| - 3 SE` is at most `C` times the
/// upper 3-sigma Wilson limit of the tail estimate plus its stopping bias.
pub fn mixing_check(m: &InteractionModel, config: &MixingConfig) -> Result<MixingReport, AnalysisError> {
    check_replicas(config.replicas)?;
    if config.distances.contains(&0) {
        return Err(AnalysisError::Invalid("distance 0: observables need disjoint supports".into()));
    }
    let (rw, rho) = rw_exponent(m)?;
    let thresholds: Vec<i64> = config.distances.iter().map(|r| r.div_ceil(2) as i64).collect();
    let mut sorted = thresholds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let tail = estimate_max_tail(&rw, &sorted, config.walk_replicas, config.eps, config.seed, config.ceiling)?;
    let bias = tail.bias_bound.unwrap_or(f64::INFINITY);
    let d = m.dim();
    let mut rows = Vec::with_capacity(config.distances.len());
    for (&r, &th) in config.distances.iter().zip(&thresholds) {
        let far = Site::along_axis(d, i32::try_from(r).map_err(|_| AnalysisError::Invalid(format!("distance {r}")))?);
        let (a, b) = (Site::origin(d), far);
        let window: SiteSet = [a.clone(), b.clone()].into_iter().collect();
        let pairs: Vec<(f64, f64)> = (0..config.replicas)
            .into_par_iter()
            .map(|rep| {
                let s = sample_window(m, &window, StreamKey::new(config.seed, rep), config.max_events)?;
                Ok((s.spins.spin(&a)? as f64, s.spins.spin(&b)? as f64))
            })
            .collect::<Result<_, AnalysisError>>()?;
        let (cov, se) = covariance(&pairs);
        let p = tail.estimate_at(th).expect("threshold was estimated");
        let upper = p.wilson(SLACK_SE).1;
        rows.push(MixingRow {
            distance: r,
            covariance: cov,
            covariance_se: se,
            threshold: th,
            rounded: r % 2 == 1,
            tail: p.estimate(),
            tail_upper: upper,
            bound: config.constant * p.estimate(),
            pass: cov.abs() - SLACK_SE * se <= config.constant * (upper + bias),
        });
    }
    Ok(MixingReport { rho, gamma: rw.gamma(), max_tail: tail, rows })
}
