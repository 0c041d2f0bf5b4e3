//! Deterministic identities (range-law normalization, rate decomposition) and
//! the full property suite behind `verify`.

use rayon::prelude::*;
use serde::Serialize;

use super::mixing::{mixing_check, MixingConfig};
use super::walk::rw_exponent;
use super::{
    dbar_bounds, estimate_discrepancy, stopping_check, supermartingale_violations, AnalysisError, BoundRow, SLACK_SE,
};
use crate::assign::sample_replicas;
use crate::interaction::{check_conditions, CheckStatus, InteractionModel, KernelShape, Potential};
use crate::lattice::{ball, Site, SiteSet};
use crate::oracle::{conditional_consistency, transfer_matrix_1d};
use crate::rates::{decomposition_check, SpinWindow};
use crate::sketch::DEFAULT_MAX_EVENTS;
use crate::stats::Moments;
use crate::streams::{Lane, LaneStream, StreamKey, UniformSource};

/// Tolerance for the exact identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
/// `|z|` above which a conditional-consistency bin fails.
pub const CONSISTENCY_Z: f64 = 4.0;

/// `|sum_{k<=H} lambda(k) + P(range > H) - 1|`, with the mass past the
/// horizon bounded by `1 - exp(-beta * remainder)`.
pub fn lambda_normalization(m: &InteractionModel, site: &Site) -> f64 {
    let dist = m.range_distribution(site);
    let t = dist.table();
    let explicit: f64 = (0..=t.horizon()).rev().map(|k| dist.lambda(k)).sum();
    let tail = -(-m.beta() * t.remainder()).exp_m1();
    (explicit + tail - 1.0).abs()
}

/// Largest decomposition residual over `tuples` random `(site, sigma, ell)`
/// with `ell <= max_level`; sites come from the model's reference sites
/// shifted by up to 5 in each coordinate when the model is translation
/// invariant, and spins are uniform on `B_i(ell)`.
pub fn decomposition_sweep(
    m: &InteractionModel,
    tuples: u64,
    max_level: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    let refs: Vec<Site> = m.reference_sites().iter().cloned().collect();
    let worst = (0..tuples)
        .into_par_iter()
        .map(|n| {
            let mut u = LaneStream::new(StreamKey::new(seed, n), Lane::Walk);
            let pick = |u: f64, len: usize| ((u * len as f64) as usize).min(len - 1);
            let mut site = refs[pick(u.uniform(), refs.len())].clone();
            if m.is_translation_invariant() {
                let shift: Vec<i32> = (0..m.dim()).map(|_| pick(u.uniform(), 11) as i32 - 5).collect();
                site = site.offset_by(&Site::new(&shift))?;
            }
            let ell = pick(u.uniform(), max_level + 1);
            let region = ball(&site, ell.max(1))?;
            let sigma: SpinWindow =
                region.iter().map(|s| (s.clone(), if u.uniform() < 0.5 { 1 } else { -1 })).collect();
            Ok(decomposition_check(m, &site, &sigma, ell)?)
        })
        .collect::<Result<Vec<f64>, AnalysisError>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub replicas: u64,
    pub walk_replicas: u64,
    pub seed: u64,
    pub max_events: u64,
    pub decomposition_tuples: u64,
    pub levels: Vec<usize>,
    pub distances: Vec<usize>,
}

impl VerifyConfig {
    pub fn new(replicas: u64, seed: u64) -> Self {
        VerifyConfig {
            replicas,
            walk_replicas: 10 * replicas,
            seed,
            max_events: DEFAULT_MAX_EVENTS,
            decomposition_tuples: 200,
            levels: vec![1, 2, 4, 8],
            distances: vec![2, 4, 6],
        }
    }
}

fn nearest_neighbor_coupling(m: &InteractionModel) -> Option<f64> {
    match m.potential() {
        Potential::Pairwise(k) if m.dim() == 1 && k.shape == KernelShape::NearestNeighbor => Some(k.amplitude),
        _ => None,
    }
}

fn check_row(quantity: &str, parameter: impl ToString, value: f64, bound: f64) -> BoundRow {
    BoundRow::value(quantity, parameter, value).against(bound, value <= bound)
}

/// Runs every property the library can check for `m` and returns one row per
/// comparison. Checks that need translation invariance, a finite range or a
/// positive `gamma` are skipped when those fail; a failed termination
/// condition yields `ConditionFailed` since nothing can be sampled.
pub fn verify_suite(m: &InteractionModel, config: &VerifyConfig) -> Result<Vec<BoundRow>, AnalysisError> {
    if config.replicas == 0 {
        return Err(AnalysisError::Invalid("replicas must be positive".into()));
    }
    let mut rows = Vec::new();
    let refs = m.reference_sites();
    for s in refs.iter() {
        rows.push(check_row("lambda_normalization", s, lambda_normalization(m, s), IDENTITY_TOLERANCE));
    }
    let worst = decomposition_sweep(m, config.decomposition_tuples, 8, config.seed)?;
    rows.push(check_row(
        "decomposition_residual",
        format!("tuples={}", config.decomposition_tuples),
        worst,
        IDENTITY_TOLERANCE,
    ));

    let report = check_conditions(m, &refs);
    let t = &report.termination;
    rows.push(BoundRow::value("termination_sum", "", t.value).against(1.0, t.status == CheckStatus::Pass));
    if t.status != CheckStatus::Pass {
        return Err(AnalysisError::ConditionFailed(format!("termination sum {} is not certified below 1", t.value)));
    }

    // joint samples on a ball around the origin
    let d = m.dim();
    let origin = Site::origin(d);
    let radius = m.range().unwrap_or(1).max(1);
    let window = ball(&origin, radius)?;
    let samples = sample_replicas(m, &window, config.replicas, config.seed, config.max_events)?;
    let mut violations = 0;
    for (_, rec) in &samples {
        violations += supermartingale_violations(rec)?;
    }

    if m.range().is_some() {
        let c = conditional_consistency(samples.iter().map(|s| &s.0.spins), m, &origin, radius, CONSISTENCY_Z)
            .map_err(|e| AnalysisError::Invalid(e.to_string()))?;
        rows.push(
            BoundRow::value("conditional_consistency_max_z", format!("bins={}", c.bins.len()), c.worst_abs_z)
                .against(CONSISTENCY_Z, c.pass),
        );
    }
    if let Some(j) = nearest_neighbor_coupling(m) {
        for r in [1i32, 2] {
            let (a, b) = (Site::new(&[-1]), Site::new(&[r - 1]));
            let mo = Moments::of(
                samples
                    .iter()
                    .map(|s| (s.0.spins.get(&a).unwrap_or(0) as f64) * (s.0.spins.get(&b).unwrap_or(0) as f64)),
            );
            let exact = transfer_matrix_1d(m.beta(), j, r as u32);
            let slack = CONSISTENCY_Z * mo.se();
            rows.push(
                BoundRow::value("pair_correlation", format!("r={r}"), mo.mean)
                    .with_ci((mo.mean - slack, mo.mean + slack))
                    .against(exact, (mo.mean - exact).abs() <= slack),
            );
        }
    }

    if m.is_translation_invariant() {
        let single = SiteSet::singleton(origin.clone());
        let grid = [1.0, 2.0, 4.0];
        let stop = stopping_check(m, &single, config.replicas, config.seed, &grid, config.max_events)?;
        violations += stop.supermartingale_violations;
        rows.push(
            BoundRow::value("mean_n_stop", "", stop.stats.mean_n_stop)
                .with_ci((
                    stop.stats.mean_n_stop - SLACK_SE * stop.stats.se_n_stop,
                    stop.stats.mean_n_stop + SLACK_SE * stop.stats.se_n_stop,
                ))
                .against(1.0 / stop.gamma.lower, stop.n_stop_pass),
        );
        for ((t, p, se), (_, b)) in stop.stats.survival.iter().zip(&stop.survival_bounds) {
            rows.push(
                BoundRow::value("t_stop_survival", format!("t={t}"), *p)
                    .with_ci((p - SLACK_SE * se, p + SLACK_SE * se))
                    .against(*b, *p <= b + SLACK_SE * se),
            );
        }

        let mut previous: Option<(f64, Option<f64>)> = None;
        for &level in &config.levels {
            let est = estimate_discrepancy(m, level, &origin, config.replicas, config.seed, config.max_events)?;
            violations += est.supermartingale_violations;
            rows.push(
                BoundRow::value("discrepancy", format!("L={level}"), est.estimate())
                    .with_ci(est.wilson)
                    .against(est.bound, est.pass),
            );
            let db = dbar_bounds(m, level)?;
            let b1 = db.bound1.unwrap_or(f64::INFINITY);
            // nonincreasing, and strictly decreasing while positive
            let shrinks = |prev: f64, now: f64| now <= prev && (now < prev || now == 0.0);
            let ok1 = previous.is_none_or(|(p, _)| shrinks(p, b1));
            rows.push(BoundRow::value("dbar_bound1", format!("L={level}"), b1).against(b1, ok1));
            if let Some(b2) = db.bound2 {
                let ok2 = previous.and_then(|(_, p)| p).is_none_or(|p| shrinks(p, b2));
                rows.push(BoundRow::value("dbar_bound2", format!("L={level}"), b2).against(b2, ok2));
            }
            previous = Some((b1, db.bound2));
        }

        let (_, rho) = rw_exponent(m)?;
        if rho > 0.0 && !config.distances.is_empty() {
            let mut mc =
                MixingConfig::new(config.distances.clone(), config.replicas, config.walk_replicas, config.seed);
            mc.max_events = config.max_events;
            let mix = mixing_check(m, &mc)?;
            for row in &mix.rows {
                rows.push(
                    BoundRow::value("covariance", format!("R={}", row.distance), row.covariance.abs())
                        .with_ci((
                            row.covariance.abs() - SLACK_SE * row.covariance_se,
                            row.covariance.abs() + SLACK_SE * row.covariance_se,
                        ))
                        .against(row.bound, row.pass),
                );
            }
        }
    }
    rows.push(BoundRow::value("supermartingale_violations", "", violations as f64).against(0.0, violations == 0));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::Term;

    #[test]
    fn normalization_of_reference_models() {
        let nn = InteractionModel::nearest_neighbor(1, 1.0, 0.05).unwrap();
        let ex = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05).unwrap();
        let o = Site::origin(1);
        assert!(lambda_normalization(&nn, &o) < 1e-15);
        assert!(lambda_normalization(&ex, &o) < 1e-12);
    }

    #[test]
    fn decomposition_sweep_is_tight() {
        let ex = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05).unwrap();
        assert!(decomposition_sweep(&ex, 100, 8, 2).unwrap() < IDENTITY_TOLERANCE);
        let three = InteractionModel::explicit(
            2,
            vec![Term { sites: vec![Site::new(&[0, 0]), Site::new(&[1, 0]), Site::new(&[0, 1])], coupling: 0.3 }],
            true,
            0.1,
        )
        .unwrap();
        assert!(decomposition_sweep(&three, 100, 8, 2).unwrap() < IDENTITY_TOLERANCE);
    }

    #[test]
    fn verify_passes_on_nearest_neighbour() {
        let nn = InteractionModel::nearest_neighbor(1, 1.0, 0.05).unwrap();
        let mut c = VerifyConfig::new(2000, 11);
        c.decomposition_tuples = 50;
        let rows = verify_suite(&nn, &c).unwrap();
        let failed: Vec<_> = rows.iter().filter(|r| r.pass == Some(false)).collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert!(rows.iter().any(|r| r.quantity == "pair_correlation"));
    }

    #[test]
    fn verify_refuses_hot_model() {
        let nn = InteractionModel::nearest_neighbor(1, 1.0, 0.3).unwrap();
        assert!(matches!(verify_suite(&nn, &VerifyConfig::new(10, 1)), Err(AnalysisError::ConditionFailed(_))));
    }
}
