//! Summability and uniqueness conditions, `gamma` and the critical inverse temperature.

use serde::Serialize;

use super::{InteractionModel, ModelError, Potential};
use crate::lattice::SiteSet;

/// Interval widths above this make `gamma` inconclusive.
pub const GAMMA_WIDTH_TOLERANCE: f64 = 1e-9;

const SCAN_TOP: f64 = 10.0;
const SCAN_POINTS: usize = 1000;
const BISECT_REL_TOL: f64 = 1e-9;

/// `gamma = 1 - sup_i sum_{k>=1} |B_i(k)| lambda_i(k)` with a certified enclosure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaInterval {
    pub lower: f64,
    pub upper: f64,
}

impl GammaInterval {
    /// Enclosure of the supremum sum itself.
    pub fn sum(&self) -> (f64, f64) {
        (1.0 - self.upper, 1.0 - self.lower)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check {
    pub status: CheckStatus,
    /// Certified lower value of the checked quantity.
    pub value: f64,
    /// Certified upper value; `None` when no finite bound is available.
    pub upper: Option<f64>,
}

impl Check {
    fn below(lower: f64, upper: Option<f64>, limit: f64, diverges: bool) -> Check {
        let status = match upper {
            Some(u) if u < limit => CheckStatus::Pass,
            _ if lower >= limit || diverges => CheckStatus::Fail,
            _ => CheckStatus::Inconclusive,
        };
        Check { status, value: lower, upper }
    }

    fn finite(lower: f64, upper: Option<f64>, diverges: bool) -> Check {
        let status = match upper {
            Some(u) if u.is_finite() => CheckStatus::Pass,
            _ if diverges => CheckStatus::Fail,
            _ => CheckStatus::Inconclusive,
        };
        Check { status, value: lower, upper }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaCritical {
    pub beta: f64,
    /// False when the left-hand side never reached 1 in the scan window;
    /// `beta` is then the window top.
    pub found: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `sup_i sum_{B ∋ i} |J_B| < infinity`.
    pub summability: Check,
    /// `sup_i sum_k |B_i(k)| (shell strength at k) < infinity`.
    pub weighted_summability: Check,
    /// `sup_i sum_{k>=1} |B_i(k)| lambda_i(k) < 1`.
    pub termination: Check,
    /// Dobrushin: `r = beta sup_i sum_{B ∋ i} |J_B| < 1`.
    pub dobrushin: Check,
    pub r: f64,
    pub gamma: Option<GammaInterval>,
    pub beta_critical: Option<BetaCritical>,
    /// Exact `beta` at which the termination sum reaches 1.
    pub termination_threshold: Option<f64>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        [self.summability, self.weighted_summability, self.termination, self.dobrushin]
            .iter()
            .all(|c| c.status == CheckStatus::Pass)
    }
}

fn weighted_sum_diverges(m: &InteractionModel) -> bool {
    match m.potential() {
        Potential::Pairwise(k) => k.weighted_sum_diverges(),
        Potential::Explicit(_) => false,
    }
}

/// Enclosure of `sup_i sum_{k>=1} |B_i(k)| lambda_i(k)` over `sites`; upper is
/// `None` if some site has no certified remainder.
fn termination_sum(m: &InteractionModel, sites: &SiteSet) -> (f64, Option<f64>) {
    let mut lower = 0.0f64;
    let mut upper = Some(0.0f64);
    for s in sites {
        let (lo, hi) = m.range_distribution(s).weighted_lambda_sum();
        lower = lower.max(lo);
        upper = match (upper, hi) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
    }
    (lower, upper)
}

pub fn gamma(m: &InteractionModel, sites: &SiteSet) -> Result<GammaInterval, ModelError> {
    if sites.is_empty() {
        return Err(ModelError::invalid("sites", "need at least one site"));
    }
    let (lo, hi) = termination_sum(m, sites);
    let hi = hi.ok_or_else(|| ModelError::Inconclusive("no certified bound on sum_k |B(k)| lambda(k)".into()))?;
    if hi - lo > GAMMA_WIDTH_TOLERANCE {
        return Err(ModelError::Inconclusive(format!(
            "gamma enclosure [{}, {}] wider than {GAMMA_WIDTH_TOLERANCE:e}",
            1.0 - hi,
            1.0 - lo
        )));
    }
    Ok(GammaInterval { lower: 1.0 - hi, upper: 1.0 - lo })
}

pub fn check_conditions(m: &InteractionModel, sites: &SiteSet) -> ConditionReport {
    let diverges = weighted_sum_diverges(m);
    let mut total = (0.0f64, 0.0f64);
    let mut weighted = (0.0f64, Some(0.0f64));
    for s in sites {
        let t = m.shell_table(s);
        let (lo, hi) = t.tail_interval(0);
        total = (total.0.max(lo), total.1.max(hi));
        let (wl, wh) = t.weighted_sum();
        weighted.0 = weighted.0.max(wl);
        weighted.1 = match (weighted.1, wh) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
    }
    let (sum_lo, sum_hi) = termination_sum(m, sites);
    let r = m.beta() * total.0;
    ConditionReport {
        summability: Check::finite(total.0, Some(total.1), false),
        weighted_summability: Check::finite(weighted.0, weighted.1, diverges),
        termination: Check::below(sum_lo, sum_hi, 1.0, diverges && m.beta() > 0.0),
        dobrushin: Check::below(r, Some(m.beta() * total.1), 1.0, false),
        r,
        gamma: gamma(m, sites).ok(),
        beta_critical: beta_critical(m).ok(),
        termination_threshold: condition2_threshold(m, sites),
    }
}

/// First `x` in `(0, SCAN_TOP]` where `f(x) >= 1`, by a coarse scan then bisection.
fn first_crossing(f: impl Fn(f64) -> f64) -> Option<f64> {
    let step = SCAN_TOP / SCAN_POINTS as f64;
    let mut prev = 0.0;
    for j in 1..=SCAN_POINTS {
        let x = step * j as f64;
        if f(x) >= 1.0 {
            let (mut lo, mut hi) = (prev, x);
            while hi - lo > BISECT_REL_TOL * hi {
                let mid = 0.5 * (lo + hi);
                if f(mid) >= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = x;
    }
    None
}

/// Left-hand side of the critical-temperature equation for a
/// translation-invariant model:
/// `2d e^{-beta S^{>1}} (1 - e^{-beta S} e^{-beta A_1}) + beta sum_{k>=2} |B(k)| A_k`.
pub fn beta_critical_lhs(m: &InteractionModel, beta: f64) -> Result<f64, ModelError> {
    if !m.is_translation_invariant() {
        return Err(ModelError::Unsupported("critical beta needs a translation-invariant model".into()));
    }
    let origin = crate::lattice::Site::origin(m.dim());
    let t = m.shell_table(&origin);
    let far = t
        .weighted_sum_from_two()
        .ok_or_else(|| ModelError::Summability("sum_k |B(k)| A_k has no certified bound".into()))?;
    let d = m.dim() as f64;
    let first = 2.0 * d * (-beta * t.tail_sum(1)).exp() * -(-beta * (t.total() + t.shell_strength(1))).exp_m1();
    Ok(first + beta * far)
}

pub fn beta_critical(m: &InteractionModel) -> Result<BetaCritical, ModelError> {
    beta_critical_lhs(m, 0.0)?;
    Ok(match first_crossing(|b| beta_critical_lhs(m, b).unwrap_or(f64::INFINITY)) {
        Some(beta) => BetaCritical { beta, found: true },
        None => BetaCritical { beta: SCAN_TOP, found: false },
    })
}

/// Smallest `beta` at which the certified termination sum reaches 1, if any in
/// the scan window.
pub fn condition2_threshold(m: &InteractionModel, sites: &SiteSet) -> Option<f64> {
    if sites.is_empty() {
        return None;
    }
    termination_sum(m, sites).1?;
    first_crossing(|b| termination_sum(&m.with_beta(b), sites).1.unwrap_or(f64::INFINITY))
}
