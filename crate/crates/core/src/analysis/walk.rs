//! The comparison random walk `S_n = xi_1 + ... + xi_n` with
//! `P(xi = -1) = lambda(0)` and `P(xi = |B_0(k)| - 1) = lambda(k)`, its
//! Lundberg exponent, the tail of its maximum `M`, and the heavy-tail
//! asymptotic expression for `P(M >= |B_0(n)|)`.

use rayon::prelude::*;
use serde::Serialize;

use super::{origin_distribution, origin_gamma, AnalysisError};
use crate::interaction::{gamma, InteractionModel, KernelShape, Potential, RangeDistribution};
use crate::lattice::{ball_volume, Site, SiteSet};
use crate::stats::Proportion;
use crate::streams::{Lane, LaneStream, StreamKey, UniformSource};

const BISECT_STEPS: usize = 200;

/// Tail of the increment law past the table horizon, as needed for `phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum TailMgf {
    /// Nothing beyond the horizon.
    Exact,
    /// `sum_{k>H} lambda(k) e^{x(2k)} <= coef e^{(2x - decay)(H+1)} / (1 - e^{2x - decay})`
    /// for `x < decay / 2` (one-dimensional exponential kernel).
    Geometric { coef: f64, decay: f64 },
    /// Finite only at `x = 0`.
    Heavy,
}

#[derive(Clone, Debug)]
pub struct RandomWalk {
    dist: RangeDistribution,
    dim: usize,
    beta: f64,
    /// `(increment, probability)` for ranges up to the horizon.
    steps: Vec<(f64, f64)>,
    tail: TailMgf,
    gamma: f64,
    second_moment_tail: Option<f64>,
}

impl RandomWalk {
    pub fn from_model(m: &InteractionModel) -> Result<Self, AnalysisError> {
        let dist = origin_distribution(m)?;
        let g = gamma(m, &SiteSet::singleton(Site::origin(m.dim())))?;
        let table = dist.table();
        let h = table.horizon();
        let mut steps = vec![(-1.0, dist.lambda(0))];
        for k in 1..=h {
            let l = dist.lambda(k);
            if l > 0.0 {
                steps.push((ball_volume(m.dim(), k) - 1.0, l));
            }
        }
        let beta = m.beta();
        let (tail, second_moment_tail) = if table.is_exact() || beta == 0.0 {
            (TailMgf::Exact, Some(0.0))
        } else {
            match m.potential() {
                Potential::Pairwise(k) => {
                    let second = k.tail_bound(h, 2).map(|b| beta * b);
                    let tail = match k.shape {
                        KernelShape::Exponential { decay } if m.dim() == 1 => {
                            TailMgf::Geometric { coef: 2.0 * beta * k.amplitude.abs(), decay }
                        }
                        _ => TailMgf::Heavy,
                    };
                    (tail, second)
                }
                Potential::Explicit(_) => (TailMgf::Exact, Some(0.0)),
            }
        };
        Ok(RandomWalk { dist, dim: m.dim(), beta, steps, tail, gamma: g.lower, second_moment_tail })
    }

    /// Certified lower bound on `gamma = -E xi`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    /// Largest `x` with `phi(x) < infinity` possible (exclusive).
    pub fn domain_sup(&self) -> f64 {
        match self.tail {
            TailMgf::Exact => f64::INFINITY,
            TailMgf::Geometric { decay, .. } => decay / 2.0,
            TailMgf::Heavy => 0.0,
        }
    }

    /// Enclosure of `phi(x) = E e^{x xi}` for `x >= 0`.
    pub fn phi(&self, x: f64) -> (f64, f64) {
        let lower: f64 = self.steps.iter().map(|(inc, p)| p * (x * inc).exp()).sum();
        let extra = match self.tail {
            TailMgf::Exact => 0.0,
            _ if x == 0.0 => 0.0,
            TailMgf::Geometric { coef, decay } if 2.0 * x < decay => {
                let h = self.dist.table().horizon() as f64;
                let r = 2.0 * x - decay;
                coef * (r * (h + 1.0)).exp() / -r.exp_m1()
            }
            _ => f64::INFINITY,
        };
        (lower, lower + extra)
    }

    /// Lundberg exponent `sup{x > 0 : phi(x) <= 1}` (conservative: the upper
    /// enclosure of `phi` is used). Infinite when `xi = -1` surely.
    pub fn rho(&self) -> f64 {
        if self.steps.iter().all(|(inc, p)| *inc < 0.0 || *p == 0.0) && self.beta == 0.0 {
            return f64::INFINITY;
        }
        let sup = self.domain_sup();
        if sup == 0.0 {
            return 0.0;
        }
        let ok = |x: f64| x < sup && self.phi(x).1 <= 1.0;
        let mut hi = 1.0f64.min(sup);
        while ok(hi) {
            hi *= 2.0;
            if hi >= sup {
                hi = sup;
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..BISECT_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Upper bound on `E xi^2`, if certified.
    pub fn second_moment(&self) -> Option<f64> {
        let explicit: f64 = self.steps.iter().map(|(inc, p)| p * inc * inc).sum();
        self.second_moment_tail.map(|t| explicit + t)
    }

    /// One increment by inverse CDF of the range law (exact for any support).
    pub fn increment(&self, u: f64) -> i64 {
        let k = self.dist.sample(u);
        if k == 0 {
            -1
        } else {
            ball_volume(self.dim, k) as i64 - 1
        }
    }

    /// Running maximum of one walk, stopped once it sits `ceiling` below its maximum.
    pub fn simulate_max<U: UniformSource>(&self, ceiling: u64, rng: &mut U) -> i64 {
        let (mut s, mut max) = (0i64, 0i64);
        loop {
            s += self.increment(rng.uniform());
            max = max.max(s);
            if s <= max - ceiling as i64 {
                return max;
            }
        }
    }
}

pub fn rw_exponent(m: &InteractionModel) -> Result<(RandomWalk, f64), AnalysisError> {
    let rw = RandomWalk::from_model(m)?;
    if rw.gamma <= 0.0 {
        return Err(AnalysisError::ConditionFailed(format!("gamma = {} is not positive", rw.gamma)));
    }
    let rho = rw.rho();
    Ok((rw, rho))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxTailEstimate {
    pub rho: f64,
    pub ceiling: u64,
    pub eps: f64,
    /// Bound on the downward bias of every estimate from stopping early.
    pub bias_bound: Option<f64>,
    pub replicas: u64,
    pub thresholds: Vec<i64>,
    pub hits: Vec<u64>,
}

impl MaxTailEstimate {
    pub fn proportion(&self, idx: usize) -> Proportion {
        Proportion::new(self.hits[idx], self.replicas)
    }

    pub fn estimate_at(&self, m: i64) -> Option<Proportion> {
        self.thresholds.iter().position(|t| *t == m).map(|i| self.proportion(i))
    }

    /// Least-squares slope of `ln P(M >= m)` over thresholds in `[lo, hi]` with hits.
    pub fn log_slope(&self, lo: i64, hi: i64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .thresholds
            .iter()
            .zip(&self.hits)
            .filter(|(t, h)| **t >= lo && **t <= hi && **h > 0)
            .map(|(t, h)| (*t as f64, (*h as f64 / self.replicas as f64).ln()))
            .unzip();
        (x.len() >= 2).then(|| crate::stats::ols_slope(&x, &y))
    }
}

/// Estimates `P(M >= m)` at each threshold from `replicas` walks. Each walk
/// stops once it is `ceiling` below its running maximum; the ceiling is
/// `ceil(ln(1/eps) / rho)` unless `ceiling` overrides it (required when `rho = 0`).
pub fn estimate_max_tail(
    rw: &RandomWalk,
    thresholds: &[i64],
    replicas: u64,
    eps: f64,
    seed: u64,
    ceiling: Option<u64>,
) -> Result<MaxTailEstimate, AnalysisError> {
    if rw.gamma <= 0.0 {
        return Err(AnalysisError::ConditionFailed(format!("gamma = {} is not positive", rw.gamma)));
    }
    if replicas == 0 {
        return Err(AnalysisError::Invalid("replicas must be positive".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AnalysisError::Invalid("eps must lie in (0,1)".into()));
    }
    let rho = rw.rho();
    let (ceiling, bias) = match (ceiling, rho > 0.0) {
        (Some(0), _) => return Err(AnalysisError::Invalid("ceiling must be positive".into())),
        (Some(c), true) => (c, Some((-rho * c as f64).exp())),
        (Some(c), false) => (c, rw.second_moment().map(|m2| m2 / (2.0 * rw.gamma) / c as f64)),
        (None, true) => (((1.0 / eps).ln() / rho).ceil().max(1.0) as u64, Some(eps)),
        (None, false) => {
            return Err(AnalysisError::Refused("Lundberg exponent is 0: supply an explicit stopping ceiling".into()))
        }
    };
    let maxima: Vec<i64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = LaneStream::new(StreamKey::new(seed, r), Lane::Walk);
            rw.simulate_max(ceiling, &mut rng)
        })
        .collect();
    let hits = thresholds.iter().map(|t| maxima.iter().filter(|m| **m >= *t).count() as u64).collect();
    Ok(MaxTailEstimate { rho, ceiling, eps, bias_bound: bias, replicas, thresholds: thresholds.to_vec(), hits })
}

fn positive_gamma(m: &InteractionModel) -> Result<f64, AnalysisError> {
    Ok(origin_gamma(m)?.midpoint())
}

/// `(1/gamma) [sum_{k>n} lambda(k) |B(k)| - |B(n)| sum_{k>n+1} lambda(k)]`,
/// summed range by range.
pub fn korshunov_item1(m: &InteractionModel, n: usize) -> Result<f64, AnalysisError> {
    let g = positive_gamma(m)?;
    let dist = origin_distribution(m)?;
    let d = m.dim();
    let h = dist.table().horizon();
    let mut weighted = 0.0;
    let mut mass = 0.0;
    for k in (n + 1..=h).rev() {
        let l = dist.lambda(k);
        weighted += l * ball_volume(d, k);
        if k > n + 1 {
            mass += l;
        }
    }
    Ok((weighted - ball_volume(d, n) * mass) / g)
}

/// The same expression after summation by parts, written with survival
/// probabilities `P(range > k) = 1 - alpha(k)`:
/// `(1/gamma) [F(n) |B(n+1)| + sum_{k>n} F(k) (|B(k+1)| - |B(k)|) - |B(n)| F(n+1)]`.
pub fn korshunov_item1_by_parts(m: &InteractionModel, n: usize) -> Result<f64, AnalysisError> {
    let g = positive_gamma(m)?;
    let dist = origin_distribution(m)?;
    let t = dist.table();
    let d = m.dim();
    let b = m.beta();
    let survival = |k: usize| {
        if k == 0 {
            -(-2.0 * b * t.total()).exp_m1()
        } else {
            -(-b * t.tail_sum(k)).exp_m1()
        }
    };
    let h = t.horizon();
    let mut acc = 0.0;
    for k in (n + 1..h).rev() {
        acc += survival(k) * (ball_volume(d, k + 1) - ball_volume(d, k));
    }
    let value = survival(n) * ball_volume(d, n + 1) + acc - ball_volume(d, n) * survival(n + 1);
    Ok(value / g)
}

/// `(1/gamma) E[(xi - |B(n)|)^+]`, the integrated increment tail.
pub fn integrated_tail(m: &InteractionModel, n: usize) -> Result<f64, AnalysisError> {
    let g = positive_gamma(m)?;
    let dist = origin_distribution(m)?;
    let d = m.dim();
    let bn = ball_volume(d, n);
    let v: f64 = (n + 1..=dist.table().horizon()).rev().map(|k| dist.lambda(k) * (ball_volume(d, k) - 1.0 - bn)).sum();
    Ok(v / g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nn(beta: f64) -> InteractionModel {
        InteractionModel::nearest_neighbor(1, 1.0, beta).unwrap()
    }

    #[test]
    fn rho_nearest_neighbour_matches_grid_scan() {
        let (rw, rho) = rw_exponent(&nn(0.05)).unwrap();
        let l0 = (-0.2f64).exp();
        let phi = |x: f64| l0 * (-x).exp() + (1.0 - l0) * (2.0 * x).exp();
        // independent scan at step 1e-6
        let mut grid = 0.0;
        let mut x = 1e-6;
        while phi(x) <= 1.0 {
            grid = x;
            x += 1e-6;
        }
        assert!((rho - grid).abs() < 2e-6, "{rho} vs {grid}");
        assert!((rho - 0.5208).abs() < 1e-3);
        assert!((rw.phi(0.0).0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_is_convex_with_drift_minus_gamma() {
        let m = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05).unwrap();
        let (rw, rho) = rw_exponent(&m).unwrap();
        assert!(rho > 0.0 && rho <= 0.5);
        let h = 1e-6;
        let deriv = (rw.phi(h).0 - rw.phi(0.0).0) / h;
        assert!((deriv + rw.gamma()).abs() < 1e-5);
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.012).collect();
        for w in xs.windows(3) {
            let (a, b, c) = (rw.phi(w[0]).0, rw.phi(w[1]).0, rw.phi(w[2]).0);
            assert!(a + c - 2.0 * b >= -1e-12);
        }
    }

    #[test]
    fn rho_special_cases() {
        assert_eq!(rw_exponent(&nn(0.0)).unwrap().1, f64::INFINITY);
        let p = InteractionModel::pairwise_power_law(1, 1.0, 5.0, 0.01).unwrap();
        assert_eq!(rw_exponent(&p).unwrap().1, 0.0);
        let e2 = InteractionModel::pairwise_exponential(2, 0.1, 1.0, 0.05).unwrap();
        assert_eq!(rw_exponent(&e2).unwrap().1, 0.0);
        assert!(matches!(rw_exponent(&nn(0.3)), Err(AnalysisError::ConditionFailed(_))));
    }

    #[test]
    fn zero_beta_walk_never_rises() {
        let (rw, _) = rw_exponent(&nn(0.0)).unwrap();
        let est = estimate_max_tail(&rw, &[0, 1], 500, 1e-6, 3, None).unwrap();
        assert_eq!(est.hits, vec![500, 0]);
    }

    #[test]
    fn zero_rho_needs_a_ceiling() {
        let p = InteractionModel::pairwise_power_law(1, 1.0, 5.0, 0.01).unwrap();
        let (rw, _) = rw_exponent(&p).unwrap();
        assert!(matches!(estimate_max_tail(&rw, &[1], 10, 1e-6, 1, None), Err(AnalysisError::Refused(_))));
        let est = estimate_max_tail(&rw, &[0, 1], 200, 1e-6, 1, Some(50)).unwrap();
        assert_eq!(est.hits[0], 200);
        assert!(est.bias_bound.unwrap() > 0.0);
    }

    #[test]
    fn korshunov_routes_agree() {
        let p = InteractionModel::pairwise_power_law(1, 1.0, 5.0, 0.01).unwrap();
        let a = korshunov_item1(&p, 3).unwrap();
        let b = korshunov_item1_by_parts(&p, 3).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        assert!(a > 0.0);
        assert_eq!(korshunov_item1(&nn(0.05), 1).unwrap(), 0.0);
        assert_eq!(korshunov_item1(&nn(0.0), 0).unwrap(), 0.0);
        assert!(integrated_tail(&p, 3).unwrap() > 0.0);
    }
}
