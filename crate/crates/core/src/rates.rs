//! Gibbs conditionals, spin-flip rates and the local update probabilities
//! `p_i^[k]` whose `lambda`-mixture reproduces the rates.
//!
//! All formulas are driven by per-shell fields
//! `H_k(sigma) = sum_{B ∋ i, escape radius k} J_B chi_B(sigma)` and the matching
//! absolute strengths `A_k`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::interaction::{InteractionModel, ShellTerms};
use crate::lattice::{LatticeError, Site, SiteSet};

/// Slack allowed on `p in [0,1]` before it is treated as a model bug.
pub const PROB_TOLERANCE: f64 = 1e-12;

pub type Spin = i8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("site {0} is unassigned")]
    Unassigned(Site),
    #[error("range {k} at site {site} has zero probability and cannot be sampled")]
    UnsampleableRange { site: Site, k: usize },
    #[error("update probability {value} outside [0,1] at site {site}, range {k}")]
    ProbabilityOutOfRange { site: Site, k: usize, value: f64 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// A partial configuration; absent sites are unassigned.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SpinWindow(BTreeMap<Site, Spin>);

impl SpinWindow {
    pub fn new() -> Self {
        SpinWindow(BTreeMap::new())
    }

    /// Every site of `sites` set to `spin`.
    pub fn constant(sites: &SiteSet, spin: Spin) -> Self {
        sites.iter().map(|s| (s.clone(), spin)).collect()
    }

    pub fn get(&self, site: &Site) -> Option<Spin> {
        self.0.get(site).copied()
    }

    pub fn spin(&self, site: &Site) -> Result<Spin, RatesError> {
        self.get(site).ok_or_else(|| RatesError::Unassigned(site.clone()))
    }

    pub fn set(&mut self, site: Site, spin: Spin) {
        assert!(spin == 1 || spin == -1, "spins are +1 or -1, got {spin}");
        self.0.insert(site, spin);
    }

    pub fn unset(&mut self, site: &Site) {
        self.0.remove(site);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, Spin)> + '_ {
        self.0.iter().map(|(s, v)| (s, *v))
    }

    pub fn sites(&self) -> SiteSet {
        self.0.keys().cloned().collect()
    }

    pub fn restrict(&self, sites: &SiteSet) -> SpinWindow {
        self.0.iter().filter(|(s, _)| sites.contains(s)).map(|(s, v)| (s.clone(), *v)).collect()
    }

    /// Copy with the spin at `site` reversed.
    pub fn flipped(&self, site: &Site) -> Result<SpinWindow, RatesError> {
        let v = self.spin(site)?;
        let mut out = self.clone();
        out.0.insert(site.clone(), -v);
        Ok(out)
    }

    /// Spins in the iteration order of `sites`.
    pub fn values_on(&self, sites: &SiteSet) -> Result<Vec<Spin>, RatesError> {
        sites.iter().map(|s| self.spin(s)).collect()
    }
}

impl FromIterator<(Site, Spin)> for SpinWindow {
    fn from_iter<T: IntoIterator<Item = (Site, Spin)>>(iter: T) -> Self {
        let mut w = SpinWindow::new();
        for (s, v) in iter {
            w.set(s, v);
        }
        w
    }
}

/// A closed real interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// `H_k(sigma)` for the sets containing `i` with escape radius exactly `k >= 1`.
pub fn shell_field(m: &InteractionModel, i: &Site, k: usize, sigma: &SpinWindow) -> Result<f64, RatesError> {
    match m.shell_terms(i, k) {
        ShellTerms::Pairwise { coupling, offsets } => {
            if offsets.is_empty() {
                return Ok(0.0);
            }
            let own = sigma.spin(i)? as i64;
            let mut acc = 0i64;
            for r in offsets.iter() {
                acc += sigma.spin(&i.offset_by(r)?)? as i64;
            }
            Ok(coupling * (own * acc) as f64)
        }
        ShellTerms::Sets(terms) => {
            let mut h = 0.0;
            for t in terms {
                let mut chi = 1i8;
                for o in &t.offsets {
                    chi *= sigma.spin(&i.offset_by(o)?)?;
                }
                h += t.coupling * chi as f64;
            }
            Ok(h)
        }
    }
}

/// `sum_{k=1}^{radius} H_k(sigma)`.
pub fn ball_field(m: &InteractionModel, i: &Site, radius: usize, sigma: &SpinWindow) -> Result<f64, RatesError> {
    let mut h = 0.0;
    for k in 1..=radius {
        h += shell_field(m, i, k, sigma)?;
    }
    Ok(h)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probability that the spin at `i` equals `zeta(i)` given `zeta` elsewhere,
/// with sets beyond `radius` enclosed by their certified tail strength.
/// Degenerate when `radius` covers the model range.
pub fn gibbs_conditional(
    m: &InteractionModel,
    i: &Site,
    zeta: &SpinWindow,
    radius: usize,
) -> Result<Interval, RatesError> {
    let b = m.beta();
    let h = ball_field(m, i, radius, zeta)?;
    let t = m.shell_table(i).tail_interval(radius).1;
    if t == 0.0 {
        return Ok(Interval::point(logistic(2.0 * b * h)));
    }
    Ok(Interval { lo: logistic(2.0 * b * (h - t)), hi: logistic(2.0 * b * (h + t)) })
}

/// `c_i^[ell](sigma) = e^{-beta S^{>ell}} exp(-beta sum_{k<=ell} H_k(sigma))`.
pub fn flip_rate_truncated(m: &InteractionModel, i: &Site, sigma: &SpinWindow, ell: usize) -> Result<f64, RatesError> {
    let b = m.beta();
    let h = ball_field(m, i, ell, sigma)?;
    Ok((-b * (m.tail_sum(i, ell) + h)).exp())
}

/// Enclosure of the full rate `c_i(sigma) = exp(-beta sum_{B ∋ i} J_B chi_B(sigma))`
/// using sets up to radius `k_max` and the certified tail beyond.
pub fn flip_rate(m: &InteractionModel, i: &Site, sigma: &SpinWindow, k_max: usize) -> Result<Interval, RatesError> {
    let b = m.beta();
    let h = ball_field(m, i, k_max, sigma)?;
    let t = m.shell_table(i).tail_interval(k_max).1;
    if t == 0.0 {
        return Ok(Interval::point((-b * h).exp()));
    }
    Ok(Interval { lo: (-b * (h + t)).exp(), hi: (-b * (h - t)).exp() })
}

fn checked_probability(i: &Site, k: usize, p: f64) -> Result<f64, RatesError> {
    if !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&p) {
        return Err(RatesError::ProbabilityOutOfRange { site: i.clone(), k, value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `p_i^[k](-sigma(i) | sigma)`: probability that an update of range `k`
/// reverses the current spin at `i`.
pub fn update_prob(m: &InteractionModel, i: &Site, k: usize, sigma: &SpinWindow) -> Result<f64, RatesError> {
    if k == 0 {
        return Ok(0.5);
    }
    let dist = m.range_distribution(i);
    if dist.lambda(k) <= 0.0 {
        return Err(RatesError::UnsampleableRange { site: i.clone(), k });
    }
    let b = m.beta();
    let table = dist.table();
    let big_m = dist.big_m();
    let a_k = table.shell_strength(k);
    let p = if k == 1 {
        let h1 = shell_field(m, i, 1, sigma)?;
        let num = (-b * h1).exp() - (-b * a_k).exp();
        let den = -(-b * (2.0 * a_k + table.tail_sum(1))).exp_m1();
        num / den / big_m
    } else {
        let inner = ball_field(m, i, k - 1, sigma)?;
        let h_k = shell_field(m, i, k, sigma)?;
        (-b * inner).exp() * (-b * a_k).exp() * (b * (a_k - h_k)).exp_m1() / -(-b * a_k).exp_m1() / big_m
    };
    checked_probability(i, k, p)
}

/// `|c_i^[ell](sigma) - M_i [lambda_i(0)/2 + sum_{k=1}^{ell} lambda_i(k) p_i^[k](-sigma(i)|sigma)]|`.
pub fn decomposition_check(m: &InteractionModel, i: &Site, sigma: &SpinWindow, ell: usize) -> Result<f64, RatesError> {
    let lhs = flip_rate_truncated(m, i, sigma, ell)?;
    let dist = m.range_distribution(i);
    let mut mix = 0.5 * dist.lambda(0);
    for k in 1..=ell {
        let l = dist.lambda(k);
        if l > 0.0 {
            mix += l * update_prob(m, i, k, sigma)?;
        }
    }
    Ok((lhs - dist.big_m() * mix).abs())
}
