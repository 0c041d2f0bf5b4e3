//! Independent ground truth for validation: brute-force finite-volume Gibbs
//! tables, the 1-D transfer matrix, and a binned check of sampled
//! single-site conditionals.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::interaction::{InteractionModel, ModelError};
use crate::lattice::{self, LatticeError, Site, SiteSet};
use crate::rates::{gibbs_conditional, RatesError, Spin, SpinWindow};
use crate::stats::Proportion;

pub const MAX_VOLUME: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("volume of {0} sites exceeds the enumeration limit of {MAX_VOLUME}")]
    VolumeTooLarge(usize),
    #[error("boundary does not assign site {0}")]
    MissingBoundary(Site),
    #[error("model range {range:?} exceeds the binning radius {radius}")]
    RangeTooLong { range: Option<usize>, radius: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Normalized Gibbs weights over `{-1,+1}^volume`. Bit `b` of a configuration
/// index is the spin of `sites[b]` (set = +1).
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsTable {
    pub sites: Vec<Site>,
    pub probs: Vec<f64>,
    /// Bound on the total strength of sets ignored beyond the radius, per site.
    pub remainder: f64,
}

impl GibbsTable {
    pub fn spin_of(&self, config: usize, bit: usize) -> Spin {
        if config >> bit & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn config_index(&self, spins: &SpinWindow) -> Result<usize, OracleError> {
        let mut idx = 0;
        for (b, s) in self.sites.iter().enumerate() {
            match spins.get(s) {
                Some(1) => idx |= 1 << b,
                Some(_) => {}
                None => return Err(OracleError::MissingBoundary(s.clone())),
            }
        }
        Ok(idx)
    }

    /// `P(sigma(site) = config(site) | rest of config)` within the volume.
    pub fn conditional(&self, config: usize, bit: usize) -> f64 {
        let other = config ^ (1 << bit);
        self.probs[config] / (self.probs[config] + self.probs[other])
    }

    /// Marginal table on the sites of `keep` (which must be a subset).
    pub fn marginal(&self, keep: &SiteSet) -> GibbsTable {
        let bits: Vec<usize> =
            self.sites.iter().enumerate().filter(|(_, s)| keep.contains(s)).map(|(b, _)| b).collect();
        let mut probs = vec![0.0; 1 << bits.len()];
        for (c, p) in self.probs.iter().enumerate() {
            let mut sub = 0;
            for (nb, b) in bits.iter().enumerate() {
                sub |= (c >> b & 1) << nb;
            }
            probs[sub] += p;
        }
        GibbsTable { sites: bits.iter().map(|b| self.sites[*b].clone()).collect(), probs, remainder: self.remainder }
    }

    /// `E[prod_{s in sites} sigma(s)]`.
    pub fn correlation(&self, of: &[Site]) -> f64 {
        let bits: Vec<usize> =
            of.iter().map(|s| self.sites.iter().position(|x| x == s).expect("site in table")).collect();
        self.probs
            .iter()
            .enumerate()
            .map(|(c, p)| p * bits.iter().map(|b| self.spin_of(c, *b) as f64).product::<f64>())
            .sum()
    }
}

/// Enumerates `exp(beta sum_B J_B chi_B)` over every configuration of
/// `volume`, using the sets of escape radius `<= radius` that meet it and
/// taking exterior spins from `boundary`.
pub fn exact_finite_gibbs(
    m: &InteractionModel,
    volume: &SiteSet,
    boundary: &SpinWindow,
    radius: usize,
) -> Result<GibbsTable, OracleError> {
    if volume.len() > MAX_VOLUME {
        return Err(OracleError::VolumeTooLarge(volume.len()));
    }
    let sites: Vec<Site> = volume.iter().cloned().collect();
    let index: BTreeMap<&Site, usize> = sites.iter().enumerate().map(|(b, s)| (s, b)).collect();
    // each term: coupling times fixed exterior product, and the interior bit mask
    let mut terms: Vec<(f64, usize)> = Vec::new();
    for (set, j) in m.terms_meeting(volume, radius)? {
        let mut mask = 0usize;
        let mut outside = 1i8;
        for s in &set {
            match index.get(s) {
                Some(b) => mask |= 1 << b,
                None => outside *= boundary.get(s).ok_or_else(|| OracleError::MissingBoundary(s.clone()))?,
            }
        }
        terms.push((j * outside as f64, mask));
    }
    let b = m.beta();
    let n = 1usize << sites.len();
    let energies: Vec<f64> = (0..n)
        .map(|c| {
            terms
                .iter()
                .map(|(j, mask)| {
                    // chi over interior sites: -1 per down spin
                    let downs = (!c & mask).count_ones();
                    if downs % 2 == 0 {
                        *j
                    } else {
                        -*j
                    }
                })
                .sum::<f64>()
        })
        .collect();
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| (b * (e - top)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let remainder = volume.iter().map(|s| m.shell_table(s).tail_interval(radius).1).fold(0.0, f64::max);
    Ok(GibbsTable { sites, probs: weights.iter().map(|w| w / z).collect(), remainder })
}

/// Infinite-volume `E[sigma(0) sigma(r)]` for the 1-D nearest-neighbour chain
/// from the eigendecomposition of its 2x2 transfer matrix.
pub fn transfer_matrix_1d(beta: f64, coupling: f64, r: u32) -> f64 {
    let a = (beta * coupling).exp();
    let t = Matrix2::new(a, 1.0 / a, 1.0 / a, a);
    let eig = SymmetricEigen::new(t);
    let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let spin = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let v_top = eig.eigenvectors.column(top);
    (0..2)
        .map(|k| {
            let vk = eig.eigenvectors.column(k);
            let overlap = (v_top.transpose() * spin * vk)[(0, 0)];
            (eig.eigenvalues[k] / eig.eigenvalues[top]).powi(r as i32) * overlap * overlap
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyBin {
    /// Annulus spins in lexicographic site order.
    pub annulus: Vec<Spin>,
    pub count: u64,
    pub plus: u64,
    pub empirical: f64,
    pub predicted: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub z: f64,
    /// Too few samples to judge.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub samples: usize,
    pub bins: Vec<ConsistencyBin>,
    pub worst_abs_z: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub const MIN_BIN_COUNT: u64 = 30;

/// Bins samples by the spins on `ball(center, radius) \ {center}` and compares
/// the empirical frequency of `+1` at the center with the Gibbs conditional.
pub fn conditional_consistency<'a>(
    samples: impl IntoIterator<Item = &'a SpinWindow>,
    m: &InteractionModel,
    center: &Site,
    radius: usize,
    threshold: f64,
) -> Result<ConsistencyReport, OracleError> {
    match m.range() {
        Some(r) if r <= radius => {}
        range => return Err(OracleError::RangeTooLong { range, radius }),
    }
    let mut annulus = lattice::ball(center, radius)?;
    annulus.remove(center);
    let mut counts: BTreeMap<Vec<Spin>, (u64, u64)> = BTreeMap::new();
    let mut total = 0;
    for s in samples {
        let key = s.values_on(&annulus)?;
        let c = s.spin(center)?;
        let e = counts.entry(key).or_default();
        e.0 += 1;
        e.1 += (c == 1) as u64;
        total += 1;
    }
    let mut bins = Vec::new();
    let mut worst = 0.0f64;
    for (key, (count, plus)) in counts {
        let mut zeta: SpinWindow = annulus.iter().cloned().zip(key.iter().copied()).collect();
        zeta.set(center.clone(), 1);
        let predicted = gibbs_conditional(m, center, &zeta, radius)?.mid();
        let p = Proportion::new(plus, count);
        let (lo, hi) = p.wilson(threshold);
        let z = p.z_against(predicted);
        let flagged = count < MIN_BIN_COUNT;
        if !flagged {
            worst = worst.max(z.abs());
        }
        bins.push(ConsistencyBin {
            annulus: key,
            count,
            plus,
            empirical: p.estimate(),
            predicted,
            wilson_low: lo,
            wilson_high: hi,
            z,
            flagged,
        });
    }
    Ok(ConsistencyReport { samples: total, bins, worst_abs_z: worst, threshold, pass: worst <= threshold })
}
