//! The interaction `{J_B}` at inverse temperature `beta`, and everything that
//! depends on it only through absolute strengths: total and tail sums, the
//! constant `M_i`, the range law `lambda_i(k)`, `gamma` and the critical
//! temperature.
//!
//! Two potential families are supported:
//!
//! * radial pairwise kernels `J(0, r) = f(||r||_1)` (nearest-neighbour,
//!   exponential, power law), whose tails are summed to a horizon and certified
//!   beyond it;
//! * explicit finite families of many-body terms, optionally replicated by
//!   translation, whose tails are exact.

mod conditions;
mod explicit;
mod kernel;
mod model_file;
mod range;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

pub use conditions::{
    beta_critical, beta_critical_lhs, check_conditions, condition2_threshold, gamma, BetaCritical, Check, CheckStatus,
    ConditionReport, GammaInterval, GAMMA_WIDTH_TOLERANCE,
};
pub use explicit::{ExplicitFamily, Incidence, LocalTerm, Term};
pub use kernel::{KernelShape, PairwiseKernel};
pub use model_file::{ModelSpec, PotentialSpec, TermSpec, TruncationSpec};
pub use range::{RangeDistribution, ShellTable};

use crate::lattice::{self, LatticeError, Site, SiteSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("model file: {0}")]
    Parse(String),
    #[error("summability failure: {0}")]
    Summability(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

impl ModelError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ModelError::InvalidValue { key: key.to_string(), reason: reason.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Pairwise(PairwiseKernel),
    Explicit(ExplicitFamily),
}

/// Controls how far infinite-range tails are summed before the remainder is bounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailSettings {
    pub tolerance: f64,
    pub max_horizon: usize,
}

impl Default for TailSettings {
    fn default() -> Self {
        TailSettings { tolerance: 1e-18, max_horizon: 1 << 20 }
    }
}

#[derive(Clone, Debug)]
enum Tables {
    Shared(Arc<ShellTable>),
    PerSite { tables: BTreeMap<Site, Arc<ShellTable>>, empty: Arc<ShellTable> },
}

/// Sets `B ∋ i` with escape radius exactly `k`, relative to `i`.
pub enum ShellTerms<'a> {
    /// Bonds `{i, i + r}` for every `r` in `offsets`, all with the same coupling.
    Pairwise {
        coupling: f64,
        offsets: Cow<'a, [Site]>,
    },
    Sets(&'a [LocalTerm]),
}

const CACHED_SHELLS: usize = 64;

#[derive(Clone, Debug)]
pub struct InteractionModel {
    dim: usize,
    beta: f64,
    potential: Potential,
    settings: TailSettings,
    tables: Tables,
    shells: Arc<Vec<OnceLock<Vec<Site>>>>,
}

impl InteractionModel {
    pub fn new(dim: usize, beta: f64, potential: Potential, settings: TailSettings) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::invalid("dimension", "must be at least 1"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(ModelError::invalid("beta", "must be a finite non-negative number"));
        }
        let tables = match &potential {
            Potential::Pairwise(k) => {
                if k.dim != dim {
                    return Err(ModelError::invalid("dimension", "kernel dimension mismatch"));
                }
                Tables::Shared(Arc::new(kernel_table(k, &settings)?))
            }
            Potential::Explicit(f) => {
                if f.dim != dim {
                    return Err(ModelError::invalid("dimension", "family dimension mismatch"));
                }
                if f.translate {
                    Tables::Shared(Arc::new(incidence_table(dim, f.incidence(&Site::origin(dim)))))
                } else {
                    let tables =
                        f.support().map(|s| (s.clone(), Arc::new(incidence_table(dim, f.incidence(s))))).collect();
                    Tables::PerSite { tables, empty: Arc::new(ShellTable::empty(dim)) }
                }
            }
        };
        Ok(InteractionModel {
            dim,
            beta,
            potential,
            settings,
            tables,
            shells: Arc::new((0..CACHED_SHELLS).map(|_| OnceLock::new()).collect()),
        })
    }

    pub fn nearest_neighbor(dim: usize, amplitude: f64, beta: f64) -> Result<Self, ModelError> {
        let k = PairwiseKernel { dim, amplitude, shape: KernelShape::NearestNeighbor };
        InteractionModel::new(dim, beta, Potential::Pairwise(k), TailSettings::default())
    }

    pub fn pairwise_exponential(dim: usize, amplitude: f64, decay: f64, beta: f64) -> Result<Self, ModelError> {
        let k = PairwiseKernel { dim, amplitude, shape: KernelShape::Exponential { decay } };
        InteractionModel::new(dim, beta, Potential::Pairwise(k), TailSettings::default())
    }

    pub fn pairwise_power_law(dim: usize, amplitude: f64, exponent: f64, beta: f64) -> Result<Self, ModelError> {
        let k = PairwiseKernel { dim, amplitude, shape: KernelShape::PowerLaw { exponent } };
        InteractionModel::new(dim, beta, Potential::Pairwise(k), TailSettings::default())
    }

    pub fn explicit(dim: usize, terms: Vec<Term>, translate: bool, beta: f64) -> Result<Self, ModelError> {
        let f = ExplicitFamily::new(dim, terms, translate)?;
        InteractionModel::new(dim, beta, Potential::Explicit(f), TailSettings::default())
    }

    /// Same potential at another inverse temperature (tables are shared).
    pub fn with_beta(&self, beta: f64) -> Self {
        assert!(beta.is_finite() && beta >= 0.0, "beta must be finite and non-negative");
        InteractionModel { beta, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn settings(&self) -> TailSettings {
        self.settings
    }

    pub fn is_translation_invariant(&self) -> bool {
        matches!(self.tables, Tables::Shared(_))
    }

    /// Largest escape radius of any set, `None` for infinite range.
    pub fn range(&self) -> Option<usize> {
        match &self.potential {
            Potential::Pairwise(k) => k.range(),
            Potential::Explicit(f) => Some(f.range()),
        }
    }

    /// Sites over which suprema are exact: the origin for translation-invariant
    /// models, otherwise every site touched by a term (all other sites carry
    /// no interaction at all).
    pub fn reference_sites(&self) -> SiteSet {
        match &self.tables {
            Tables::Shared(_) => SiteSet::singleton(Site::origin(self.dim)),
            Tables::PerSite { tables, .. } if tables.is_empty() => SiteSet::singleton(Site::origin(self.dim)),
            Tables::PerSite { tables, .. } => tables.keys().cloned().collect(),
        }
    }

    pub fn shell_table(&self, site: &Site) -> &ShellTable {
        match &self.tables {
            Tables::Shared(t) => t,
            Tables::PerSite { tables, empty } => tables.get(site).unwrap_or(empty),
        }
    }

    fn shell_table_arc(&self, site: &Site) -> Arc<ShellTable> {
        match &self.tables {
            Tables::Shared(t) => t.clone(),
            Tables::PerSite { tables, empty } => tables.get(site).unwrap_or(empty).clone(),
        }
    }

    pub fn range_distribution(&self, site: &Site) -> RangeDistribution {
        RangeDistribution::new(self.beta, self.shell_table_arc(site))
    }

    /// `sum_{B ∋ i} |J_B|` (without `beta`).
    pub fn total_strength(&self, site: &Site) -> f64 {
        self.shell_table(site).total()
    }

    /// `S_i^{>k} = sum_{B ∋ i, B ⊄ B_i(k)} |J_B|`.
    pub fn tail_sum(&self, site: &Site, k: usize) -> f64 {
        self.shell_table(site).tail_sum(k)
    }

    /// Absolute strength of the sets with escape radius exactly `k`.
    pub fn shell_strength(&self, site: &Site, k: usize) -> f64 {
        self.shell_table(site).shell_strength(k)
    }

    pub fn big_m(&self, site: &Site) -> f64 {
        2.0 * (self.beta * self.total_strength(site)).exp()
    }

    pub fn lambda(&self, site: &Site, k: usize) -> f64 {
        self.range_distribution(site).lambda(k)
    }

    pub fn sample_range(&self, site: &Site, u: f64) -> usize {
        self.range_distribution(site).sample(u)
    }

    fn pair_shell(&self, k: usize) -> Cow<'_, [Site]> {
        match self.shells.get(k) {
            Some(cell) => Cow::Borrowed(cell.get_or_init(|| lattice::shell_offsets(self.dim, k))),
            None => Cow::Owned(lattice::shell_offsets(self.dim, k)),
        }
    }

    /// The sets containing `site` whose escape radius is exactly `k >= 1`.
    pub fn shell_terms(&self, site: &Site, k: usize) -> ShellTerms<'_> {
        match &self.potential {
            Potential::Pairwise(kernel) => {
                let coupling = kernel.coupling_at(k);
                if coupling == 0.0 {
                    ShellTerms::Pairwise { coupling, offsets: Cow::Borrowed(&[]) }
                } else {
                    ShellTerms::Pairwise { coupling, offsets: self.pair_shell(k) }
                }
            }
            Potential::Explicit(f) => ShellTerms::Sets(f.incidence(site).shell(k)),
        }
    }

    /// Every set `B` with escape radius `<= radius` (relative to each of its
    /// sites in the volume) that meets `volume`, each listed once, as
    /// `(sorted sites, J_B)`.
    pub fn terms_meeting(&self, volume: &SiteSet, radius: usize) -> Result<Vec<(Vec<Site>, f64)>, ModelError> {
        let mut seen: BTreeSet<(usize, Vec<Site>)> = BTreeSet::new();
        let mut out = Vec::new();
        for v in volume {
            for k in 1..=radius {
                match self.shell_terms(v, k) {
                    ShellTerms::Pairwise { coupling, offsets } => {
                        for r in offsets.iter() {
                            let w = v.offset_by(r)?;
                            let mut pair = vec![v.clone(), w];
                            pair.sort();
                            if seen.insert((0, pair.clone())) {
                                out.push((pair, coupling));
                            }
                        }
                    }
                    ShellTerms::Sets(terms) => {
                        for t in terms {
                            let mut sites: Vec<Site> =
                                t.offsets.iter().map(|o| v.offset_by(o)).collect::<Result<_, _>>()?;
                            sites.sort();
                            if seen.insert((t.term, sites.clone())) {
                                out.push((sites, t.coupling));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Stable textual identity of the model, used for hashing record headers.
    pub fn describe(&self) -> String {
        let pot = match &self.potential {
            Potential::Pairwise(k) => format!("{:?}/{:e}", k.shape, k.amplitude),
            Potential::Explicit(f) => {
                let terms: Vec<String> = f
                    .terms
                    .iter()
                    .map(|t| {
                        let s: Vec<String> = t.sites.iter().map(|x| x.to_string()).collect();
                        format!("{}:{:e}", s.join(""), t.coupling)
                    })
                    .collect();
                format!("explicit/{}/{}", f.translate, terms.join(";"))
            }
        };
        format!("d={};beta={:e};{}", self.dim, self.beta, pot)
    }

    /// SHA-256 of `describe()`, hex encoded.
    pub fn model_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.describe().as_bytes()))
    }
}

fn kernel_table(k: &PairwiseKernel, settings: &TailSettings) -> Result<ShellTable, ModelError> {
    let a = k.amplitude;
    if !a.is_finite() {
        return Err(ModelError::invalid("potential.amplitude", "must be finite"));
    }
    match k.shape {
        KernelShape::NearestNeighbor => {}
        KernelShape::Exponential { decay } => {
            if !(decay.is_finite() && decay > 0.0) {
                return Err(ModelError::invalid("potential.decay", "must be positive"));
            }
        }
        KernelShape::PowerLaw { exponent } => {
            if !exponent.is_finite() {
                return Err(ModelError::invalid("potential.exponent", "must be finite"));
            }
            if a != 0.0 && exponent <= k.dim as f64 {
                return Err(ModelError::Summability(format!(
                    "power-law exponent {exponent} <= dimension {}: total strength diverges",
                    k.dim
                )));
            }
        }
    }
    let h = k.horizon(settings.tolerance, settings.max_horizon);
    let abs: Vec<f64> = (0..=h).map(|m| if m == 0 { 0.0 } else { k.shell_strength(m) }).collect();
    let remainder =
        k.tail_bound(h, 0).ok_or_else(|| ModelError::Summability(format!("no certified tail bound at horizon {h}")))?;
    let weighted = k.tail_bound(h, 1);
    Ok(ShellTable::new(k.dim, abs, remainder, weighted))
}

fn incidence_table(dim: usize, inc: &Incidence) -> ShellTable {
    let abs: Vec<f64> = (0..=inc.radius()).map(|k| inc.shell_strength(k)).collect();
    ShellTable::new(dim, abs, 0.0, Some(0.0))
}
