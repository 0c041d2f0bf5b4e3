//! Explicit families of many-body terms `(B, J_B)`, optionally replicated by
//! translation over the whole lattice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::lattice::Site;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub sites: Vec<Site>,
    pub coupling: f64,
}

/// One set `B` containing a given site `i`, stored as offsets from `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub offsets: Vec<Site>,
    pub coupling: f64,
    /// Index of the generating term in the family.
    pub term: usize,
}

/// Sets containing a site, grouped by escape radius: `groups[k]` holds the
/// sets `B` with `B ⊂ B_i(k)` and `B ⊄ B_i(k-1)`. `groups[0]` is always empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Incidence {
    pub groups: Vec<Vec<LocalTerm>>,
}

impl Incidence {
    fn push(&mut self, radius: usize, t: LocalTerm) {
        if self.groups.len() <= radius {
            self.groups.resize(radius + 1, Vec::new());
        }
        self.groups[radius].push(t);
    }

    pub fn radius(&self) -> usize {
        self.groups.len().saturating_sub(1)
    }

    pub fn shell(&self, k: usize) -> &[LocalTerm] {
        self.groups.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn shell_strength(&self, k: usize) -> f64 {
        self.shell(k).iter().map(|t| t.coupling.abs()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitFamily {
    pub dim: usize,
    pub terms: Vec<Term>,
    pub translate: bool,
    shared: Incidence,
    per_site: BTreeMap<Site, Incidence>,
}

static EMPTY: Incidence = Incidence { groups: Vec::new() };

impl ExplicitFamily {
    pub fn new(dim: usize, terms: Vec<Term>, translate: bool) -> Result<Self, ModelError> {
        for (n, t) in terms.iter().enumerate() {
            let key = format!("potential.terms[{n}]");
            if t.sites.len() < 2 {
                return Err(ModelError::invalid(&key, "a term needs at least two sites"));
            }
            if let Some(s) = t.sites.iter().find(|s| s.dim() != dim) {
                return Err(ModelError::invalid(&key, format!("site {s} is not {dim}-dimensional")));
            }
            let mut sorted = t.sites.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != t.sites.len() {
                return Err(ModelError::invalid(&key, "repeated site in a term"));
            }
            if !t.coupling.is_finite() {
                return Err(ModelError::invalid(&format!("{key}.coupling"), "must be finite"));
            }
        }
        let mut family =
            ExplicitFamily { dim, terms, translate, shared: Incidence::default(), per_site: BTreeMap::new() };
        family.build_incidence()?;
        Ok(family)
    }

    fn build_incidence(&mut self) -> Result<(), ModelError> {
        for (idx, term) in self.terms.iter().enumerate() {
            for anchor in &term.sites {
                let offsets: Vec<Site> = term
                    .sites
                    .iter()
                    .map(|s| {
                        s.checked_sub(anchor).ok_or_else(|| {
                            ModelError::invalid(&format!("potential.terms[{idx}]"), "coordinate overflow")
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let radius = offsets.iter().map(|o| o.l1_norm() as usize).max().unwrap_or(0);
                let local = LocalTerm { offsets, coupling: term.coupling, term: idx };
                if self.translate {
                    self.shared.push(radius, local);
                } else {
                    self.per_site.entry(anchor.clone()).or_default().push(radius, local);
                }
            }
        }
        Ok(())
    }

    pub fn incidence(&self, site: &Site) -> &Incidence {
        if self.translate {
            &self.shared
        } else {
            self.per_site.get(site).unwrap_or(&EMPTY)
        }
    }

    /// Sites with at least one incident term (all sites when translated).
    pub fn support(&self) -> impl Iterator<Item = &Site> + '_ {
        self.per_site.keys()
    }

    pub fn range(&self) -> usize {
        if self.translate {
            self.shared.radius()
        } else {
            self.per_site.values().map(Incidence::radius).max().unwrap_or(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(c: &[i32]) -> Site {
        Site::new(c)
    }

    #[test]
    fn translated_incidence_groups_by_radius() {
        let fam = ExplicitFamily::new(
            2,
            vec![
                Term { sites: vec![s(&[0, 0]), s(&[1, 0])], coupling: 0.2 },
                Term { sites: vec![s(&[0, 0]), s(&[0, 1])], coupling: 0.2 },
                Term { sites: vec![s(&[0, 0]), s(&[1, 0]), s(&[0, 1])], coupling: -0.1 },
            ],
            true,
        )
        .unwrap();
        let inc = fam.incidence(&s(&[5, 5]));
        // four bonds of radius one, plus the triangle anchored at its corner
        assert_eq!(inc.shell(1).len(), 5);
        // triangle anchored at (1,0) or (0,1) reaches distance 2
        assert_eq!(inc.shell(2).len(), 2);
        assert!((inc.shell_strength(1) - 0.9).abs() < 1e-15);
        assert_eq!(fam.range(), 2);
    }

    #[test]
    fn fixed_family_is_site_dependent() {
        let fam = ExplicitFamily::new(1, vec![Term { sites: vec![s(&[0]), s(&[3])], coupling: 1.0 }], false).unwrap();
        assert_eq!(fam.incidence(&s(&[0])).shell(3).len(), 1);
        assert_eq!(fam.incidence(&s(&[3])).shell(3).len(), 1);
        assert!(fam.incidence(&s(&[1])).groups.is_empty());
        assert_eq!(fam.support().count(), 2);
    }

    #[test]
    fn rejects_bad_terms() {
        let single = ExplicitFamily::new(1, vec![Term { sites: vec![s(&[0])], coupling: 1.0 }], true);
        assert!(matches!(single, Err(ModelError::InvalidValue { .. })));
        let repeated = ExplicitFamily::new(1, vec![Term { sites: vec![s(&[0]), s(&[0])], coupling: 1.0 }], true);
        assert!(repeated.is_err());
        let wrong_dim = ExplicitFamily::new(2, vec![Term { sites: vec![s(&[0]), s(&[1])], coupling: 1.0 }], true);
        assert!(wrong_dim.is_err());
    }
}
