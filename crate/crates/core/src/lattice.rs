//! Geometry of `Z^d` under the L1 norm.
//!
//! Balls `B_i(k) = {j : ||j - i||_1 <= k}` and the shells between consecutive
//! balls are the only neighbourhoods the sampler ever needs. Site sets iterate
//! in lexicographic coordinate order so that random draws which index into a
//! set are reproducible.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("coordinate overflow while offsetting site {site} by radius {radius}")]
    Overflow { site: String, radius: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot parse site {0:?}")]
    Parse(String),
}

/// A point of `Z^d`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(SmallVec<[i32; 4]>);

impl Site {
    pub fn new(coords: &[i32]) -> Self {
        assert!(!coords.is_empty(), "a site needs at least one coordinate");
        Site(SmallVec::from_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Site(SmallVec::from_elem(0, dim))
    }

    /// Unit vector along the first axis scaled by `r`.
    pub fn along_axis(dim: usize, r: i32) -> Self {
        let mut s = Site::origin(dim);
        s.0[0] = r;
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    pub fn l1_distance(&self, other: &Site) -> u64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs()).sum()
    }

    pub fn checked_add(&self, offset: &Site) -> Option<Site> {
        if self.dim() != offset.dim() {
            return None;
        }
        let mut out = SmallVec::with_capacity(self.dim());
        for (a, b) in self.0.iter().zip(offset.0.iter()) {
            out.push(a.checked_add(*b)?);
        }
        Some(Site(out))
    }

    pub fn checked_sub(&self, other: &Site) -> Option<Site> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut out = SmallVec::with_capacity(self.dim());
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            out.push(a.checked_sub(*b)?);
        }
        Some(Site(out))
    }

    /// `self + offset`, reporting overflow as a lattice error.
    pub fn offset_by(&self, offset: &Site) -> Result<Site, LatticeError> {
        self.checked_add(offset)
            .ok_or_else(|| LatticeError::Overflow { site: self.to_string(), radius: offset.l1_norm() as usize })
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, c) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Parses `"3"`, `"1,-2"` or `"(1,-2)"`.
impl FromStr for Site {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords: Result<SmallVec<[i32; 4]>, _> = trimmed.split(',').map(|c| c.trim().parse::<i32>()).collect();
        match coords {
            Ok(c) if !c.is_empty() => Ok(Site(c)),
            _ => Err(LatticeError::Parse(s.to_string())),
        }
    }
}

/// A finite set of sites with lexicographic iteration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteSet(BTreeSet<Site>);

impl SiteSet {
    pub fn new() -> Self {
        SiteSet(BTreeSet::new())
    }

    pub fn singleton(site: Site) -> Self {
        let mut s = SiteSet::new();
        s.insert(site);
        s
    }

    pub fn insert(&mut self, site: Site) -> bool {
        self.0.insert(site)
    }

    pub fn remove(&mut self, site: &Site) -> bool {
        self.0.remove(site)
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.0.contains(site)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> + '_ {
        self.0.iter()
    }

    pub fn union_with(&mut self, other: &SiteSet) {
        for s in other.iter() {
            self.0.insert(s.clone());
        }
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        SiteSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// The `n`-th site in iteration order.
    pub fn nth(&self, n: usize) -> Option<&Site> {
        self.0.iter().nth(n)
    }

    pub fn translate(&self, by: &Site) -> Result<SiteSet, LatticeError> {
        self.iter().map(|s| s.offset_by(by)).collect()
    }
}

impl FromIterator<Site> for SiteSet {
    fn from_iter<T: IntoIterator<Item = Site>>(iter: T) -> Self {
        SiteSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Site;
    type IntoIter = std::collections::btree_set::Iter<'a, Site>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn l1_norm(site: &Site) -> u64 {
    site.l1_norm()
}

/// Offsets `r` with `||r||_1 <= k`, in lexicographic order.
pub fn ball_offsets(dim: usize, k: usize) -> Vec<Site> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; dim];
    push_offsets(&mut cur, 0, k as i64, false, &mut out);
    out
}

/// Offsets `r` with `||r||_1 == k`, in lexicographic order.
pub fn shell_offsets(dim: usize, k: usize) -> Vec<Site> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; dim];
    push_offsets(&mut cur, 0, k as i64, true, &mut out);
    out
}

fn push_offsets(cur: &mut [i32], axis: usize, budget: i64, exact: bool, out: &mut Vec<Site>) {
    if axis == cur.len() {
        if !exact || budget == 0 {
            out.push(Site::new(cur));
        }
        return;
    }
    let last = axis + 1 == cur.len();
    for c in -budget..=budget {
        if last && exact && c.abs() != budget {
            continue;
        }
        cur[axis] = c as i32;
        push_offsets(cur, axis + 1, budget - c.abs(), exact, out);
    }
    cur[axis] = 0;
}

/// `B_i(k)`; `ball(i, 0) = {i}`.
pub fn ball(center: &Site, k: usize) -> Result<SiteSet, LatticeError> {
    if k > i32::MAX as usize {
        return Err(LatticeError::Overflow { site: center.to_string(), radius: k });
    }
    ball_offsets(center.dim(), k)
        .iter()
        .map(|r| center.checked_add(r).ok_or_else(|| LatticeError::Overflow { site: center.to_string(), radius: k }))
        .collect()
}

/// `B_i(k) \ B_i(k-1)` for `k >= 1`.
pub fn shell(center: &Site, k: usize) -> Result<SiteSet, LatticeError> {
    assert!(k >= 1, "shells start at radius 1");
    if k > i32::MAX as usize {
        return Err(LatticeError::Overflow { site: center.to_string(), radius: k });
    }
    shell_offsets(center.dim(), k)
        .iter()
        .map(|r| center.checked_add(r).ok_or_else(|| LatticeError::Overflow { site: center.to_string(), radius: k }))
        .collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) / (j + 1);
    }
    acc
}

/// `|B_i(k)|` in dimension `d`: `sum_j 2^j C(d,j) C(k,j)`. Saturates at `u64::MAX`.
pub fn ball_size(d: usize, k: usize) -> u64 {
    assert!(d >= 1, "dimension must be at least 1");
    let (d, k) = (d as u128, k as u128);
    let mut total: u128 = 0;
    for j in 0..=d.min(k) {
        let term = (1u128 << j).saturating_mul(binomial(d, j)).saturating_mul(binomial(k, j));
        total = total.saturating_add(term);
    }
    total.min(u64::MAX as u128) as u64
}

/// `|B_i(k) \ B_i(k-1)|`.
pub fn shell_size(d: usize, k: usize) -> u64 {
    if k == 0 {
        return 1;
    }
    ball_size(d, k) - ball_size(d, k - 1)
}

/// `|B_i(k) \ B_i(k-1)|` as a float: `sum_{j>=1} 2^j C(d,j) C(k-1,j-1)`.
pub fn shell_volume(d: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut binom_d = 1.0f64;
    let mut binom_k = 1.0f64;
    for j in 1..=d.min(k) {
        binom_d *= (d - j + 1) as f64 / j as f64;
        if j > 1 {
            binom_k *= (k - j + 1) as f64 / (j - 1) as f64;
        }
        total += 2f64.powi(j as i32) * binom_d * binom_k;
    }
    total
}

/// `|B_i(k)|` as a float, for weights in sums that may run far out.
pub fn ball_volume(d: usize, k: usize) -> f64 {
    let mut total = 0.0;
    let mut binom_d = 1.0f64;
    let mut binom_k = 1.0f64;
    for j in 0..=d.min(k) {
        if j > 0 {
            binom_d *= (d - j + 1) as f64 / j as f64;
            binom_k *= (k - j + 1) as f64 / j as f64;
        }
        total += 2f64.powi(j as i32) * binom_d * binom_k;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_ball(dim: usize, k: i32) -> usize {
        // enumerate the bounding box [-k, k]^d
        let side = (2 * k + 1) as usize;
        let mut count = 0;
        for idx in 0..side.pow(dim as u32) {
            let mut rem = idx;
            let mut norm = 0;
            for _ in 0..dim {
                let c = (rem % side) as i32 - k;
                rem /= side;
                norm += c.abs();
            }
            if norm <= k {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn norms() {
        assert_eq!(Site::new(&[0, 0]).l1_norm(), 0);
        assert_eq!(Site::new(&[-1, 2]).l1_norm(), 3);
        assert_eq!(l1_norm(&Site::new(&[1, -1, 1])), 3);
    }

    #[test]
    fn small_balls() {
        let b = ball(&Site::new(&[0]), 1).unwrap();
        let expected: SiteSet = [-1, 0, 1].iter().map(|x| Site::new(&[*x])).collect();
        assert_eq!(b, expected);

        let b = ball(&Site::origin(2), 1).unwrap();
        let expected: SiteSet = [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]].iter().map(|c| Site::new(c)).collect();
        assert_eq!(b, expected);
        assert_eq!(ball(&Site::origin(2), 2).unwrap().len(), 13);
        assert_eq!(ball(&Site::new(&[4, -7]), 0).unwrap(), SiteSet::singleton(Site::new(&[4, -7])));
    }

    #[test]
    fn ball_size_closed_form() {
        assert_eq!(ball_size(1, 3), 7);
        assert_eq!(ball_size(2, 2), 13);
        for d in 1..=5 {
            assert_eq!(ball_size(d, 0), 1);
        }
    }

    #[test]
    fn ball_size_matches_enumeration_exhaustively() {
        for d in 1..=3 {
            for k in 0..=10 {
                let brute = brute_ball(d, k as i32);
                assert_eq!(ball_size(d, k) as usize, brute, "d={d} k={k}");
                assert_eq!(ball(&Site::origin(d), k).unwrap().len(), brute);
                assert!((ball_volume(d, k) - brute as f64).abs() < 1e-9);
                if k >= 1 {
                    assert_eq!(shell_volume(d, k), shell_size(d, k) as f64, "d={d} k={k}");
                }
            }
        }
    }

    #[test]
    fn shells() {
        let s = shell(&Site::new(&[0]), 2).unwrap();
        let expected: SiteSet = [-2, 2].iter().map(|x| Site::new(&[*x])).collect();
        assert_eq!(s, expected);
        assert_eq!(shell(&Site::origin(2), 1).unwrap().len(), 4);
        assert_eq!(shell(&Site::origin(2), 2).unwrap().len(), 8);
        assert_eq!(shell_size(2, 2), 8);
        for d in 1..=3 {
            for k in 1..=6 {
                assert_eq!(shell_offsets(d, k).len() as u64, shell_size(d, k));
            }
        }
    }

    #[test]
    fn shells_partition_the_ball() {
        let c = Site::new(&[2, -1, 5]);
        let mut acc = SiteSet::singleton(c.clone());
        for k in 1..=4 {
            let inner = ball(&c, k - 1).unwrap();
            let outer = ball(&c, k).unwrap();
            assert!(inner.is_subset(&outer));
            let sh = shell(&c, k).unwrap();
            assert_eq!(outer.difference(&inner), sh);
            acc.union_with(&sh);
            assert_eq!(acc, outer);
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let edge = Site::new(&[i32::MAX, 0]);
        assert!(matches!(ball(&edge, 1), Err(LatticeError::Overflow { .. })));
    }

    #[test]
    fn iteration_is_lexicographic() {
        let b = ball(&Site::origin(2), 1).unwrap();
        let v: Vec<_> = b.iter().cloned().collect();
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(v, sorted);
        assert_eq!(v[0], Site::new(&[-1, 0]));
    }

    #[test]
    fn parse_and_display() {
        let s: Site = "(1,-2)".parse().unwrap();
        assert_eq!(s, Site::new(&[1, -2]));
        assert_eq!(s.to_string(), "(1,-2)");
        assert_eq!("7".parse::<Site>().unwrap(), Site::new(&[7]));
        assert!("a,b".parse::<Site>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn translation_invariance(x in -50i32..50, y in -50i32..50, k in 0usize..5) {
            let c = Site::new(&[x, y]);
            let shifted = ball(&Site::origin(2), k).unwrap().translate(&c).unwrap();
            proptest::prop_assert_eq!(ball(&c, k).unwrap(), shifted);
        }
    }
}
