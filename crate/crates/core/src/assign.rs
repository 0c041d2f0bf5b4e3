//! Forward spin assignment and the public sampling entry points.
//!
//! A record is replayed from its oldest event (`n = n_stop`) to its newest
//! (`n = 1`). Range-0 events toss a fair coin; range-`K` events update the
//! spin at `I` with `p_I^[K]`, reading only sites assigned by older events.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::interaction::InteractionModel;
use crate::lattice::{Site, SiteSet};
use crate::rates::{update_prob, RatesError, Spin, SpinWindow};
use crate::sketch::{self, CoupledRecord, EventRecord, SketchError};
use crate::streams::{IndexedUniforms, Lane, StreamKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("corrupted record: event {n} reads unassigned site {site}")]
    CorruptedRecord { n: u64, site: Site },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Replays `record` forward with uniforms from `lane` of `key`; returns the
/// spins on `record.start`.
pub fn run_forward(
    m: &InteractionModel,
    record: &EventRecord,
    key: StreamKey,
    lane: Lane,
) -> Result<SpinWindow, AssignError> {
    let mut uniforms = IndexedUniforms::new(key, lane);
    let mut x = SpinWindow::new();
    for e in record.events.iter().rev() {
        let u = uniforms.at(e.n);
        let w: Spin = if e.k == 0 {
            if u < 0.5 {
                1
            } else {
                -1
            }
        } else {
            let corrupted = |site: Site| AssignError::CorruptedRecord { n: e.n, site };
            let current = x.get(&e.site).ok_or_else(|| corrupted(e.site.clone()))?;
            let p = match update_prob(m, &e.site, e.k, &x) {
                Err(RatesError::Unassigned(site)) => return Err(corrupted(site)),
                other => other?,
            };
            if u < p {
                -current
            } else {
                current
            }
        };
        x.set(e.site.clone(), w);
    }
    let out = x.restrict(&record.start);
    if out.len() != record.start.len() {
        return Err(AssignError::InvalidRecord("some start sites were never assigned".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub key: StreamKey,
    pub window: SiteSet,
    pub spins: SpinWindow,
    pub n_stop: u64,
    pub t_stop: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSampleResult {
    pub key: StreamKey,
    pub level: usize,
    pub window: SiteSet,
    pub spins_full: SpinWindow,
    pub spins_truncated: SpinWindow,
    pub records_equal: bool,
    pub n_stop: u64,
    pub n_stop_truncated: u64,
    pub t_stop: f64,
}

impl CoupledSampleResult {
    /// Per-site agreement in window order.
    pub fn agree(&self) -> Vec<bool> {
        self.window.iter().map(|s| self.spins_full.get(s) == self.spins_truncated.get(s)).collect()
    }

    pub fn agrees_at(&self, site: &Site) -> bool {
        self.spins_full.get(site) == self.spins_truncated.get(site)
    }
}

pub fn sample_window_with_record(
    m: &InteractionModel,
    window: &SiteSet,
    key: StreamKey,
    max_events: u64,
) -> Result<(SampleResult, EventRecord), AssignError> {
    let record = sketch::run_backward(m, window, key, max_events)?;
    let spins = run_forward(m, &record, key, Lane::Forward)?;
    let result = SampleResult { key, window: window.clone(), spins, n_stop: record.n_stop(), t_stop: record.t_stop() };
    Ok((result, record))
}

/// One perfect sample of the joint law of the spins on `window`.
pub fn sample_window(
    m: &InteractionModel,
    window: &SiteSet,
    key: StreamKey,
    max_events: u64,
) -> Result<SampleResult, AssignError> {
    sample_window_with_record(m, window, key, max_events).map(|(r, _)| r)
}

pub fn sample_coupled_with_record(
    m: &InteractionModel,
    level: usize,
    window: &SiteSet,
    key: StreamKey,
    max_events: u64,
) -> Result<(CoupledSampleResult, CoupledRecord), AssignError> {
    let rec = sketch::run_backward_coupled(m, level, window, key, max_events)?;
    let spins_full = run_forward(m, &rec.full, key, Lane::Forward)?;
    let spins_truncated = if rec.records_equal {
        spins_full.clone()
    } else {
        run_forward(m, &rec.truncated, key, Lane::ForwardTruncated)?
    };
    let result = CoupledSampleResult {
        key,
        level,
        window: window.clone(),
        spins_full,
        spins_truncated,
        records_equal: rec.records_equal,
        n_stop: rec.full.n_stop(),
        n_stop_truncated: rec.truncated.n_stop(),
        t_stop: rec.full.t_stop(),
    };
    Ok((result, rec))
}

/// Joint sample of `(X, X^[L])` on `window`.
pub fn sample_coupled(
    m: &InteractionModel,
    level: usize,
    window: &SiteSet,
    key: StreamKey,
    max_events: u64,
) -> Result<CoupledSampleResult, AssignError> {
    sample_coupled_with_record(m, level, window, key, max_events).map(|(r, _)| r)
}

/// `sample_window_with_record` for replicas `0..replicas` of `seed`, in
/// replica order regardless of how the work is scheduled.
pub fn sample_replicas(
    m: &InteractionModel,
    window: &SiteSet,
    replicas: u64,
    seed: u64,
    max_events: u64,
) -> Result<Vec<(SampleResult, EventRecord)>, AssignError> {
    (0..replicas)
        .into_par_iter()
        .map(|r| sample_window_with_record(m, window, StreamKey::new(seed, r), max_events))
        .collect()
}

/// `sample_coupled_with_record` for replicas `0..replicas` of `seed`, in replica order.
pub fn coupled_replicas(
    m: &InteractionModel,
    level: usize,
    window: &SiteSet,
    replicas: u64,
    seed: u64,
    max_events: u64,
) -> Result<Vec<(CoupledSampleResult, CoupledRecord)>, AssignError> {
    (0..replicas)
        .into_par_iter()
        .map(|r| sample_coupled_with_record(m, level, window, StreamKey::new(seed, r), max_events))
        .collect()
}

/// JSON line for one sample.
#[derive(Serialize)]
pub struct SampleLine<'a> {
    pub seed: u64,
    pub replica: u64,
    pub window: &'a SiteSet,
    pub spins: Vec<Spin>,
    pub n_stop: u64,
    pub t_stop: f64,
}

impl SampleResult {
    pub fn line(&self) -> SampleLine<'_> {
        SampleLine {
            seed: self.key.seed,
            replica: self.key.replica,
            window: &self.window,
            spins: self.spins.values_on(&self.window).expect("window fully assigned"),
            n_stop: self.n_stop,
            t_stop: self.t_stop,
        }
    }
}

#[derive(Serialize)]
pub struct CoupledLine<'a> {
    pub seed: u64,
    pub replica: u64,
    #[serde(rename = "L")]
    pub level: usize,
    pub window: &'a SiteSet,
    pub spins: Vec<Spin>,
    pub spins_truncated: Vec<Spin>,
    pub records_equal: bool,
    pub agree_map: Vec<bool>,
    pub n_stop: u64,
    pub n_stop_truncated: u64,
    pub t_stop: f64,
}

impl CoupledSampleResult {
    pub fn line(&self) -> CoupledLine<'_> {
        CoupledLine {
            seed: self.key.seed,
            replica: self.key.replica,
            level: self.level,
            window: &self.window,
            spins: self.spins_full.values_on(&self.window).expect("window fully assigned"),
            spins_truncated: self.spins_truncated.values_on(&self.window).expect("window fully assigned"),
            records_equal: self.records_equal,
            agree_map: self.agree(),
            n_stop: self.n_stop,
            n_stop_truncated: self.n_stop_truncated,
            t_stop: self.t_stop,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{Event, DEFAULT_MAX_EVENTS};

    fn s(x: i32) -> Site {
        Site::new(&[x])
    }

    #[test]
    fn last_removal_ignores_neighbours() {
        let m = InteractionModel::nearest_neighbor(1, 5.0, 1.0).unwrap();
        let ev = |n, x, k, t| Event { n, site: s(x), k, t };
        // the newest event (n = 1) is a fresh coin at 0, processed last
        let record = EventRecord {
            start: [0, 1].iter().map(|x| s(*x)).collect(),
            events: vec![ev(1, 0, 0, 1.0), ev(2, 1, 1, 2.0), ev(3, 0, 0, 3.0), ev(4, 2, 0, 4.0), ev(5, 1, 0, 5.0)],
        };
        record.validate().unwrap();
        let (mut plus, mut same) = (0, 0);
        for r in 0..2000 {
            let x = run_forward(&m, &record, StreamKey::new(1, r), Lane::Forward).unwrap();
            plus += (x.get(&s(0)) == Some(1)) as i32;
            same += (x.get(&s(0)) == x.get(&s(1))) as i32;
        }
        // 4 standard deviations of Binomial(2000, 1/2) is about 90
        assert!((plus - 1000).abs() < 90, "{plus}");
        assert!((same - 1000).abs() < 90, "{same}");
    }

    #[test]
    fn reading_unassigned_site_is_corruption() {
        let m = InteractionModel::nearest_neighbor(1, 1.0, 0.05).unwrap();
        // range-1 update at 0 processed first in forward order: nothing assigned yet
        let record = EventRecord {
            start: SiteSet::singleton(s(0)),
            events: vec![Event { n: 1, site: s(0), k: 0, t: 1.0 }, Event { n: 2, site: s(0), k: 1, t: 2.0 }],
        };
        let err = run_forward(&m, &record, 1.into(), Lane::Forward).unwrap_err();
        assert!(matches!(err, AssignError::CorruptedRecord { n: 2, .. }));
    }

    #[test]
    fn valid_records_never_read_unassigned_sites() {
        let m = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05).unwrap();
        let window: SiteSet = [0, 1, 2].iter().map(|x| s(*x)).collect();
        for r in 0..300 {
            let res = sample_window(&m, &window, StreamKey::new(21, r), DEFAULT_MAX_EVENTS).unwrap();
            assert_eq!(res.spins.len(), 3);
        }
    }

    #[test]
    fn equal_records_give_equal_spins() {
        let m = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05).unwrap();
        let window = SiteSet::singleton(s(0));
        let mut equal = 0;
        for r in 0..300 {
            let c = sample_coupled(&m, 2, &window, StreamKey::new(5, r), DEFAULT_MAX_EVENTS).unwrap();
            if c.records_equal {
                equal += 1;
                assert_eq!(c.spins_full, c.spins_truncated);
            }
            let single = sample_window(&m, &window, StreamKey::new(5, r), DEFAULT_MAX_EVENTS).unwrap();
            assert_eq!(single.spins, c.spins_full);
        }
        assert!(equal > 250);
    }

    #[test]
    fn sample_line_serializes() {
        let m = InteractionModel::nearest_neighbor(1, 1.0, 0.05).unwrap();
        let window: SiteSet = [0, 1].iter().map(|x| s(*x)).collect();
        let r = sample_window(&m, &window, 3.into(), DEFAULT_MAX_EVENTS).unwrap();
        let v: serde_json::Value = serde_json::to_value(r.line()).unwrap();
        assert_eq!(v["window"], serde_json::json!([[0], [1]]));
        assert_eq!(v["spins"].as_array().unwrap().len(), 2);
    }
}
