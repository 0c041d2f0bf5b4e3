//! The backward sketch process and its coupled range-`L` companion.
//!
//! Starting from a finite set `C`, events arrive at total rate
//! `sum_{j in C} M_j`. Each event picks a site `j ∝ M_j` and a range `k` from
//! `lambda_j`; `k = 0` removes `j`, `k >= 1` adds the ball `B_j(k)`. The
//! truncated process sees the same events but ignores marks `k > L` and sites
//! it does not contain.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interaction::InteractionModel;
use crate::lattice::{self, LatticeError, Site, SiteSet};
use crate::streams::{Lane, LaneStream, StreamKey, UniformSource};

pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("the start set is empty")]
    EmptyStart,
    #[error(
        "sketch did not terminate within {limit} events (current set size {size}); is the termination condition met?"
    )]
    TooManyEvents { limit: u64, size: usize },
    #[error("truncation level must be at least 1")]
    BadLevel,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub n: u64,
    pub site: Site,
    pub k: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start: SiteSet,
    pub events: Vec<Event>,
}

impl EventRecord {
    pub fn n_stop(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn t_stop(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t)
    }

    /// Sets `C_0, C_1, ..., C_{n_stop}` obtained by replaying the record.
    pub fn replay(&self) -> Result<Vec<SiteSet>, SketchError> {
        let mut c = self.start.clone();
        let mut out = Vec::with_capacity(self.events.len() + 1);
        out.push(c.clone());
        for e in &self.events {
            apply(&mut c, &e.site, e.k)?;
            out.push(c.clone());
        }
        Ok(out)
    }

    /// Checks numbering, time order, membership of every event site, and
    /// that the set empties exactly at the last event.
    pub fn validate(&self) -> Result<(), SketchError> {
        let bad = |msg: String| Err(SketchError::InvalidRecord(msg));
        if self.start.is_empty() {
            return Err(SketchError::EmptyStart);
        }
        let mut c = self.start.clone();
        let mut last_t = 0.0;
        for (idx, e) in self.events.iter().enumerate() {
            if e.n != idx as u64 + 1 {
                return bad(format!("event {} numbered {}", idx + 1, e.n));
            }
            if e.t.partial_cmp(&last_t) != Some(std::cmp::Ordering::Greater) {
                return bad(format!("time not increasing at event {}", e.n));
            }
            last_t = e.t;
            if c.is_empty() {
                return bad(format!("set already empty before event {}", e.n));
            }
            if !c.contains(&e.site) {
                return bad(format!("event {} at {} outside the current set", e.n, e.site));
            }
            apply(&mut c, &e.site, e.k)?;
        }
        if !c.is_empty() {
            return bad(format!("set of size {} left after the last event", c.len()));
        }
        Ok(())
    }
}

fn apply(c: &mut SiteSet, site: &Site, k: usize) -> Result<(), LatticeError> {
    if k == 0 {
        c.remove(site);
    } else {
        c.union_with(&lattice::ball(site, k)?);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRecord {
    pub level: usize,
    pub full: EventRecord,
    pub truncated: EventRecord,
    pub records_equal: bool,
    /// Index (in the full record) of the first event not shared by both.
    pub first_divergence_step: Option<u64>,
}

/// Picks `j ∈ C` with probability proportional to `M_j`.
fn pick_site<'a>(m: &InteractionModel, c: &'a SiteSet, total: f64, u: f64) -> &'a Site {
    if m.is_translation_invariant() {
        let idx = ((u * c.len() as f64) as usize).min(c.len() - 1);
        return c.nth(idx).expect("index in range");
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for s in c {
        acc += m.big_m(s);
        if target < acc {
            return s;
        }
        last = Some(s);
    }
    last.expect("nonempty set")
}

fn total_rate(m: &InteractionModel, c: &SiteSet) -> f64 {
    if m.is_translation_invariant() {
        c.len() as f64 * m.big_m(&Site::origin(m.dim()))
    } else {
        c.iter().map(|s| m.big_m(s)).sum()
    }
}

/// Draws one event for the set `c`: `(waiting time, site, range)`, consuming
/// exactly three uniforms in that order.
fn draw_event<U: UniformSource>(m: &InteractionModel, c: &SiteSet, rng: &mut U) -> (f64, Site, usize) {
    let rate = total_rate(m, c);
    let dt = -rng.uniform().ln() / rate;
    let site = pick_site(m, c, rate, rng.uniform()).clone();
    let k = m.sample_range(&site, rng.uniform());
    (dt, site, k)
}

/// Backward sketch in which events whose range fails `keep` are invisible:
/// they consume randomness and time but change nothing and are not recorded.
/// `keep = |_| true` gives the ordinary process.
pub fn run_backward_filtered<U: UniformSource>(
    m: &InteractionModel,
    start: &SiteSet,
    rng: &mut U,
    max_events: u64,
    keep: impl Fn(usize) -> bool,
) -> Result<EventRecord, SketchError> {
    if start.is_empty() {
        return Err(SketchError::EmptyStart);
    }
    let mut c = start.clone();
    let mut t = 0.0;
    let mut events = Vec::new();
    let mut drawn = 0u64;
    while !c.is_empty() {
        if drawn >= max_events {
            return Err(SketchError::TooManyEvents { limit: max_events, size: c.len() });
        }
        drawn += 1;
        let (dt, site, k) = draw_event(m, &c, rng);
        t += dt;
        if keep(k) {
            apply(&mut c, &site, k)?;
            events.push(Event { n: events.len() as u64 + 1, site, k, t });
        }
    }
    Ok(EventRecord { start: start.clone(), events })
}

pub fn run_backward(
    m: &InteractionModel,
    start: &SiteSet,
    key: StreamKey,
    max_events: u64,
) -> Result<EventRecord, SketchError> {
    let mut rng = LaneStream::new(key, Lane::Backward);
    run_backward_filtered(m, start, &mut rng, max_events, |_| true)
}

/// Drives the full process and its range-`level` truncation off one event stream.
pub fn run_backward_coupled(
    m: &InteractionModel,
    level: usize,
    start: &SiteSet,
    key: StreamKey,
    max_events: u64,
) -> Result<CoupledRecord, SketchError> {
    if level == 0 {
        return Err(SketchError::BadLevel);
    }
    if start.is_empty() {
        return Err(SketchError::EmptyStart);
    }
    let mut rng = LaneStream::new(key, Lane::Backward);
    let mut c = start.clone();
    let mut ct = start.clone();
    let mut t = 0.0;
    let mut full = Vec::new();
    let mut trunc = Vec::new();
    let mut divergence = None;
    while !c.is_empty() {
        if full.len() as u64 >= max_events {
            return Err(SketchError::TooManyEvents { limit: max_events, size: c.len() });
        }
        let (dt, site, k) = draw_event(m, &c, &mut rng);
        t += dt;
        let n = full.len() as u64 + 1;
        let applies = k <= level && ct.contains(&site);
        if applies {
            apply(&mut ct, &site, k)?;
            trunc.push(Event { n: trunc.len() as u64 + 1, site: site.clone(), k, t });
        } else if divergence.is_none() {
            divergence = Some(n);
        }
        apply(&mut c, &site, k)?;
        full.push(Event { n, site, k, t });
        assert!(ct.is_subset(&c), "truncated sketch escaped the full sketch at event {n}");
    }
    Ok(CoupledRecord {
        level,
        records_equal: divergence.is_none(),
        first_divergence_step: divergence,
        full: EventRecord { start: start.clone(), events: full },
        truncated: EventRecord { start: start.clone(), events: trunc },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StopStatistics {
    pub runs: usize,
    pub mean_n_stop: f64,
    pub var_n_stop: f64,
    pub se_n_stop: f64,
    pub mean_t_stop: f64,
    /// `(t, empirical P(T_STOP > t), standard error)`.
    pub survival: Vec<(f64, f64, f64)>,
}

pub fn stop_statistics<'a>(records: impl IntoIterator<Item = &'a EventRecord>, grid: &[f64]) -> StopStatistics {
    let mut n_stop = Vec::new();
    let mut t_stop = Vec::new();
    for r in records {
        n_stop.push(r.n_stop() as f64);
        t_stop.push(r.t_stop());
    }
    assert!(!n_stop.is_empty(), "need at least one record");
    stop_statistics_from(&n_stop, &t_stop, grid)
}

pub fn stop_statistics_from(n_stop: &[f64], t_stop: &[f64], grid: &[f64]) -> StopStatistics {
    let n = crate::stats::Moments::of(n_stop.iter().copied());
    let t = crate::stats::Moments::of(t_stop.iter().copied());
    let survival = grid
        .iter()
        .map(|&g| {
            let hits = t_stop.iter().filter(|&&x| x > g).count();
            let p = crate::stats::Proportion::new(hits as u64, t_stop.len() as u64);
            (g, p.estimate(), p.se())
        })
        .collect();
    StopStatistics {
        runs: n.count as usize,
        mean_n_stop: n.mean,
        var_n_stop: n.variance(),
        se_n_stop: n.se(),
        mean_t_stop: t.mean,
        survival,
    }
}

/// First line of a record dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub seed: u64,
    pub replica: u64,
    pub model_hash: String,
    pub start: SiteSet,
    #[serde(rename = "L")]
    pub level: Option<usize>,
    pub process: String,
}

/// Writes the header then one JSON object per event.
pub fn write_record_jsonl(out: &mut impl Write, header: &RecordHeader, record: &EventRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    writeln!(out)?;
    for e in &record.events {
        serde_json::to_writer(&mut *out, e)?;
        writeln!(out)?;
    }
    Ok(())
}
