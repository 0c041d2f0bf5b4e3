//! Per-site shell strengths, tail sums and the range distribution `lambda_i(k)`.

use std::sync::Arc;

use crate::lattice::ball_volume;

/// Absolute interaction strength per escape radius for one site, with
/// suffix sums `S^{>k}` and a certified bound on everything past the horizon.
///
/// Independent of `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellTable {
    dim: usize,
    /// `abs[k]` = sum of `|J_B|` over `B ∋ i` with escape radius exactly `k`.
    abs: Vec<f64>,
    /// `tail[k]` = `sum_{k < m <= H} abs[m]`.
    tail: Vec<f64>,
    remainder: f64,
    weighted_remainder: Option<f64>,
}

impl ShellTable {
    /// `abs[0]` must be zero (no set of two or more sites fits in `B_i(0)`).
    pub fn new(dim: usize, mut abs: Vec<f64>, remainder: f64, weighted_remainder: Option<f64>) -> Self {
        if abs.is_empty() {
            abs.push(0.0);
        }
        debug_assert_eq!(abs[0], 0.0);
        let h = abs.len() - 1;
        let mut tail = vec![0.0; h + 1];
        // accumulate from the far end, smallest terms first
        for k in (0..h).rev() {
            tail[k] = tail[k + 1] + abs[k + 1];
        }
        ShellTable { dim, abs, tail, remainder, weighted_remainder }
    }

    pub fn empty(dim: usize) -> Self {
        ShellTable::new(dim, vec![0.0], 0.0, Some(0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest radius held explicitly.
    pub fn horizon(&self) -> usize {
        self.abs.len() - 1
    }

    pub fn is_exact(&self) -> bool {
        self.remainder == 0.0
    }

    /// Certified bound on the strength beyond the horizon.
    pub fn remainder(&self) -> f64 {
        self.remainder
    }

    pub fn weighted_remainder(&self) -> Option<f64> {
        self.weighted_remainder
    }

    pub fn shell_strength(&self, k: usize) -> f64 {
        self.abs.get(k).copied().unwrap_or(0.0)
    }

    /// `S^{>k}`; past the horizon this is the point value 0 (see `tail_interval`).
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.tail[k.min(self.horizon())]
    }

    pub fn tail_interval(&self, k: usize) -> (f64, f64) {
        let lo = self.tail_sum(k);
        (lo, lo + self.remainder)
    }

    pub fn total(&self) -> f64 {
        self.tail[0]
    }

    /// `sum_{k>=1} |B(k)| abs[k]`: explicit part and certified upper bound.
    pub fn weighted_sum(&self) -> (f64, Option<f64>) {
        let lower: f64 = (1..=self.horizon()).map(|k| ball_volume(self.dim, k) * self.abs[k]).sum();
        (lower, self.weighted_remainder.map(|r| lower + r))
    }

    /// `sum_{k>=2} |B(k)| abs[k]` (the second term of the critical-beta
    /// equation), including the certified remainder.
    pub fn weighted_sum_from_two(&self) -> Option<f64> {
        let explicit: f64 = (2..=self.horizon()).map(|k| ball_volume(self.dim, k) * self.abs[k]).sum();
        self.weighted_remainder.map(|r| explicit + r)
    }
}

/// The range law `(lambda_i(k))_{k>=0}` at a given inverse temperature.
#[derive(Clone, Debug)]
pub struct RangeDistribution {
    beta: f64,
    table: Arc<ShellTable>,
}

impl RangeDistribution {
    pub fn new(beta: f64, table: Arc<ShellTable>) -> Self {
        RangeDistribution { beta, table }
    }

    pub fn table(&self) -> &ShellTable {
        &self.table
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `M_i = 2 exp(beta * sum_{B ∋ i} |J_B|)`.
    pub fn big_m(&self) -> f64 {
        2.0 * (self.beta * self.table.total()).exp()
    }

    pub fn lambda(&self, k: usize) -> f64 {
        let b = self.beta;
        let t = &self.table;
        match k {
            0 => (-2.0 * b * t.total()).exp(),
            1 => (-b * t.tail_sum(1)).exp() - (-2.0 * b * t.total()).exp(),
            _ if k > t.horizon() => 0.0,
            _ => (-b * t.tail_sum(k)).exp() * -(-b * t.shell_strength(k)).exp_m1(),
        }
    }

    /// `alpha_i(k) = sum_{l <= k} lambda_i(l)`; equals `exp(-beta S^{>k})` for `k >= 1`.
    pub fn cdf(&self, k: usize) -> f64 {
        if k == 0 {
            self.lambda(0)
        } else {
            (-self.beta * self.table.tail_sum(k)).exp()
        }
    }

    /// Inverse-CDF draw: the least `k` with `alpha(k) >= u`.
    pub fn sample(&self, u: f64) -> usize {
        assert!(u > 0.0 && u < 1.0, "range draw needs u in (0,1), got {u}");
        if u <= self.lambda(0) {
            return 0;
        }
        // tail_sum(horizon) is zero, so cdf(hi) == 1 >= u
        let (mut lo, mut hi) = (1usize, self.table.horizon().max(1));
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.cdf(mid) >= u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// `sum_{k>=1} |B(k)| lambda(k)` as a certified interval. The part past the
    /// horizon is bounded by `beta * sum_{k>H} |B(k)| abs[k]`.
    pub fn weighted_lambda_sum(&self) -> (f64, Option<f64>) {
        let dim = self.table.dim();
        let lower: f64 = (1..=self.table.horizon()).map(|k| ball_volume(dim, k) * self.lambda(k)).sum();
        let upper = self.table.weighted_remainder().map(|r| lower + self.beta * r);
        (lower, upper)
    }
}
