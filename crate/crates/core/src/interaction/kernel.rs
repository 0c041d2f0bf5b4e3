//! Translation-invariant pairwise kernels `J(0, r)` that depend on `||r||_1` only.

use serde::{Deserialize, Serialize};

use crate::lattice::shell_volume;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelShape {
    /// `J(0, r) = a` for `||r|| = 1`, zero otherwise.
    NearestNeighbor,
    /// `J(0, r) = a exp(-decay ||r||)`.
    Exponential { decay: f64 },
    /// `J(0, r) = a ||r||^-exponent`.
    PowerLaw { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseKernel {
    pub dim: usize,
    pub amplitude: f64,
    pub shape: KernelShape,
}

/// Upper bound on `m^-q` summed over `m > n`, `q > 1`.
fn power_tail(n: usize, q: f64) -> f64 {
    if n == 0 {
        1.0 + 1.0 / (q - 1.0)
    } else {
        (n as f64).powf(1.0 - q) / (q - 1.0)
    }
}

/// Upper bound on `m^e exp(-c m)` summed over `m > n`, from a geometric ratio
/// bound valid for every `m >= n + 1`. `None` when the ratio is not below one yet.
fn poly_exp_tail(n: usize, e: f64, c: f64) -> Option<f64> {
    let first = (n + 1) as f64;
    let ratio = ((first + 1.0) / first).powf(e) * (-c).exp();
    if ratio >= 1.0 {
        return None;
    }
    Some(first.powf(e) * (-c * first).exp() / (1.0 - ratio))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

impl PairwiseKernel {
    pub fn coupling_at(&self, dist: usize) -> f64 {
        if dist == 0 {
            return 0.0;
        }
        match self.shape {
            KernelShape::NearestNeighbor => {
                if dist == 1 {
                    self.amplitude
                } else {
                    0.0
                }
            }
            KernelShape::Exponential { decay } => self.amplitude * (-decay * dist as f64).exp(),
            KernelShape::PowerLaw { exponent } => self.amplitude * (dist as f64).powf(-exponent),
        }
    }

    pub fn range(&self) -> Option<usize> {
        match self.shape {
            KernelShape::NearestNeighbor => Some(1),
            _ if self.amplitude == 0.0 => Some(0),
            _ => None,
        }
    }

    /// Absolute strength of the bonds from the origin to shell `k`.
    pub fn shell_strength(&self, k: usize) -> f64 {
        shell_volume(self.dim, k) * self.coupling_at(k).abs()
    }

    /// Whether `sum_k |B(k)| * shell_strength(k)` is known to diverge.
    pub fn weighted_sum_diverges(&self) -> bool {
        match self.shape {
            KernelShape::PowerLaw { exponent } => self.amplitude != 0.0 && exponent <= 2.0 * self.dim as f64,
            _ => false,
        }
    }

    /// Certified upper bound on `sum_{m > n} |B(m)|^ball_power * shell_strength(m)`.
    /// `None` if no bound is available at this `n`.
    ///
    /// Shells are bounded by `2^d C(m+d-1, d-1) <= c_s m^(d-1)` and balls by
    /// `(3m)^d`.
    pub fn tail_bound(&self, n: usize, ball_power: u32) -> Option<f64> {
        if let Some(r) = self.range() {
            if n >= r {
                return Some(0.0);
            }
        }
        let d = self.dim;
        let a = self.amplitude.abs();
        let c_shell = 2f64.powi(d as i32) * (d as f64).powi(d as i32 - 1) / factorial(d - 1);
        let p = ball_power as i32;
        let factor = c_shell * 3f64.powi(d as i32 * p);
        let power = (d - 1) as f64 + (d as i32 * p) as f64;
        match self.shape {
            KernelShape::NearestNeighbor => {
                // n == 0 here: only the unit shell remains
                let w = ((2 * d + 1) as f64).powi(p);
                Some(w * self.shell_strength(1))
            }
            KernelShape::Exponential { decay } => poly_exp_tail(n, power, decay).map(|t| factor * a * t),
            KernelShape::PowerLaw { exponent } => {
                let q = exponent - power;
                if q <= 1.0 {
                    None
                } else {
                    Some(factor * a * power_tail(n, q))
                }
            }
        }
    }

    /// Smallest horizon `n` (a power of two, at least 16) whose unweighted tail
    /// bound is `<= tol`, capped at `max_horizon`.
    pub fn horizon(&self, tol: f64, max_horizon: usize) -> usize {
        if let Some(r) = self.range() {
            return r;
        }
        let mut n = 16usize;
        while n < max_horizon {
            if let Some(b) = self.tail_bound(n, 0) {
                if b <= tol {
                    return n;
                }
            }
            n *= 2;
        }
        max_horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tail(k: &PairwiseKernel, n: usize, p: u32, upto: usize) -> f64 {
        (n + 1..=upto).map(|m| crate::lattice::ball_volume(k.dim, m).powi(p as i32) * k.shell_strength(m)).sum()
    }

    #[test]
    fn couplings() {
        let nn = PairwiseKernel { dim: 2, amplitude: 1.5, shape: KernelShape::NearestNeighbor };
        assert_eq!(nn.coupling_at(1), 1.5);
        assert_eq!(nn.coupling_at(2), 0.0);
        assert_eq!(nn.shell_strength(1), 6.0);
        let e = PairwiseKernel { dim: 1, amplitude: 1.0, shape: KernelShape::Exponential { decay: 1.0 } };
        assert!((e.coupling_at(2) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tail_bounds_dominate_partial_sums() {
        let kernels = [
            PairwiseKernel { dim: 1, amplitude: 1.0, shape: KernelShape::Exponential { decay: 1.0 } },
            PairwiseKernel { dim: 2, amplitude: 0.3, shape: KernelShape::Exponential { decay: 0.7 } },
            PairwiseKernel { dim: 3, amplitude: 0.1, shape: KernelShape::Exponential { decay: 2.0 } },
            PairwiseKernel { dim: 1, amplitude: 1.0, shape: KernelShape::PowerLaw { exponent: 5.0 } },
            PairwiseKernel { dim: 2, amplitude: 1.0, shape: KernelShape::PowerLaw { exponent: 6.5 } },
        ];
        for k in &kernels {
            for n in [4usize, 16, 64] {
                for p in 0..=2 {
                    if let Some(b) = k.tail_bound(n, p) {
                        let partial = brute_tail(k, n, p, 4000);
                        assert!(partial <= b * (1.0 + 1e-12), "{k:?} n={n} p={p}: {partial} > {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn power_law_convergence_thresholds() {
        let slow = PairwiseKernel { dim: 1, amplitude: 1.0, shape: KernelShape::PowerLaw { exponent: 1.8 } };
        assert!(slow.weighted_sum_diverges());
        assert!(slow.tail_bound(10, 1).is_none());
        let fast = PairwiseKernel { dim: 1, amplitude: 1.0, shape: KernelShape::PowerLaw { exponent: 5.0 } };
        assert!(!fast.weighted_sum_diverges());
        assert!(fast.tail_bound(10, 1).is_some());
    }

    #[test]
    fn horizon_meets_tolerance() {
        let e = PairwiseKernel { dim: 1, amplitude: 1.0, shape: KernelShape::Exponential { decay: 1.0 } };
        let h = e.horizon(1e-18, 1 << 20);
        assert!(e.tail_bound(h, 0).unwrap() <= 1e-18);
        let nn = PairwiseKernel { dim: 3, amplitude: 1.0, shape: KernelShape::NearestNeighbor };
        assert_eq!(nn.horizon(1e-18, 1 << 20), 1);
        assert_eq!(nn.tail_bound(1, 1), Some(0.0));
    }
}
