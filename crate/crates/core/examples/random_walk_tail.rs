//! The comparison random walk: Lundberg exponent, simulated tail of its
//! maximum, and the heavy-tail expression for a power-law kernel.
//!
//!     cargo run --release --example random_walk_tail

use perfect_gibbs::analysis::{
    estimate_max_tail, integrated_tail, korshunov_item1, korshunov_item1_by_parts, rw_exponent,
};
use perfect_gibbs::interaction::InteractionModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = InteractionModel::nearest_neighbor(1, 1.0, 0.05)?;
    let (rw, rho) = rw_exponent(&m)?;
    println!("nearest neighbour: gamma {:.5}, rho {rho:.6}", rw.gamma());
    let thresholds: Vec<i64> = (0..=10).collect();
    let tail = estimate_max_tail(&rw, &thresholds, 200_000, 1e-6, 3, None)?;
    for (i, t) in thresholds.iter().enumerate() {
        let p = tail.proportion(i);
        println!("  P(M >= {t:>2}) = {:.5}   e^(-rho m) = {:.5}", p.estimate(), (-rho * *t as f64).exp());
    }
    if let Some(s) = tail.log_slope(2, 10) {
        println!("  log-slope {s:.4} vs -rho {:.4}", -rho);
    }

    let p = InteractionModel::pairwise_power_law(1, 1.0, 5.0, 0.01)?;
    let (_, rho0) = rw_exponent(&p)?;
    println!("power law |r|^-5: rho = {rho0}");
    for n in [1, 2, 3, 5, 8] {
        println!(
            "  n={n}: item-1 {:.6e} (by parts {:.6e}), integrated tail {:.6e}",
            korshunov_item1(&p, n)?,
            korshunov_item1_by_parts(&p, n)?,
            integrated_tail(&p, n)?
        );
    }
    Ok(())
}
