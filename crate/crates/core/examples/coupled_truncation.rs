//! Joint samples of an infinite-range measure and its range-L truncations:
//! how often does the spin at the origin differ, against the analytic bound?
//!
//!     cargo run --release --example coupled_truncation -- 100000

use perfect_gibbs::analysis::estimate_discrepancy;
use perfect_gibbs::interaction::InteractionModel;
use perfect_gibbs::lattice::Site;
use perfect_gibbs::sketch::DEFAULT_MAX_EVENTS;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replicas: u64 = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let m = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05)?;
    println!("{:>3} {:>10} {:>22} {:>10} {:>6}", "L", "P(X!=X^L)", "3-sigma Wilson", "bound", "pass");
    for level in [1, 2, 4, 8] {
        let e = estimate_discrepancy(&m, level, &Site::origin(1), replicas, 42, DEFAULT_MAX_EVENTS)?;
        println!(
            "{level:>3} {:>10.6} [{:>9.6}, {:>9.6}] {:>10.6} {:>6}",
            e.estimate(),
            e.wilson.0,
            e.wilson.1,
            e.bound,
            e.pass
        );
    }
    Ok(())
}
