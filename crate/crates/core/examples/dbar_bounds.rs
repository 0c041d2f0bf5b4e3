//! Both upper bounds on the d-bar distance between a measure and its
//! truncation, as the truncation range grows.
//!
//!     cargo run --example dbar_bounds

use perfect_gibbs::analysis::dbar_bounds;
use perfect_gibbs::interaction::InteractionModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let models = [
        ("exponential, beta 0.05", InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05)?),
        ("power law 5, beta 0.01", InteractionModel::pairwise_power_law(1, 1.0, 5.0, 0.01)?),
        ("nearest neighbour, beta 0.6", InteractionModel::nearest_neighbor(1, 1.0, 0.6)?),
    ];
    let show = |x: Option<f64>| x.map_or("refused".to_string(), |v| format!("{v:.4e}"));
    for (name, m) in &models {
        println!("{name}");
        for level in [1, 2, 4, 8, 16] {
            let b = dbar_bounds(m, level)?;
            println!(
                "  L={level:<3} delta {:.4e}  bound1 {:>11}  bound2 {:>11}  (r = {:.4})",
                b.delta,
                show(b.bound1),
                show(b.bound2),
                b.r
            );
        }
    }
    Ok(())
}
