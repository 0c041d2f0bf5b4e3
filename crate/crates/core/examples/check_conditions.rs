//! Summability, termination and uniqueness conditions for a family of models,
//! with gamma, the critical beta and the exact termination threshold.
//!
//!     cargo run --example check_conditions

use perfect_gibbs::interaction::{beta_critical, check_conditions, InteractionModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let models = [
        ("nearest neighbour, beta 0.05", InteractionModel::nearest_neighbor(1, 1.0, 0.05)?),
        ("nearest neighbour, beta 0.30", InteractionModel::nearest_neighbor(1, 1.0, 0.3)?),
        ("exponential kernel, beta 0.05", InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.05)?),
        ("power law |r|^-5, beta 0.01", InteractionModel::pairwise_power_law(1, 1.0, 5.0, 0.01)?),
        ("power law |r|^-1.5, beta 0.01", InteractionModel::pairwise_power_law(1, 1.0, 1.5, 0.01)?),
    ];
    for (name, m) in &models {
        let r = check_conditions(m, &m.reference_sites());
        println!("{name}");
        println!("  summability        {:?} ({:.6})", r.summability.status, r.summability.value);
        println!("  weighted           {:?}", r.weighted_summability.status);
        println!("  termination        {:?} (sum {:.6})", r.termination.status, r.termination.value);
        println!("  dobrushin          {:?} (r = {:.4})", r.dobrushin.status, r.r);
        match r.gamma {
            Some(g) => println!("  gamma              [{:.8}, {:.8}]", g.lower, g.upper),
            None => println!("  gamma              unavailable"),
        }
        if let Ok(bc) = beta_critical(m) {
            println!("  beta_c             {:.6}{}", bc.beta, if bc.found { "" } else { " (not found)" });
        }
        if let Some(t) = r.termination_threshold {
            println!("  termination beta   {t:.6}");
        }
    }
    Ok(())
}
