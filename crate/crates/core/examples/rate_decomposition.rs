//! The flip rate as a mixture of finite-range update kernels: prints the
//! pieces for one configuration and the residual of the identity.
//!
//!     cargo run --example rate_decomposition

use perfect_gibbs::interaction::InteractionModel;
use perfect_gibbs::lattice::Site;
use perfect_gibbs::rates::{decomposition_check, flip_rate, flip_rate_truncated, update_prob, SpinWindow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.2)?;
    let o = Site::origin(1);
    // alternating blocks of two
    let sigma: SpinWindow =
        (-10..=10).map(|x: i32| (Site::new(&[x]), if x.rem_euclid(4) < 2 { 1 } else { -1 })).collect();
    println!("M = {:.6}", m.big_m(&o));
    for k in 0..=6 {
        let p = if m.lambda(&o, k) > 0.0 { update_prob(&m, &o, k, &sigma)? } else { f64::NAN };
        println!("k={k}  lambda {:.6e}  p^[k] {:.6}", m.lambda(&o, k), p);
    }
    for ell in [1, 2, 4, 8] {
        println!(
            "ell={ell}: c^[ell] {:.10}  residual {:.2e}",
            flip_rate_truncated(&m, &o, &sigma, ell)?,
            decomposition_check(&m, &o, &sigma, ell)?
        );
    }
    let full = flip_rate(&m, &o, &sigma, 10)?;
    println!("full rate in [{:.10}, {:.10}]", full.lo, full.hi);
    Ok(())
}
