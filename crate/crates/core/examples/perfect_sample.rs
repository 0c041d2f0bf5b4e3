//! Perfect samples of a three-site window of the nearest-neighbour chain,
//! compared with the transfer-matrix correlations.
//!
//!     cargo run --release --example perfect_sample -- 100000

use perfect_gibbs::assign::sample_replicas;
use perfect_gibbs::interaction::InteractionModel;
use perfect_gibbs::lattice::{Site, SiteSet};
use perfect_gibbs::oracle::transfer_matrix_1d;
use perfect_gibbs::sketch::{stop_statistics, DEFAULT_MAX_EVENTS};
use perfect_gibbs::stats::Moments;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replicas: u64 = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let beta = 0.05;
    let m = InteractionModel::nearest_neighbor(1, 1.0, beta)?;
    let site = |x| Site::new(&[x]);
    let window: SiteSet = (0..3).map(site).collect();

    let samples = sample_replicas(&m, &window, replicas, 1, DEFAULT_MAX_EVENTS)?;
    for r in 1..=2 {
        let c = Moments::of(
            samples.iter().map(|(s, _)| (s.spins.get(&site(0)).unwrap() * s.spins.get(&site(r)).unwrap()) as f64),
        );
        let exact = transfer_matrix_1d(beta, 1.0, r as u32);
        println!(
            "E[X(0)X({r})] = {:.5} +- {:.5}   exact {exact:.6}   z = {:+.2}",
            c.mean,
            c.se(),
            (c.mean - exact) / c.se()
        );
    }
    let stats = stop_statistics(samples.iter().map(|(_, rec)| rec), &[1.0, 2.0, 4.0]);
    println!("mean N_STOP {:.3} +- {:.3}, mean T_STOP {:.3}", stats.mean_n_stop, stats.se_n_stop, stats.mean_t_stop);
    Ok(())
}
