//! Checks the sampler against exact enumeration: conditional frequencies at a
//! site given its surroundings, for a three-spin interaction on Z.
//!
//!     cargo run --release --example exact_oracle

use perfect_gibbs::assign::sample_replicas;
use perfect_gibbs::interaction::{check_conditions, InteractionModel, Term};
use perfect_gibbs::lattice::{ball, Site};
use perfect_gibbs::oracle::conditional_consistency;
use perfect_gibbs::sketch::DEFAULT_MAX_EVENTS;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sites = vec![Site::new(&[0]), Site::new(&[1]), Site::new(&[2])];
    let m = InteractionModel::explicit(1, vec![Term { sites, coupling: 1.0 }], true, 0.05)?;
    let o = Site::origin(1);
    let cond = check_conditions(&m, &m.reference_sites());
    println!("termination sum {:.4} ({:?})", cond.termination.value, cond.termination.status);
    let radius = m.range().unwrap_or(1);
    let window = ball(&o, radius)?;
    let samples = sample_replicas(&m, &window, 40_000, 5, DEFAULT_MAX_EVENTS)?;
    let report = conditional_consistency(samples.iter().map(|(s, _)| &s.spins), &m, &o, radius, 4.0)?;
    for b in report.bins.iter().filter(|b| !b.flagged) {
        println!(
            "{:?}  n={:<5} P(+) = {:.4}  exact {:.4}  z {:+.2}",
            b.annulus, b.count, b.empirical, b.predicted, b.z
        );
    }
    println!("max |z| = {:.2}: {}", report.worst_abs_z, if report.pass { "consistent" } else { "INCONSISTENT" });
    Ok(())
}
