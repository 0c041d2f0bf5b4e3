//! Loading models from TOML and inspecting the range law.
//!
//!     cargo run --example model_file -- crates/core/examples/models/exponential.toml

use std::path::PathBuf;

use perfect_gibbs::interaction::InteractionModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/models/exponential.toml"));
    let m = InteractionModel::load(&path)?;
    println!("{}", m.describe());
    println!("hash {}", m.model_hash());
    for o in m.reference_sites().iter().take(3) {
        let t = m.shell_table(o);
        println!(
            "site {o}: total strength {:.6}, horizon {}, remainder {:.1e}",
            m.total_strength(o),
            t.horizon(),
            t.remainder()
        );
        let mut cdf = 0.0;
        for k in 0..=6.min(t.horizon()) {
            cdf += m.lambda(o, k);
            println!("  lambda({k}) = {:.6e}  cdf {:.12}", m.lambda(o, k), cdf);
        }
    }
    let bad = "dimension = 1\nbeta = 0.1\n[potential]\nkind = \"pairwise-exponential\"\namplitude = 1.0\n";
    if let Err(e) = InteractionModel::from_toml(bad) {
        println!("rejected: {e}");
    }
    Ok(())
}
