//! One backward-sketch run: the event record, its replay, and the forward
//! pass that turns it into spins.
//!
//!     cargo run --example sketch_record

use perfect_gibbs::assign::run_forward;
use perfect_gibbs::interaction::InteractionModel;
use perfect_gibbs::lattice::{Site, SiteSet};
use perfect_gibbs::sketch::{run_backward, write_record_jsonl, RecordHeader, DEFAULT_MAX_EVENTS};
use perfect_gibbs::streams::{Lane, StreamKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = InteractionModel::pairwise_exponential(1, 1.0, 1.0, 0.1)?;
    let start: SiteSet = [0, 3].iter().map(|x| Site::new(&[*x])).collect();
    let key = StreamKey::new(2024, 0);
    let record = run_backward(&m, &start, key, DEFAULT_MAX_EVENTS)?;
    for (e, c) in record.events.iter().zip(record.replay()?.iter().skip(1)) {
        println!("n={:<3} t={:.4} site {:<5} k={}  |C|={}", e.n, e.t, e.site.to_string(), e.k, c.len());
    }
    let spins = run_forward(&m, &record, key, Lane::Forward)?;
    for (s, v) in spins.iter() {
        println!("X{s} = {v:+}");
    }
    let header = RecordHeader {
        seed: key.seed,
        replica: key.replica,
        model_hash: m.model_hash(),
        start,
        level: None,
        process: "full".into(),
    };
    println!("--- JSON lines ---");
    write_record_jsonl(&mut std::io::stdout(), &header, &record)?;
    Ok(())
}
