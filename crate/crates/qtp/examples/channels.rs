//! Build the five built-in noise channels, verify trace preservation,
//! and print the exact per-use measurement statistics of superdense
//! coding under each of them.
//!
//! ```bash
//! cargo run -p qtp --example channels
//! ```

use qtp::quantum::{sdc_outcome_distribution, Channel, ChannelKind, SymbolPair};

fn main() -> anyhow::Result<()> {
    let lambda = 0.2;
    for kind in ChannelKind::builtin() {
        let d = kind.dimension().unwrap();
        let ch = Channel::builtin(kind, lambda, d)?;
        println!("{kind} (d={d}, lambda={lambda})");
        println!("  kraus operators: {}", ch.kraus().len());
        println!("  completeness residual: {:.2e}", ch.completeness_residual());

        let msg = SymbolPair::new(1 % d, 0);
        let dist = sdc_outcome_distribution(&ch, msg)?;
        println!("  outcomes for message (z={}, x={}):", msg.z, msg.x);
        for (outcome, p) in dist.support() {
            println!("    (z'={}, x'={})  p = {:.4}", outcome.z, outcome.x, p);
        }
        println!();
    }

    // A noiseless channel is a point mass on the encoded message.
    let ch = Channel::builtin(ChannelKind::Depolarizing, 0.0, 2)?;
    let dist = sdc_outcome_distribution(&ch, SymbolPair::new(1, 1))?;
    println!(
        "depolarizing at lambda=0: p(1,1) = {} (point mass)",
        dist.prob(1, 1)
    );
    Ok(())
}
