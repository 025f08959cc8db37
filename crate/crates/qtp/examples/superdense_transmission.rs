//! Send a passage through noisy qubit superdense coding and look at the
//! raw damage: the received text next to the original, with bit, word,
//! and sentence error rates. No repair happens here — this is the
//! baseline the post-decoding stages have to beat.
//!
//! ```bash
//! cargo run -p qtp --example superdense_transmission
//! ```

use qtp::codec::{channel_uses, normalize_display, TransmitMode};
use qtp::metrics::{ber, wer};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::text::{Stage, TextStage};
use qtp::transmit::{transmit_text, Link};

const PASSAGE: &str = "Imagination is more important than knowledge. For knowledge is \
limited, whereas imagination embraces the entire world, stimulating progress, giving \
birth to evolution.";

fn main() -> anyhow::Result<()> {
    let lambda = 0.01;
    let config = ChannelConfig::new(ChannelKind::BitFlip, lambda, 2);
    let link = Link::resolve(&config, TransmitMode::Qubit)?;
    let streams = SeedStreams::new(2025);

    let ideal = TextStage::parse(Stage::Ideal, PASSAGE);
    println!(
        "payload: {} chars, {} qubit channel uses\n",
        ideal.char_len(),
        channel_uses(ideal.char_len(), TransmitMode::Qubit)
    );

    for trial in 0..3u32 {
        let tx = transmit_text(&ideal, &link, &mut streams.stream(StreamPurpose::Transmit, trial))?;
        println!("trial {trial}");
        println!("  sent:     {}", ideal.render());
        println!("  received: {}", normalize_display(&tx.received.render()));
        println!(
            "  ber {:.4}  wer {:.4}",
            ber(&tx.sent_bits, &tx.received_bits)?,
            wer(&ideal, &tx.received)?,
        );
        println!();
    }
    Ok(())
}
