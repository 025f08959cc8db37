//! Dictionary-based word repair: corrupted words are replaced by the
//! same-length dictionary word with the smallest summed bitwise Hamming
//! distance between 8-bit character codes.
//!
//! ```bash
//! cargo run -p qtp --example word_repair
//! ```

use qtp::text::{Stage, TextStage};
use qtp::word_repair::{repair_text, repair_word, word_distance, Dictionary};

fn main() -> anyhow::Result<()> {
    let dict = Dictionary::from_words([
        "the", "cat", "car", "cap", "dog", "sat", "mat", "on", "quantum", "channel",
    ])?;

    println!("distances to the corrupted token \"cau\":");
    for cand in ["cat", "car", "cap"] {
        println!("  {cand}: {} bits", word_distance(cand, "cau")?);
    }
    let (fixed, flag) = repair_word("cau", &dict);
    println!("repair(\"cau\") -> {fixed:?} ({flag:?})\n");

    // Whole-sentence repair keeps capitalization and punctuation.
    let received = TextStage::parse(Stage::Received, "The cau sat on the mat!");
    let (repaired, flags) = repair_text(&received, &dict)?;
    println!("received: {}", received.render());
    println!("repaired: {}", repaired.render());
    println!("flags:    {flags:?}");

    // Words with no same-length candidate pass through untouched.
    let (kept, flag) = repair_word("zzzzzzzzzz", &dict);
    println!("\nno 10-letter candidates: {kept:?} stays ({flag:?})");
    Ok(())
}
