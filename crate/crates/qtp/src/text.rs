//! Text snapshots along the pipeline.
//!
//! A `TextStage` stores a sentence as words plus the whitespace layout
//! between them, so the surface string can always be reproduced exactly.
//! Corrupted bytes decode to chars U+0000–U+00FF one-to-one (Latin-1), so
//! arbitrary 8-bit values survive inside words until display time.

use serde::{Deserialize, Serialize};

/// Which pipeline snapshot a text belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// The ideal text the sender intends to transmit.
    Ideal,
    /// Decoded straight from superdense coding, noise and all.
    Received,
    /// After dictionary-based word repair.
    WordRepaired,
    /// The correction network's output.
    Corrected,
    /// After confidence fusion of word-repaired and corrected texts.
    Fused,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Ideal => "ideal",
            Stage::Received => "received",
            Stage::WordRepaired => "word_repaired",
            Stage::Corrected => "corrected",
            Stage::Fused => "fused",
        }
    }
}

/// A sentence at one pipeline stage: `n` words and `n + 1` separators,
/// rendering as `sep[0] w[0] sep[1] w[1] … w[n-1] sep[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStage {
    stage: Stage,
    words: Vec<String>,
    separators: Vec<String>,
}

impl TextStage {
    /// Split a surface string into whitespace-delimited words, keeping
    /// the exact separator layout.
    pub fn parse(stage: Stage, surface: &str) -> TextStage {
        let mut words = Vec::new();
        let mut separators = Vec::new();
        let mut sep = String::new();
        let mut word = String::new();
        for ch in surface.chars() {
            if ch.is_whitespace() {
                if !word.is_empty() {
                    words.push(std::mem::take(&mut word));
                    separators.push(std::mem::take(&mut sep));
                }
                sep.push(ch);
            } else {
                word.push(ch);
            }
        }
        if !word.is_empty() {
            words.push(word);
            separators.push(std::mem::take(&mut sep));
            separators.push(String::new());
        } else {
            separators.push(sep);
        }
        // separators stored as [before w0, before w1, …, after last word]
        TextStage {
            stage,
            words,
            separators,
        }
    }

    /// Build from explicit parts. `separators.len()` must be
    /// `words.len() + 1`.
    pub fn from_parts(stage: Stage, words: Vec<String>, separators: Vec<String>) -> TextStage {
        assert_eq!(separators.len(), words.len() + 1, "separator count");
        TextStage {
            stage,
            words,
            separators,
        }
    }

    /// Same layout, new words, new stage tag.
    pub fn with_words(&self, stage: Stage, words: Vec<String>) -> TextStage {
        assert_eq!(words.len(), self.words.len(), "word count must be preserved");
        TextStage {
            stage,
            words,
            separators: self.separators.clone(),
        }
    }

    /// Re-interpret a decoded character stream using this text's layout:
    /// the k-th word of the result takes exactly as many chars as the
    /// k-th word here, and likewise for separators. Returns `None` when
    /// the stream length does not match the layout.
    pub fn overlay(&self, stage: Stage, decoded: &str) -> Option<TextStage> {
        let chars: Vec<char> = decoded.chars().collect();
        if chars.len() != self.char_len() {
            return None;
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let s: String = chars[pos..pos + n].iter().collect();
            pos += n;
            s
        };
        let mut words = Vec::with_capacity(self.words.len());
        let mut separators = Vec::with_capacity(self.separators.len());
        separators.push(take(self.separators[0].chars().count()));
        for (i, w) in self.words.iter().enumerate() {
            words.push(take(w.chars().count()));
            separators.push(take(self.separators[i + 1].chars().count()));
        }
        Some(TextStage {
            stage,
            words,
            separators,
        })
    }

    /// The unit of words `[start, end)` as its own text (separators at
    /// the cut points become the outer separators of the unit).
    pub fn slice_words(&self, stage: Stage, start: usize, end: usize) -> TextStage {
        assert!(start <= end && end <= self.words.len());
        let words = self.words[start..end].to_vec();
        let mut separators = Vec::with_capacity(words.len() + 1);
        separators.push(if start == 0 {
            self.separators[0].clone()
        } else {
            // interior cut: the unit starts flush
            String::new()
        });
        for i in start..end {
            if i + 1 < end {
                separators.push(self.separators[i + 1].clone());
            }
        }
        separators.push(if end == self.words.len() {
            self.separators[end].clone()
        } else {
            String::new()
        });
        TextStage {
            stage,
            words,
            separators,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.separators[0]);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            out.push_str(&self.separators[i + 1]);
        }
        out
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn separators(&self) -> &[String] {
        &self.separators
    }

    pub fn char_len(&self) -> usize {
        self.words
            .iter()
            .map(|w| w.chars().count())
            .sum::<usize>()
            + self
                .separators
                .iter()
                .map(|s| s.chars().count())
                .sum::<usize>()
    }

    /// Lexical cores of all words (decorations stripped, lowercased).
    pub fn cores(&self) -> Vec<String> {
        self.words.iter().map(|w| lookup_form(core_of(w))).collect()
    }
}

/// Characters treated as detachable decoration around a word core.
pub const DECORATION_CHARS: &[char] = &['.', ',', ';', ':', '\'', '"', '!', '?', '-'];

fn is_decoration(ch: char) -> bool {
    DECORATION_CHARS.contains(&ch)
}

/// Split a surface token into (leading decoration, core, trailing
/// decoration). Corrupted bytes outside the decoration set stay in the
/// core, where the repair distance can still see their bit patterns.
pub fn split_decorations(token: &str) -> (&str, &str, &str) {
    let start = token
        .char_indices()
        .find(|(_, c)| !is_decoration(*c))
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let rest = &token[start..];
    let end = rest
        .char_indices()
        .rev()
        .find(|(_, c)| !is_decoration(*c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    (&token[..start], &rest[..end], &rest[end..])
}

/// The core of a token with decorations stripped.
pub fn core_of(token: &str) -> &str {
    split_decorations(token).1
}

/// Lowercase ASCII letters only; other chars (including corrupted bytes)
/// keep their exact code.
pub fn lookup_form(core: &str) -> String {
    core.chars()
        .map(|c| {
            if c.is_ascii_uppercase() {
                c.to_ascii_lowercase()
            } else {
                c
            }
        })
        .collect()
}

/// Give `replacement` the capitalization pattern of `original`: an
/// initial capital is preserved, everything else is left as the
/// replacement has it.
pub fn match_capitalization(original: &str, replacement: &str) -> String {
    let starts_upper = original.chars().next().is_some_and(|c| c.is_ascii_uppercase());
    if starts_upper {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Rebuild a surface token from a repaired core, inheriting the original
/// token's decorations and capitalization.
pub fn redecorate(original_token: &str, new_core: &str) -> String {
    let (prefix, core, suffix) = split_decorations(original_token);
    format!(
        "{prefix}{}{suffix}",
        match_capitalization(core, new_core)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_roundtrip_preserves_layout() {
        for s in [
            "Hello,  world!",
            "  leading and trailing  ",
            "one",
            "",
            "a b\tc\nd",
        ] {
            let t = TextStage::parse(Stage::Ideal, s);
            assert_eq!(t.render(), s, "layout lost for {s:?}");
        }
    }

    #[test]
    fn parse_counts_words() {
        let t = TextStage::parse(Stage::Ideal, "The cat sat.");
        assert_eq!(t.words(), &["The", "cat", "sat."]);
        assert_eq!(t.word_count(), 3);
    }

    #[test]
    fn overlay_keeps_word_boundaries() {
        let ideal = TextStage::parse(Stage::Ideal, "ab cd");
        // A corrupted space arrives as '!': word count must not change.
        let rx = ideal.overlay(Stage::Received, "ab!cd").unwrap();
        assert_eq!(rx.word_count(), 2);
        assert_eq!(rx.words(), &["ab", "cd"]);
        assert_eq!(rx.separators()[1], "!");
        assert_eq!(rx.render(), "ab!cd");
    }

    #[test]
    fn overlay_rejects_length_mismatch() {
        let ideal = TextStage::parse(Stage::Ideal, "ab cd");
        assert!(ideal.overlay(Stage::Received, "abcd").is_none());
    }

    #[test]
    fn slice_words_partitions_surface() {
        let t = TextStage::parse(Stage::Ideal, "a b c d e f");
        let left = t.slice_words(Stage::Ideal, 0, 3);
        let right = t.slice_words(Stage::Ideal, 3, 6);
        assert_eq!(left.words(), &["a", "b", "c"]);
        assert_eq!(right.words(), &["d", "e", "f"]);
        assert_eq!(left.render(), "a b c");
        assert_eq!(right.render(), "d e f");
    }

    #[test]
    fn decorations_split_and_rebuild() {
        let (p, c, s) = split_decorations("\"Cat,\"");
        assert_eq!((p, c, s), ("\"", "Cat", ",\""));
        assert_eq!(redecorate("\"Cat,\"", "car"), "\"Car,\"");
        assert_eq!(redecorate("dog", "fox"), "fox");
        assert_eq!(core_of("---"), "");
    }

    #[test]
    fn lookup_form_only_lowercases_ascii_letters() {
        assert_eq!(lookup_form("CaT"), "cat");
        assert_eq!(lookup_form("C\u{c3}T"), "c\u{c3}t");
    }
}
