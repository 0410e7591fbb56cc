//! Lexical conventions shared between object labels and utterance tokens.
//!
//! EMRE object labels follow the `ColorNoun1` pattern (`RedBlock1`, `Cup`).
//! Several modules need the noun and color a label carries: the lexicon seeds
//! head nouns from the inventory, relatum resolution matches parsed NPs
//! against entities, and scene construction assigns entity attributes.

/// Color terms recognized both as attributives and as label prefixes.
pub const COLOR_WORDS: &[&str] = &[
    "red", "green", "purple", "blue", "yellow", "orange", "black", "white", "brown", "pink",
    "gray", "grey",
];

/// Tokenize an utterance: lowercase, whitespace-split, strip edge punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// The head noun an object label denotes: `RedBlock1` -> `block`, `Cup` -> `cup`.
pub fn label_noun(label: &str) -> String {
    let base: String = label.chars().filter(|c| !c.is_ascii_digit()).collect();
    let base = base.to_lowercase();
    for color in COLOR_WORDS {
        if let Some(rest) = base.strip_prefix(color) {
            if !rest.is_empty() {
                return rest.to_string();
            }
        }
    }
    base
}

/// The color attribute an object label carries, if any: `RedBlock1` -> `red`.
pub fn label_color(label: &str) -> Option<String> {
    let base: String = label.chars().filter(|c| !c.is_ascii_digit()).collect();
    let base = base.to_lowercase();
    for color in COLOR_WORDS {
        if let Some(rest) = base.strip_prefix(color) {
            if !rest.is_empty() {
                return Some((*color).to_string());
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_split_into_color_and_noun() {
        assert_eq!(label_noun("RedBlock1"), "block");
        assert_eq!(label_color("RedBlock1"), Some("red".to_string()));
        assert_eq!(label_noun("Cup"), "cup");
        assert_eq!(label_color("Cup"), None);
        assert_eq!(label_noun("PurpleBlock2"), "block");
    }

    #[test]
    fn tokenize_strips_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("That red block, in front of the knife."),
            vec!["that", "red", "block", "in", "front", "of", "the", "knife"]
        );
        assert!(tokenize("   ").is_empty());
    }
}
