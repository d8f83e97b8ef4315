//! Whitespace tokenization with a token budget.

/// Reserved token strings.
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Splits on Unicode whitespace, lowercases ASCII, and truncates to a
/// maximum token count. The pipeline is tokenizer-agnostic behind this
/// function; swap in a segmenter here for languages without spaces.
#[derive(Debug, Clone, Copy)]
pub struct Tokenizer {
    pub max_tokens: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { max_tokens: 400 }
    }
}

impl Tokenizer {
    pub fn new(max_tokens: usize) -> Self {
        Tokenizer {
            max_tokens: max_tokens.max(1),
        }
    }

    /// Empty input yields a single `<unk>` so every sample stays encodable.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let tokens: Vec<String> = text
            .split_whitespace()
            .take(self.max_tokens)
            .map(|t| t.to_ascii_lowercase())
            .collect();
        if tokens.is_empty() {
            vec![UNK_TOKEN.to_string()]
        } else {
            tokens
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        let tok = Tokenizer::default();
        assert_eq!(
            tok.tokenize("Stole THREE phones"),
            vec!["stole", "three", "phones"]
        );
    }

    #[test]
    fn empty_input_becomes_unk() {
        let tok = Tokenizer::default();
        assert_eq!(tok.tokenize(""), vec![UNK_TOKEN]);
        assert_eq!(tok.tokenize("   \t\n"), vec![UNK_TOKEN]);
    }

    #[test]
    fn truncates_to_budget() {
        let tok = Tokenizer::new(400);
        let text = (0..500).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let tokens = tok.tokenize(&text);
        assert_eq!(tokens.len(), 400);
        assert_eq!(tokens[399], "w399");
    }

    #[test]
    fn handles_unicode_whitespace() {
        let tok = Tokenizer::default();
        // U+3000 ideographic space
        assert_eq!(tok.tokenize("盗窃\u{3000}抢劫"), vec!["盗窃", "抢劫"]);
    }
}
