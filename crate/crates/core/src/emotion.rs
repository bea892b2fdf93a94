//! Lexicon emotion scorer used when a request carries no explicit emotion.

use crate::text::tokenize;

const STRONG: &[&str] = &[
    "adore", "afraid", "angry", "cry", "cried", "despise", "furious", "grief", "hate", "heartbroken",
    "love", "loved", "miss", "terrified", "thrilled",
];
const MILD: &[&str] = &[
    "beautiful", "calm", "enjoy", "fond", "glad", "happy", "like", "lonely", "nervous", "peaceful",
    "proud", "sad", "scared", "sorry", "warm", "worried",
];

#[derive(Debug, Clone, Copy)]
pub struct EmotionScorer {
    pub baseline: f64,
}

impl Default for EmotionScorer {
    fn default() -> Self {
        Self { baseline: 0.2 }
    }
}

impl EmotionScorer {
    /// Intensity in `[0, 1]`: baseline plus 0.3 per strong word, 0.15 per
    /// mild word and 0.1 per exclamation mark.
    pub fn score(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let strong = tokens.iter().filter(|t| STRONG.contains(&t.as_str())).count();
        let mild = tokens.iter().filter(|t| MILD.contains(&t.as_str())).count();
        let bangs = text.chars().filter(|c| *c == '!').count().min(3);
        let raw = self.baseline + 0.3 * strong as f64 + 0.15 * mild as f64 + 0.1 * bangs as f64;
        raw.clamp(0.0, 1.0)
    }
}
