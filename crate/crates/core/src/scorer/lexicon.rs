//! Built-in word lists for the rule-based scorer.
//!
//! These are intentionally small: the rule-based backend is a
//! hand-checkable surrogate for a judge model, not a fidelity claim about
//! review language.

/// Product aspects recognized as coverage targets.
pub const ASPECT_WORDS: &[&str] = &[
    "battery",
    "button",
    "cable",
    "camera",
    "charge",
    "color",
    "comfort",
    "connectivity",
    "delivery",
    "design",
    "display",
    "durability",
    "fabric",
    "fit",
    "grip",
    "handle",
    "installation",
    "keyboard",
    "lens",
    "material",
    "packaging",
    "performance",
    "price",
    "quality",
    "screen",
    "shipping",
    "size",
    "smell",
    "sound",
    "speaker",
    "speed",
    "storage",
    "strap",
    "style",
    "taste",
    "texture",
    "warranty",
    "weight",
    "zipper",
];

pub const POSITIVE_WORDS: &[&str] = &[
    "amazing",
    "awesome",
    "beautiful",
    "best",
    "comfortable",
    "crisp",
    "durable",
    "easy",
    "enjoy",
    "excellent",
    "fantastic",
    "fast",
    "good",
    "great",
    "happy",
    "impressive",
    "like",
    "liked",
    "love",
    "loved",
    "nice",
    "perfect",
    "pleasant",
    "pleased",
    "quick",
    "recommend",
    "reliable",
    "satisfied",
    "smooth",
    "solid",
    "sturdy",
    "vibrant",
    "wonderful",
    "worth",
];

pub const NEGATIVE_WORDS: &[&str] = &[
    "annoying",
    "awful",
    "bad",
    "broken",
    "cheap",
    "cracked",
    "defective",
    "disappointed",
    "disappointing",
    "dislike",
    "faulty",
    "flimsy",
    "fragile",
    "hate",
    "hated",
    "heavy",
    "horrible",
    "leak",
    "leaks",
    "noisy",
    "poor",
    "refund",
    "return",
    "returned",
    "scratch",
    "scratched",
    "slow",
    "stiff",
    "terrible",
    "uncomfortable",
    "unhappy",
    "unreliable",
    "useless",
    "waste",
    "weak",
    "worst",
];

/// Function words excluded from content-word comparisons.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "are", "as", "at", "be", "been",
    "before", "being", "between", "both", "but", "by", "can", "could", "did", "do", "does", "done",
    "down", "each", "few", "for", "from", "had", "has", "have", "having", "he", "her", "here",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "just", "may", "me", "might", "more",
    "most", "must", "my", "no", "not", "of", "off", "on", "only", "or", "our", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "too", "under", "up", "us", "very",
    "was", "we", "were", "what", "when", "where", "which", "who", "whom", "why", "will", "with",
    "would", "you", "your",
];
