//! Deterministic rule-based feature scoring.
//!
//! Every rule returns a fraction in `[0, 1]` which the scorer maps affinely
//! into the feature's schema bounds; on the default 0-5 schema the rules
//! read as "5 x fraction". Empty reference sets score as vacuously full
//! (fraction 1): a summary cannot miss aspects that no review mentions.

use super::lexicon::{ASPECT_WORDS, NEGATIVE_WORDS, POSITIVE_WORDS, STOPWORDS};
use std::collections::BTreeSet;

/// Word-length target for the conciseness rule.
pub const CONCISENESS_TARGET_WORDS: usize = 80;

/// Lowercased alphanumeric tokens in text order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_content_word(token: &str) -> bool {
    token.len() >= 3 && !STOPWORDS.contains(&token)
}

fn content_words(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| is_content_word(t))
        .collect()
}

fn aspects_in(text: &str) -> BTreeSet<&'static str> {
    let tokens: BTreeSet<String> = tokenize(text).into_iter().collect();
    ASPECT_WORDS
        .iter()
        .copied()
        .filter(|a| tokens.contains(*a))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Polarity {
    Negative,
    Positive,
}

/// Signed (aspect, polarity) pairs: per sentence, every aspect keyword is
/// paired with each sentiment polarity present in that sentence.
fn opinion_pairs(text: &str) -> BTreeSet<(&'static str, Polarity)> {
    let mut pairs = BTreeSet::new();
    for sentence in text.split(['.', '!', '?', ';']) {
        let tokens: BTreeSet<String> = tokenize(sentence).into_iter().collect();
        let has_positive = POSITIVE_WORDS.iter().any(|w| tokens.contains(*w));
        let has_negative = NEGATIVE_WORDS.iter().any(|w| tokens.contains(*w));
        if !has_positive && !has_negative {
            continue;
        }
        for aspect in ASPECT_WORDS.iter().copied() {
            if !tokens.contains(aspect) {
                continue;
            }
            if has_positive {
                pairs.insert((aspect, Polarity::Positive));
            }
            if has_negative {
                pairs.insert((aspect, Polarity::Negative));
            }
        }
    }
    pairs
}

/// Fraction of context aspect keywords that the candidate mentions.
pub fn aspect_coverage(context: &str, candidate: &str) -> f64 {
    let wanted = aspects_in(context);
    if wanted.is_empty() {
        return 1.0;
    }
    let have = aspects_in(candidate);
    wanted.intersection(&have).count() as f64 / wanted.len() as f64
}

/// Fraction of the candidate's stated opinions that the context supports
/// (same aspect with the same polarity). No stated opinions is vacuously
/// faithful.
pub fn opinion_faithfulness(context: &str, candidate: &str) -> f64 {
    let stated = opinion_pairs(candidate);
    if stated.is_empty() {
        return 1.0;
    }
    let supported = opinion_pairs(context);
    stated.intersection(&supported).count() as f64 / stated.len() as f64
}

/// Fraction of the context's opinions that the candidate picks up.
pub fn opinion_coverage(context: &str, candidate: &str) -> f64 {
    let wanted = opinion_pairs(context);
    if wanted.is_empty() {
        return 1.0;
    }
    let have = opinion_pairs(candidate);
    wanted.intersection(&have).count() as f64 / wanted.len() as f64
}

/// `clip(1 - |len - target| / target, 0, 1)` over the candidate word count.
pub fn conciseness(candidate: &str) -> f64 {
    let len = tokenize(candidate).len() as f64;
    let target = CONCISENESS_TARGET_WORDS as f64;
    (1.0 - (len - target).abs() / target).clamp(0.0, 1.0)
}

/// Content-word overlap (Jaccard) between candidate and context.
pub fn relevance(context: &str, candidate: &str) -> f64 {
    let ctx = content_words(context);
    let cand = content_words(candidate);
    let union = ctx.union(&cand).count();
    if union == 0 {
        return 1.0;
    }
    ctx.intersection(&cand).count() as f64 / union as f64
}

/// One minus the fraction of candidate content words that are absent from
/// the context (higher means better grounded).
pub fn hallucination(context: &str, candidate: &str) -> f64 {
    let cand = content_words(candidate);
    if cand.is_empty() {
        return 1.0;
    }
    let ctx = content_words(context);
    let absent = cand.difference(&ctx).count();
    1.0 - absent as f64 / cand.len() as f64
}

/// Starts at 1 and loses 1/5 per defect: an unmatched bracket of any kind,
/// or an immediately repeated token. Floored at 0.
pub fn language_correctness(candidate: &str) -> f64 {
    let mut penalties = 0usize;
    for (open, close) in [('(', ')'), ('[', ']'), ('{', '}')] {
        let mut depth = 0i64;
        for ch in candidate.chars() {
            if ch == open {
                depth += 1;
            } else if ch == close {
                if depth > 0 {
                    depth -= 1;
                } else {
                    penalties += 1; // unmatched closer
                }
            }
        }
        penalties += depth as usize; // unmatched openers
    }
    let tokens = tokenize(candidate);
    penalties += tokens.windows(2).filter(|w| w[0] == w[1]).count();
    (1.0 - penalties as f64 / 5.0).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONTEXT: &str = "The battery lasts long and I love the battery life. \
        The price is great. The screen is crisp. The camera is slow and noisy.";

    #[test]
    fn full_aspect_coverage_scores_one() {
        // Context mentions battery, price, screen, camera.
        let candidate = "Battery, price, screen and camera are all discussed.";
        assert_eq!(aspect_coverage(CONTEXT, candidate), 1.0);
    }

    #[test]
    fn three_of_four_aspects_scores_three_quarters() {
        // 4 aspect keywords in context, candidate covers 3: on the 0-5
        // scale this is the 3.75 case.
        let candidate = "Users praise the battery and price; the screen is crisp.";
        let frac = aspect_coverage(CONTEXT, candidate);
        assert!((frac - 0.75).abs() < 1e-12);
        assert!((5.0 * frac - 3.75).abs() < 1e-12);
    }

    #[test]
    fn no_context_aspects_is_vacuously_covered() {
        assert_eq!(aspect_coverage("nothing notable here", "anything"), 1.0);
    }

    #[test]
    fn zero_content_overlap_gives_zero_relevance() {
        let frac = relevance(CONTEXT, "zebra umbrella xylophone");
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn identical_texts_are_fully_relevant_and_grounded() {
        assert_eq!(relevance(CONTEXT, CONTEXT), 1.0);
        assert_eq!(hallucination(CONTEXT, CONTEXT), 1.0);
    }

    #[test]
    fn fabricated_content_lowers_hallucination_score() {
        let grounded = hallucination(CONTEXT, "The battery life is great.");
        let fabricated = hallucination(CONTEXT, "The battery exploded violently yesterday.");
        assert!((grounded - 1.0).abs() < 1e-12);
        assert!(fabricated < grounded);
    }

    #[test]
    fn faithfulness_flips_with_polarity() {
        // Context says the battery is loved (positive) and the camera is
        // slow (negative).
        let faithful = "I love the battery. The camera is slow.";
        let unfaithful = "The battery is terrible. The camera is great.";
        assert_eq!(opinion_faithfulness(CONTEXT, faithful), 1.0);
        assert_eq!(opinion_faithfulness(CONTEXT, unfaithful), 0.0);
    }

    #[test]
    fn opinion_coverage_counts_pairs() {
        // Context pairs: (battery,+), (price,+), (screen,+), (camera,-).
        let partial = "I love the battery. The price is great.";
        let frac = opinion_coverage(CONTEXT, partial);
        assert!((frac - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conciseness_peaks_at_target_length() {
        let at_target = ["word"; CONCISENESS_TARGET_WORDS].join(" ");
        assert_eq!(conciseness(&at_target), 1.0);
        let short = ["word"; 8].join(" ");
        assert!((conciseness(&short) - 0.1).abs() < 1e-12);
        let very_long = ["word"; 400].join(" ");
        assert_eq!(conciseness(&very_long), 0.0);
    }

    #[test]
    fn language_penalties_accumulate() {
        assert_eq!(language_correctness("A clean, well formed sentence."), 1.0);
        // One unmatched opener.
        assert!((language_correctness("Great product (really") - 0.8).abs() < 1e-12);
        // Repeated token plus unmatched closer.
        assert!((language_correctness("the the product] works") - 0.6).abs() < 1e-12);
        // Many defects floor at zero.
        assert_eq!(language_correctness("(((((( no no no no no no no"), 0.0);
    }

    #[test]
    fn rules_are_pure() {
        let candidate = "Users praise the battery and price; the screen is crisp.";
        for _ in 0..3 {
            assert_eq!(aspect_coverage(CONTEXT, candidate), 0.75);
            assert_eq!(
                opinion_faithfulness(CONTEXT, candidate),
                opinion_faithfulness(CONTEXT, candidate)
            );
        }
    }
}
