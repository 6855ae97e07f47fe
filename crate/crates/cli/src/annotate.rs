//! Interactive pairwise preference annotation.
//!
//! Presents two candidates per context in a seeded random A/B order,
//! records the annotator's choice, and appends standard preference records.
//! Already-annotated contexts (present in the output file) are skipped, so
//! an interrupted session resumes where it left off.

use anyhow::{bail, Context, Result};
use featrm_core::io::append_preference_records;
use featrm_core::records::{CandidateRef, PreferencePair};
use featrm_core::schema::{validate_feature_vector, FeatureSchema, FeatureVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, IsTerminal, Write};
use std::path::Path;

#[derive(Debug, Deserialize)]
pub struct AnnotateCandidate {
    pub candidate_id: String,
    #[serde(default)]
    pub text: Option<String>,
    pub features: FeatureVector,
}

/// One item to annotate: a context plus exactly two candidates.
#[derive(Debug, Deserialize)]
pub struct AnnotateItem {
    pub context_id: String,
    #[serde(default)]
    pub context: Option<String>,
    pub candidates: Vec<AnnotateCandidate>,
}

pub fn load_items(path: &Path, schema: &FeatureSchema) -> Result<Vec<AnnotateItem>> {
    let file =
        std::fs::File::open(path).with_context(|| format!("file not found: {}", path.display()))?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: AnnotateItem = serde_json::from_str(&line)
            .with_context(|| format!("line {}: parse failure", idx + 1))?;
        if item.candidates.len() != 2 {
            bail!(
                "line {}: expected exactly 2 candidates, got {}",
                idx + 1,
                item.candidates.len()
            );
        }
        for c in &item.candidates {
            if let Err(v) = validate_feature_vector(&c.features, schema) {
                bail!(
                    "line {}: candidate '{}': {}",
                    idx + 1,
                    c.candidate_id,
                    v.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                );
            }
        }
        items.push(item);
    }
    if items.is_empty() {
        bail!("empty annotation source");
    }
    Ok(items)
}

/// Context ids already present in the output file.
fn already_annotated(path: &Path) -> Result<HashSet<String>> {
    let mut done = HashSet::new();
    if !path.exists() {
        return Ok(done);
    }
    let file = std::fs::File::open(path)?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(&line) {
            if let Some(id) = value.get("context_id").and_then(|v| v.as_str()) {
                done.insert(id.to_string());
            }
        }
    }
    Ok(done)
}

/// Presentation order for one context: deterministic in (seed, context_id).
fn present_swapped(seed: u64, context_id: &str) -> bool {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(context_id.as_bytes());
    let digest = hasher.finalize();
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(digest[..8].try_into().unwrap()));
    rng.gen::<bool>()
}

enum Answer {
    First,
    Second,
    Skip,
    Quit,
}

fn parse_answer(raw: &str) -> Option<Answer> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "a" => Some(Answer::First),
        "b" => Some(Answer::Second),
        "skip" | "s" => Some(Answer::Skip),
        "quit" | "q" => Some(Answer::Quit),
        _ => None,
    }
}

pub struct AnnotateOptions {
    pub annotator_id: String,
    pub seed: u64,
    /// Scripted answers for non-interactive runs (test hook).
    pub batch_answers: Option<Vec<String>>,
}

pub struct AnnotateSummary {
    pub presented: usize,
    pub recorded: usize,
    pub skipped: usize,
}

pub fn run_annotation(
    items: &[AnnotateItem],
    out_path: &Path,
    options: &AnnotateOptions,
) -> Result<AnnotateSummary> {
    if options.batch_answers.is_none() && !std::io::stdin().is_terminal() {
        bail!(featrm_core::Error::Config(
            "non-interactive stdin: run in a terminal or pass --batch-answers".into()
        ));
    }
    let done = already_annotated(out_path)?;
    let mut scripted = options.batch_answers.as_ref().map(|answers| {
        answers
            .iter()
            .cloned()
            .collect::<std::collections::VecDeque<_>>()
    });
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut summary = AnnotateSummary {
        presented: 0,
        recorded: 0,
        skipped: 0,
    };

    for item in items {
        if done.contains(&item.context_id) {
            continue;
        }
        summary.presented += 1;
        let swapped = present_swapped(options.seed, &item.context_id);
        let (first, second) = if swapped {
            (&item.candidates[1], &item.candidates[0])
        } else {
            (&item.candidates[0], &item.candidates[1])
        };

        writeln!(stdout, "\n=== context {} ===", item.context_id)?;
        if let Some(context) = &item.context {
            writeln!(stdout, "{context}")?;
        }
        for (label, candidate) in [("A", first), ("B", second)] {
            writeln!(stdout, "--- candidate {label} ---")?;
            match &candidate.text {
                Some(text) => writeln!(stdout, "{text}")?,
                None => writeln!(stdout, "(features: {:?})", candidate.features.values())?,
            }
        }

        let answer = loop {
            write!(stdout, "prefer [A/B], skip, or quit: ")?;
            stdout.flush()?;
            let raw = match &mut scripted {
                Some(queue) => match queue.pop_front() {
                    Some(a) => {
                        writeln!(stdout, "{a}")?;
                        a
                    }
                    None => "quit".to_string(),
                },
                None => {
                    let mut line = String::new();
                    if stdin.lock().read_line(&mut line)? == 0 {
                        "quit".to_string()
                    } else {
                        line
                    }
                }
            };
            if let Some(answer) = parse_answer(&raw) {
                break answer;
            }
            writeln!(stdout, "unrecognized answer {raw:?}")?;
        };

        let (winner, loser) = match answer {
            Answer::First => (first, second),
            Answer::Second => (second, first),
            Answer::Skip => {
                writeln!(stdout, "skipped {}", item.context_id)?;
                summary.skipped += 1;
                continue;
            }
            Answer::Quit => {
                summary.presented -= 1;
                break;
            }
        };
        let record = PreferencePair {
            context_id: item.context_id.clone(),
            winner: CandidateRef {
                candidate_id: winner.candidate_id.clone(),
                text: winner.text.clone(),
            },
            loser: CandidateRef {
                candidate_id: loser.candidate_id.clone(),
                text: loser.text.clone(),
            },
            winner_features: winner.features.clone(),
            loser_features: loser.features.clone(),
            annotator_id: Some(options.annotator_id.clone()),
        };
        append_preference_records(out_path, &[record])?;
        summary.recorded += 1;
    }
    writeln!(
        stdout,
        "\nannotation session: {} presented, {} recorded, {} skipped",
        summary.presented, summary.recorded, summary.skipped
    )?;
    Ok(summary)
}
