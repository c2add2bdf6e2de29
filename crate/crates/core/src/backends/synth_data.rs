//! Seeded generators for synthetic interaction logs and prompt sets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::log_store::InteractionRecord;
use crate::text::StyleLexicon;

const ADJECTIVES: &[&str] = &[
    "a red", "an old", "a tiny", "a giant", "a lonely", "a golden", "a frozen", "a ruined",
    "a sleepy", "a brave", "a silver", "a wild", "a broken", "a hidden", "a floating",
];

const NOUNS: &[&str] = &[
    "fox", "lighthouse", "castle", "dragon", "robot", "wizard", "forest cabin", "sailboat",
    "owl", "city street", "knight", "waterfall", "train station", "garden", "tiger",
    "spaceship", "library", "mountain village", "jellyfish", "windmill",
];

const DESCRIPTORS: &[&str] = &[
    "in a misty valley", "at dusk", "on a wooden table", "under the stars", "by the sea",
    "in the rain", "surrounded by flowers", "in winter", "seen from above", "at noon",
    "near a river", "in an empty room", "with a red scarf", "in the desert", "on a rooftop",
    "during a storm", "inside a cave", "with glowing eyes", "on a quiet beach", "in spring",
];

fn subject(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {}",
        ADJECTIVES.choose(rng).expect("non-empty"),
        NOUNS.choose(rng).expect("non-empty")
    )
}

fn descriptor(rng: &mut ChaCha8Rng, used: &[String]) -> String {
    let fresh: Vec<&&str> = DESCRIPTORS.iter().filter(|d| !used.iter().any(|u| u == **d)).collect();
    fresh
        .choose(rng)
        .map(|d| d.to_string())
        .unwrap_or_else(|| DESCRIPTORS[0].to_string())
}

fn style_term(rng: &mut ChaCha8Rng, lexicon: &StyleLexicon, used: &[String]) -> Option<String> {
    let fresh: Vec<&String> = lexicon
        .style_terms
        .iter()
        .filter(|t| !used.contains(t))
        .collect();
    fresh.choose(rng).map(|t| (*t).clone())
}

/// An initial user prompt: subject, up to two descriptors, sometimes a style term or two.
fn initial_prompt(rng: &mut ChaCha8Rng, lexicon: &StyleLexicon) -> Vec<String> {
    let mut parts = vec![subject(rng)];
    for _ in 0..rng.gen_range(0..=2) {
        let d = descriptor(rng, &parts);
        parts.push(d);
    }
    for _ in 0..2 {
        if rng.gen_bool(0.3) {
            if let Some(t) = style_term(rng, lexicon, &parts) {
                parts.push(t);
            }
        }
    }
    parts
}

/// `count` seeded initial prompts.
pub fn synthetic_prompts(count: usize, seed: u64, lexicon: &StyleLexicon) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| initial_prompt(&mut rng, lexicon).join(", "))
        .collect()
}

/// Shape of a synthetic interaction log.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticLogConfig {
    pub users: usize,
    pub sessions_per_user: usize,
    pub max_steps: usize,
    pub start_timestamp: i64,
    pub seed: u64,
}

impl Default for SyntheticLogConfig {
    fn default() -> Self {
        Self {
            users: 20,
            sessions_per_user: 5,
            max_steps: 5,
            start_timestamp: 1_660_000_000,
            seed: 0,
        }
    }
}

/// Users issue sessions of incremental refinements: each step appends one or
/// two phrases, style terms with a per-user probability. Steps within a
/// session are at most 900 s apart; sessions are at least 1500 s apart.
pub fn synthetic_log(config: &SyntheticLogConfig, lexicon: &StyleLexicon) -> Vec<InteractionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    for user in 0..config.users {
        let user_id = format!("user{user:04}");
        let skill: f64 = rng.gen_range(0.05..0.95);
        let mut ts = config.start_timestamp + rng.gen_range(0..86_400);
        for _ in 0..config.sessions_per_user {
            let mut parts = initial_prompt(&mut rng, lexicon);
            let steps = rng.gen_range(1..=config.max_steps.max(1));
            for step in 0..steps {
                if step > 0 {
                    ts += rng.gen_range(20..=900);
                    for _ in 0..rng.gen_range(1..=2) {
                        let next = if rng.gen_bool(skill) {
                            style_term(&mut rng, lexicon, &parts)
                        } else {
                            None
                        };
                        let next = next.unwrap_or_else(|| descriptor(&mut rng, &parts));
                        parts.push(next);
                    }
                }
                records.push(InteractionRecord {
                    user_id: user_id.clone(),
                    timestamp: ts,
                    prompt: parts.join(", "),
                    image_id: None,
                    scores: None,
                    seed: Some(records.len() as u64),
                });
            }
            ts += rng.gen_range(1500..=6000);
        }
    }
    records
}
