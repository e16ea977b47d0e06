//! Deterministic synthetic fixtures for the criterion benches.
//!
//! The decode instance mirrors the densest paragraphs the decoder meets in
//! practice (six entities over eight sentences) with staggered first
//! mentions, so the constrained and unconstrained searches are measured on
//! the same input that separates them most clearly.

use stategrid::{
    ChangeKind, DecodeContext, DecoderConfig, Entity, EntityState, FrameRecord, HardConstraintConfig,
    Paragraph, PriorKey, PriorTable, Rule, Sentence, StepLogits, KIND_COUNT,
};
use stategrid::priors::FrameArg;

const NOUNS: [&str; 6] = ["water", "steam", "magma", "gravel", "pollen", "resin"];
const VERBS: [&str; 4] = ["drifts", "settles", "erupts", "scatters"];

/// SplitMix64: a tiny deterministic generator so fixtures need no RNG crate.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-2, 2], the range actual logits land in after training.
    pub fn next_logit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
    }
}

/// One ready-to-decode instance plus both decoder configurations.
pub struct DecodeFixture {
    pub paragraph: Paragraph,
    pub initial: Vec<EntityState>,
    pub logits: StepLogits,
    pub priors: PriorTable,
    pub hard: HardConstraintConfig,
    pub constrained: DecoderConfig,
    pub unconstrained: DecoderConfig,
}

impl DecodeFixture {
    /// `entities` out of the noun pool (max 6) over `sentences` steps;
    /// entity `j` is first mentioned in sentence `j + 1`.
    pub fn staggered(entities: usize, sentences: usize, seed: u64) -> DecodeFixture {
        assert!((1..=NOUNS.len()).contains(&entities));
        let mut rng = SplitMix64(seed);
        let sentences: Vec<Sentence> = (1..=sentences)
            .map(|t| {
                let mentioned = &NOUNS[..t.min(entities)];
                let verb = VERBS[(rng.next_u64() % VERBS.len() as u64) as usize];
                Sentence::new(t, format!("The {} {verb} over the ridge .", mentioned.join(" and the ")))
            })
            .collect();
        let entity_list: Vec<Entity> =
            NOUNS[..entities].iter().map(|n| Entity::new(*n, Vec::<String>::new())).collect();
        let paragraph = Paragraph::new(format!("bench-{seed}"), "rock cycle", sentences, entity_list)
            .expect("fixture paragraph is structurally valid");

        let initial: Vec<EntityState> = (0..entities)
            .map(|j| {
                if j % 3 == 2 {
                    EntityState::Nonexistent
                } else {
                    EntityState::Exists(stategrid::Location::Unknown)
                }
            })
            .collect();

        let values: Vec<Vec<[f64; KIND_COUNT]>> = (0..paragraph.step_count())
            .map(|_| {
                (0..entities)
                    .map(|_| {
                        let mut row = [0.0; KIND_COUNT];
                        for v in &mut row {
                            *v = rng.next_logit();
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let logits = StepLogits::with_default_spans(&paragraph, values);

        let mut priors = PriorTable::empty(3.0, 0.5);
        for (j, noun) in NOUNS[..entities].iter().enumerate() {
            priors.set_count(
                PriorKey {
                    topic: "rock cycle".to_string(),
                    entity_lemma: noun.to_string(),
                    kind: ChangeKind::ALL[j % KIND_COUNT],
                },
                rng.next_u64() % 8,
            );
        }

        DecodeFixture {
            paragraph,
            initial,
            logits,
            priors,
            hard: HardConstraintConfig::default(),
            constrained: DecoderConfig::default(),
            unconstrained: DecoderConfig { use_hard: false, ..DecoderConfig::default() },
        }
    }

    pub fn context<'a>(&'a self, decoder: &'a DecoderConfig) -> DecodeContext<'a> {
        DecodeContext {
            paragraph: &self.paragraph,
            initial: &self.initial,
            logits: &self.logits,
            priors: Some(&self.priors),
            hard: &self.hard,
            decoder,
        }
    }
}

/// A synthetic frame stream cycling over topics, verbs, and filler roles.
pub fn synthetic_frames(count: usize) -> Vec<FrameRecord> {
    let topics = ["rock cycle", "water cycle", "photosynthesis"];
    (0..count)
        .map(|i| FrameRecord {
            topic: topics[i % topics.len()].to_string(),
            verb_lemma: VERBS[i % VERBS.len()].to_string(),
            args: vec![
                FrameArg { role: "THEME".to_string(), text: format!("the {}", NOUNS[i % NOUNS.len()]) },
                FrameArg { role: "GOAL".to_string(), text: "the ridge".to_string() },
            ],
        })
        .collect()
}

/// One rule per verb, alternating kinds, all keyed on the THEME role.
pub fn synthetic_rules() -> Vec<Rule> {
    let kinds = [ChangeKind::Move, ChangeKind::Create, ChangeKind::Destroy, ChangeKind::Move];
    VERBS
        .iter()
        .zip(kinds)
        .map(|(verb, kind)| {
            Rule::new(*verb, vec!["THEME".to_string()], "THEME", kind)
                .expect("fixture rules are valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use stategrid::{beam_search, violations};

    #[test]
    fn staggered_fixture_decodes_cleanly_under_constraints() {
        let fx = DecodeFixture::staggered(6, 8, 7);
        let outcome = beam_search(&fx.context(&fx.constrained)).unwrap();
        assert!(violations(&outcome.sequence, &fx.paragraph, &fx.initial, &fx.hard).is_empty());
    }

    #[test]
    fn constrained_search_generates_far_fewer_nodes() {
        let fx = DecodeFixture::staggered(6, 8, 7);
        let constrained = beam_search(&fx.context(&fx.constrained)).unwrap();
        let unconstrained = beam_search(&fx.context(&fx.unconstrained)).unwrap();
        assert!(constrained.stats.nodes_generated * 10 <= unconstrained.stats.nodes_generated);
    }

    #[test]
    fn fixtures_are_deterministic() {
        let a = DecodeFixture::staggered(5, 8, 3);
        let b = DecodeFixture::staggered(5, 8, 3);
        assert_eq!(a.logits, b.logits);
        assert_eq!(synthetic_frames(100), synthetic_frames(100));
    }
}
