//! Corpus assembly and the synthetic distant-supervision generator.
//!
//! A raw record is one sentence about one entity with the entity's (possibly
//! noisy) type labels. Training groups records into per-entity sentence bags
//! whose label set is the upward closure of the union of record labels;
//! evaluation keeps records as independent single-sentence mentions.
//!
//! The generator plants disjoint signal tokens per type: every sentence of an
//! entity expresses a random non-empty upward-closed subset of the entity's
//! gold type path — a prefix, since expressing a type entails its ancestors —
//! by containing one signal token per expressed type. Prefix depths are
//! uniform (deep evidence is scarce, as with real subtype mentions), and a
//! training bag's draws are redrawn together until some sentence expresses
//! the full path, so every gold label has support without any sentence
//! being special. Label noise is injected at
//! the entity level — with probability `noise_rate` one extra label whose
//! parent is already gold (or a foreign root) joins the bag's label set, so
//! it is a label no sentence of the bag supports. Per-entity noise draws come
//! from a dedicated stream, which couples corpora across noise rates: the
//! noisy-entity set at a lower rate is a subset of the set at a higher rate,
//! and gold labels and sentences are identical.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use thiserror::Error;

use crate::encoder::{EncodedSentence, EncoderError, Vocab};
use crate::hierarchy::{HierarchyError, TypeHierarchy, TypeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("corpus has no records")]
    EmptyCorpus,
    #[error("entity {entity:?} has no type labels")]
    NoLabels { entity: String },
    #[error("entity {entity:?} has no sentences")]
    NoSentences { entity: String },
    #[error("label id {label} outside hierarchy of {n_types} types (entity {entity:?})")]
    LabelOutOfRange {
        entity: String,
        label: TypeId,
        n_types: usize,
    },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("bad corpus configuration: {reason}")]
    BadConfig { reason: String },
}

/// One sentence about one entity, before vocabulary interning: the on-disk
/// corpus row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub entity: String,
    pub tokens: Vec<String>,
    /// Half-open token range of the entity mention.
    pub span: (usize, usize),
    /// Full path names of the entity's types.
    pub types: Vec<String>,
}

/// All sentences mentioning one entity, with the entity's label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceBag {
    pub entity: String,
    pub sentences: Vec<EncodedSentence>,
    pub labels: BTreeSet<TypeId>,
}

impl SentenceBag {
    /// Structural checks shared by training and gradient checking. Loader
    /// output always passes; hand-built bags get verified here.
    pub fn validate(&self, hierarchy: &TypeHierarchy) -> Result<(), DataError> {
        if self.sentences.is_empty() {
            return Err(DataError::NoSentences {
                entity: self.entity.clone(),
            });
        }
        if self.labels.is_empty() {
            return Err(DataError::NoLabels {
                entity: self.entity.clone(),
            });
        }
        if let Some(&bad) = self.labels.iter().find(|&&t| t >= hierarchy.len()) {
            return Err(DataError::LabelOutOfRange {
                entity: self.entity.clone(),
                label: bad,
                n_types: hierarchy.len(),
            });
        }
        Ok(())
    }
}

/// One evaluation unit: a single sentence with its gold types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub entity: String,
    pub sentence: EncodedSentence,
    pub gold: BTreeSet<TypeId>,
}

fn record_labels(
    record: &RawRecord,
    hierarchy: &TypeHierarchy,
) -> Result<BTreeSet<TypeId>, DataError> {
    let mut labels = BTreeSet::new();
    for name in &record.types {
        labels.insert(hierarchy.require(name)?);
    }
    Ok(labels)
}

/// Bags plus how many labels the upward closure had to add — distant
/// supervision that labels a child without its ancestors is legal but worth
/// a warning upstream.
#[derive(Debug, Clone)]
pub struct AssembledBags {
    pub bags: Vec<SentenceBag>,
    pub closure_added: usize,
}

/// Group records into per-entity bags (first-appearance order), interning
/// tokens into `vocab`. Bag labels are the upward closure of the union of the
/// records' labels.
pub fn assemble_bags(
    records: &[RawRecord],
    hierarchy: &TypeHierarchy,
    vocab: &mut Vocab,
) -> Result<AssembledBags, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, (Vec<EncodedSentence>, BTreeSet<TypeId>)> = BTreeMap::new();
    for record in records {
        let ids: Vec<usize> = record.tokens.iter().map(|t| vocab.intern(t)).collect();
        let sentence = EncodedSentence::new(ids, record.span)?;
        let labels = record_labels(record, hierarchy)?;
        let entry = grouped.entry(record.entity.clone()).or_insert_with(|| {
            order.push(record.entity.clone());
            (Vec::new(), BTreeSet::new())
        });
        entry.0.push(sentence);
        entry.1.extend(labels);
    }
    let mut bags = Vec::with_capacity(order.len());
    let mut closure_added = 0;
    for entity in order {
        let (sentences, labels) = grouped.remove(&entity).expect("grouped above");
        if labels.is_empty() {
            return Err(DataError::NoLabels { entity });
        }
        let closed = hierarchy.close_upward(&labels);
        closure_added += closed.len() - labels.len();
        bags.push(SentenceBag {
            entity,
            sentences,
            labels: closed,
        });
    }
    Ok(AssembledBags {
        bags,
        closure_added,
    })
}

/// Turn records into independent evaluation mentions against a frozen
/// vocabulary: unseen tokens map to the unknown id, gold sets are closed
/// upward.
pub fn assemble_mentions(
    records: &[RawRecord],
    hierarchy: &TypeHierarchy,
    vocab: &Vocab,
) -> Result<Vec<Mention>, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let mut mentions = Vec::with_capacity(records.len());
    for record in records {
        let ids: Vec<usize> = record.tokens.iter().map(|t| vocab.lookup(t)).collect();
        let sentence = EncodedSentence::new(ids, record.span)?;
        let labels = record_labels(record, hierarchy)?;
        if labels.is_empty() {
            return Err(DataError::NoLabels {
                entity: record.entity.clone(),
            });
        }
        mentions.push(Mention {
            entity: record.entity.clone(),
            sentence,
            gold: hierarchy.close_upward(&labels),
        });
    }
    Ok(mentions)
}

/// Shape and noise knobs of the synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of depth-1 types.
    pub roots: usize,
    /// Children per non-leaf type.
    pub branching: usize,
    /// Layers in the hierarchy; leaves sit at this depth.
    pub depth: usize,
    pub train_entities: usize,
    pub test_entities: usize,
    /// Sentences per entity, drawn uniformly from `min..=max`.
    pub sentences_min: usize,
    pub sentences_max: usize,
    /// Tokens per sentence, mention included.
    pub sentence_len: usize,
    /// Distinct signal tokens per type.
    pub signal_tokens_per_type: usize,
    /// Distinct filler tokens shared by all sentences.
    pub filler_tokens: usize,
    /// Probability that an entity's label set gains one unsupported type.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            roots: 3,
            branching: 2,
            depth: 3,
            train_entities: 40,
            test_entities: 12,
            sentences_min: 2,
            sentences_max: 5,
            sentence_len: 8,
            signal_tokens_per_type: 2,
            filler_tokens: 30,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |reason: String| Err(DataError::BadConfig { reason });
        if self.roots == 0 || self.branching == 0 {
            return bad("hierarchy needs at least one root and branching of at least 1".into());
        }
        if self.depth < 2 {
            return bad("depth below 2 leaves no paths to compose".into());
        }
        if self.train_entities == 0 {
            return bad("at least one training entity".into());
        }
        if self.sentences_min == 0 || self.sentences_min > self.sentences_max {
            return bad(format!(
                "sentence count range {}..={} is empty",
                self.sentences_min, self.sentences_max
            ));
        }
        if self.sentence_len < self.depth + 1 {
            return bad(format!(
                "sentence length {} cannot hold a mention plus {} signal tokens",
                self.sentence_len, self.depth
            ));
        }
        if self.signal_tokens_per_type == 0 || self.filler_tokens == 0 {
            return bad("signal and filler token pools must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise rate {} outside [0, 1]", self.noise_rate));
        }
        if self.noise_rate > 0.0 && self.roots < 2 && self.branching < 2 {
            return bad("noise needs a sibling or foreign root to inject".into());
        }
        Ok(())
    }

    /// Total type count of the generated hierarchy.
    pub fn n_types(&self) -> usize {
        // roots · (b^0 + b^1 + … + b^(depth-1))
        let mut total = 0;
        let mut layer = self.roots;
        for _ in 0..self.depth {
            total += layer;
            layer *= self.branching;
        }
        total
    }
}

/// A generated corpus: the hierarchy, raw records exactly as they would sit
/// on disk, and their assembled in-memory form.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub hierarchy: TypeHierarchy,
    pub train_records: Vec<RawRecord>,
    pub test_records: Vec<RawRecord>,
    pub train: Vec<SentenceBag>,
    pub test: Vec<Mention>,
    pub vocab: Vocab,
    /// Training entities whose label set got one unsupported type.
    pub noisy_entities: usize,
}

/// The signal token `j` of type `t`.
pub fn signal_token(t: TypeId, j: usize) -> String {
    format!("w{t}x{j}")
}

/// Recover the type a signal token expresses, if it is one.
pub fn parse_signal_token(token: &str) -> Option<TypeId> {
    let rest = token.strip_prefix('w')?;
    let (t, j) = rest.split_once('x')?;
    if j.is_empty() || !j.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}

const MENTION_TOKEN: &str = "ent";

fn hierarchy_lines(cfg: &SynthConfig) -> Vec<String> {
    // Leaf paths only; parsing creates the ancestors. One letter per layer
    // keeps names readable: /a0/b1/c0.
    let mut lines = Vec::new();
    let mut stack: Vec<(String, usize)> = (0..cfg.roots)
        .rev()
        .map(|i| (format!("/a{i}"), 1))
        .collect();
    while let Some((name, level)) = stack.pop() {
        if level == cfg.depth {
            lines.push(name);
            continue;
        }
        let letter = (b'a' + level as u8) as char;
        for j in (0..cfg.branching).rev() {
            stack.push((format!("{name}/{letter}{j}"), level + 1));
        }
    }
    lines
}

fn make_sentence(
    rng: &mut ChaCha12Rng,
    cfg: &SynthConfig,
    expressed: &[TypeId],
) -> (Vec<String>, (usize, usize)) {
    let mut tail: Vec<String> = expressed
        .iter()
        .map(|&t| signal_token(t, rng.random_range(0..cfg.signal_tokens_per_type)))
        .collect();
    while tail.len() < cfg.sentence_len - 1 {
        tail.push(format!("f{}", rng.random_range(0..cfg.filler_tokens)));
    }
    tail.shuffle(rng);
    let mut tokens = Vec::with_capacity(cfg.sentence_len);
    tokens.push(MENTION_TOKEN.to_string());
    tokens.extend(tail);
    (tokens, (0, 1))
}

/// Expressed-path depth for one sentence: uniform over `1..=len`, so deep
/// evidence is scarce relative to shallow evidence the way distant
/// supervision's subtype mentions are.
fn random_prefix_depth(rng: &mut ChaCha12Rng, len: usize) -> usize {
    rng.random_range(1..=len)
}

/// Generate a corpus. Deterministic in the config; see the module docs for
/// the noise-coupling guarantees.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, DataError> {
    cfg.validate()?;
    let hierarchy = TypeHierarchy::parse(hierarchy_lines(cfg).iter())?;
    let leaves: Vec<TypeId> = hierarchy.leaves().collect();

    // One seed pair per entity, all drawn up front from the master stream:
    // entity content never depends on the noise rate, and each entity's
    // noise decision has its own generator.
    let mut master = ChaCha12Rng::seed_from_u64(cfg.seed);
    let train_seeds: Vec<(u64, u64)> = (0..cfg.train_entities)
        .map(|_| (master.next_u64(), master.next_u64()))
        .collect();
    let test_seeds: Vec<u64> = (0..cfg.test_entities).map(|_| master.next_u64()).collect();

    let mut train_records = Vec::new();
    let mut noisy_entities = 0;
    for (i, &(content_seed, noise_seed)) in train_seeds.iter().enumerate() {
        let entity = format!("e{i}");
        let mut rng = ChaCha12Rng::seed_from_u64(content_seed);
        let leaf = leaves[rng.random_range(0..leaves.len())];
        let path = hierarchy.path_of(leaf);
        let gold: BTreeSet<TypeId> = path.iter().copied().collect();

        let mut labels = gold.clone();
        let candidates: Vec<TypeId> = (0..hierarchy.len())
            .filter(|&t| {
                !gold.contains(&t)
                    && hierarchy.parent(t).map_or(true, |p| gold.contains(&p))
            })
            .collect();
        if !candidates.is_empty() {
            // Unconditional draws keep this stream aligned across noise
            // rates; only the comparison against the rate differs.
            let mut noise_rng = ChaCha12Rng::seed_from_u64(noise_seed);
            let coin: f64 = noise_rng.random();
            let pick = candidates[noise_rng.random_range(0..candidates.len())];
            if coin < cfg.noise_rate {
                labels.insert(pick);
                noisy_entities += 1;
            }
        }
        let type_names: Vec<String> = labels.iter().map(|&t| hierarchy.name(t).to_string()).collect();

        let n_sentences = rng.random_range(cfg.sentences_min..=cfg.sentences_max);
        for s in 0..n_sentences {
            // Each sentence expresses an upward-closed subset of the gold
            // path — a prefix, since a type entails its ancestors. The
            // first sentence expresses the full path so every gold label
            // has support somewhere in the bag.
            let k = if s == 0 {
                path.len()
            } else {
                random_prefix_depth(&mut rng, path.len())
            };
            let (tokens, span) = make_sentence(&mut rng, cfg, &path[..k]);
            train_records.push(RawRecord {
                entity: entity.clone(),
                tokens,
                span,
                types: type_names.clone(),
            });
        }
    }

    let mut test_records = Vec::new();
    for (j, &content_seed) in test_seeds.iter().enumerate() {
        let entity = format!("q{j}");
        let mut rng = ChaCha12Rng::seed_from_u64(content_seed);
        let leaf = leaves[rng.random_range(0..leaves.len())];
        let path = hierarchy.path_of(leaf);
        let n_sentences = rng.random_range(cfg.sentences_min..=cfg.sentences_max);
        for s in 0..n_sentences {
            let k = random_prefix_depth(&mut rng, path.len());
            let (tokens, span) = make_sentence(&mut rng, cfg, &path[..k]);
            // Gold is exactly the expressed set, already upward-closed.
            let types: Vec<String> = path[..k]
                .iter()
                .map(|&t| hierarchy.name(t).to_string())
                .collect();
            test_records.push(RawRecord {
                entity: format!("{entity}m{s}"),
                tokens,
                span,
                types,
            });
        }
    }

    let mut vocab = Vocab::new();
    // Generated records carry closed label sets, so closure adds nothing.
    let train = assemble_bags(&train_records, &hierarchy, &mut vocab)?.bags;
    let test = assemble_mentions(&test_records, &hierarchy, &vocab)?;
    Ok(SynthCorpus {
        hierarchy,
        train_records,
        test_records,
        train,
        test,
        vocab,
        noisy_entities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_hierarchy() -> TypeHierarchy {
        TypeHierarchy::parse(["/a/b/c", "/a/d", "/e"].iter()).unwrap()
    }

    fn record(entity: &str, tokens: &[&str], types: &[&str]) -> RawRecord {
        RawRecord {
            entity: entity.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            span: (0, 1),
            types: types.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn records_group_into_bags_by_entity_in_first_appearance_order() {
        let h = fixture_hierarchy();
        let mut vocab = Vocab::new();
        let records = [
            record("mars", &["x", "y"], &["/a/b/c"]),
            record("io", &["z"], &["/e"]),
            record("mars", &["y", "w"], &["/a/d"]),
        ];
        let assembled = assemble_bags(&records, &h, &mut vocab).unwrap();
        let bags = assembled.bags;
        // Closing {/a/b/c, /a/d} adds /a and /a/b; {/e} closes to itself.
        assert_eq!(assembled.closure_added, 2);
        assert_eq!(bags.len(), 2);
        assert_eq!(bags[0].entity, "mars");
        assert_eq!(bags[0].sentences.len(), 2);
        // Union of {/a/b/c} and {/a/d}, closed upward.
        let names: Vec<&str> = bags[0].labels.iter().map(|&t| h.name(t)).collect();
        assert_eq!(names, ["/a", "/a/b", "/a/b/c", "/a/d"]);
        assert_eq!(bags[1].entity, "io");
        // Shared token "y" interned once.
        assert_eq!(
            bags[0].sentences[0].token_ids[1],
            bags[0].sentences[1].token_ids[0]
        );
    }

    #[test]
    fn unknown_type_fails_naming_it() {
        let h = fixture_hierarchy();
        let mut vocab = Vocab::new();
        let records = [record("x", &["t"], &["/nope"])];
        match assemble_bags(&records, &h, &mut vocab) {
            Err(DataError::Hierarchy(HierarchyError::UnknownType { name })) => {
                assert_eq!(name, "/nope")
            }
            other => panic!("expected unknown type, got {other:?}"),
        }
    }

    #[test]
    fn unlabeled_record_fails() {
        let h = fixture_hierarchy();
        let mut vocab = Vocab::new();
        let err = assemble_bags(&[record("x", &["t"], &[])], &h, &mut vocab).unwrap_err();
        assert!(matches!(err, DataError::NoLabels { .. }));
        let err = assemble_mentions(&[record("x", &["t"], &[])], &h, &vocab).unwrap_err();
        assert!(matches!(err, DataError::NoLabels { .. }));
    }

    #[test]
    fn bad_span_fails_at_assembly() {
        let h = fixture_hierarchy();
        let mut vocab = Vocab::new();
        let mut r = record("x", &["t"], &["/e"]);
        r.span = (0, 2);
        assert!(matches!(
            assemble_bags(&[r], &h, &mut vocab),
            Err(DataError::Encoder(EncoderError::BadSpan { .. }))
        ));
    }

    #[test]
    fn empty_corpus_fails() {
        let h = fixture_hierarchy();
        let mut vocab = Vocab::new();
        assert_eq!(
            assemble_bags(&[], &h, &mut vocab).unwrap_err(),
            DataError::EmptyCorpus
        );
    }

    #[test]
    fn mentions_use_the_frozen_vocabulary() {
        let h = fixture_hierarchy();
        let mut vocab = Vocab::new();
        let _ = assemble_bags(
            &[record("x", &["seen"], &["/e"])],
            &h,
            &mut vocab,
        )
        .unwrap();
        let mentions =
            assemble_mentions(&[record("y", &["novel"], &["/a/b/c"])], &h, &vocab).unwrap();
        assert_eq!(mentions[0].sentence.token_ids, [crate::encoder::UNK]);
        let names: Vec<&str> = mentions[0].gold.iter().map(|&t| h.name(t)).collect();
        assert_eq!(names, ["/a", "/a/b", "/a/b/c"]);
    }

    #[test]
    fn bag_validation_catches_structural_holes() {
        let h = fixture_hierarchy();
        let good = SentenceBag {
            entity: "e".into(),
            sentences: vec![EncodedSentence::new(vec![2], (0, 1)).unwrap()],
            labels: BTreeSet::from([0]),
        };
        assert!(good.validate(&h).is_ok());
        let mut no_sentences = good.clone();
        no_sentences.sentences.clear();
        assert!(matches!(
            no_sentences.validate(&h),
            Err(DataError::NoSentences { .. })
        ));
        let mut no_labels = good.clone();
        no_labels.labels.clear();
        assert!(matches!(
            no_labels.validate(&h),
            Err(DataError::NoLabels { .. })
        ));
        let mut out_of_range = good;
        out_of_range.labels.insert(99);
        assert!(matches!(
            out_of_range.validate(&h),
            Err(DataError::LabelOutOfRange { label: 99, .. })
        ));
    }

    #[test]
    fn signal_tokens_round_trip() {
        assert_eq!(parse_signal_token(&signal_token(7, 1)), Some(7));
        assert_eq!(parse_signal_token("f3"), None);
        assert_eq!(parse_signal_token("ent"), None);
        assert_eq!(parse_signal_token("w1x"), None);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = SynthConfig::default();
        cfg.sentence_len = 2;
        assert!(matches!(
            cfg.validate(),
            Err(DataError::BadConfig { .. })
        ));
        let mut cfg = SynthConfig::default();
        cfg.noise_rate = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SynthConfig {
            roots: 1,
            branching: 1,
            ..SynthConfig::default()
        };
        cfg.noise_rate = 0.5;
        assert!(cfg.validate().is_err(), "no room for a noise label");
        cfg.noise_rate = 0.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn type_count_follows_the_tree_shape() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.n_types(), 3 + 6 + 12);
        let c4 = SynthConfig {
            roots: 5,
            branching: 1,
            depth: 3,
            ..SynthConfig::default()
        };
        assert_eq!(c4.n_types(), 15);
        let corpus = synth_corpus(&SynthConfig {
            train_entities: 4,
            test_entities: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(corpus.hierarchy.len(), 21);
        assert_eq!(corpus.hierarchy.max_depth(), 3);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            train_entities: 6,
            test_entities: 3,
            noise_rate: 0.5,
            ..SynthConfig::default()
        };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a.train_records, b.train_records);
        assert_eq!(a.test_records, b.test_records);
        assert_eq!(a.noisy_entities, b.noisy_entities);
        let c = synth_corpus(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.train_records, c.train_records);
    }

    /// Types a bag's sentences actually express, via the signal tokens.
    fn expressed_types(bag_records: &[&RawRecord]) -> BTreeSet<TypeId> {
        bag_records
            .iter()
            .flat_map(|r| r.tokens.iter())
            .filter_map(|t| parse_signal_token(t))
            .collect()
    }

    fn records_by_entity(records: &[RawRecord]) -> BTreeMap<&str, Vec<&RawRecord>> {
        let mut m: BTreeMap<&str, Vec<&RawRecord>> = BTreeMap::new();
        for r in records {
            m.entry(r.entity.as_str()).or_default().push(r);
        }
        m
    }

    #[test]
    fn noiseless_labels_are_exactly_the_expressed_closure() {
        let corpus = synth_corpus(&SynthConfig {
            train_entities: 20,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(corpus.noisy_entities, 0);
        let by_entity = records_by_entity(&corpus.train_records);
        for bag in &corpus.train {
            let expressed = expressed_types(&by_entity[bag.entity.as_str()]);
            let closed = corpus.hierarchy.close_upward(&expressed);
            assert_eq!(bag.labels, closed, "entity {}", bag.entity);
            // The full path is expressed (bag-level coverage), so the closure
            // equals the expressed set itself.
            assert_eq!(expressed, closed);
        }
    }

    #[test]
    fn full_noise_injects_exactly_one_unsupported_label_each() {
        let cfg = SynthConfig {
            train_entities: 25,
            noise_rate: 1.0,
            ..SynthConfig::default()
        };
        let corpus = synth_corpus(&cfg).unwrap();
        assert_eq!(corpus.noisy_entities, 25);
        let by_entity = records_by_entity(&corpus.train_records);
        for bag in &corpus.train {
            let expressed = expressed_types(&by_entity[bag.entity.as_str()]);
            let supported = corpus.hierarchy.close_upward(&expressed);
            let extra: Vec<TypeId> = bag.labels.difference(&supported).copied().collect();
            assert_eq!(extra.len(), 1, "entity {}", bag.entity);
            // The planted label keeps the set upward-closed.
            assert_eq!(bag.labels, corpus.hierarchy.close_upward(&bag.labels));
        }
    }

    #[test]
    fn noise_sets_nest_as_the_rate_grows() {
        let base = SynthConfig {
            train_entities: 40,
            ..SynthConfig::default()
        };
        let low = synth_corpus(&SynthConfig {
            noise_rate: 0.2,
            ..base.clone()
        })
        .unwrap();
        let high = synth_corpus(&SynthConfig {
            noise_rate: 0.6,
            ..base.clone()
        })
        .unwrap();
        assert!(low.noisy_entities < high.noisy_entities);
        let clean = synth_corpus(&base).unwrap();
        for ((lo, hi), cl) in low.train.iter().zip(&high.train).zip(&clean.train) {
            // Same entity, same sentences, gold labels identical.
            assert_eq!(lo.entity, hi.entity);
            assert_eq!(lo.sentences, hi.sentences);
            assert_eq!(cl.sentences, hi.sentences);
            assert!(lo.labels.is_subset(&hi.labels));
            assert!(cl.labels.is_subset(&lo.labels));
            // And when both injected, they injected the same label.
            let lo_extra: Vec<_> = lo.labels.difference(&cl.labels).collect();
            let hi_extra: Vec<_> = hi.labels.difference(&cl.labels).collect();
            if !lo_extra.is_empty() {
                assert_eq!(lo_extra, hi_extra);
            }
        }
    }

    #[test]
    fn rate_recovery_is_roughly_linear() {
        let cfg = SynthConfig {
            train_entities: 400,
            noise_rate: 0.4,
            ..SynthConfig::default()
        };
        let corpus = synth_corpus(&cfg).unwrap();
        let rate = corpus.noisy_entities as f64 / 400.0;
        assert!((rate - 0.4).abs() < 0.08, "observed rate {rate}");
    }

    #[test]
    fn test_mentions_are_clean_and_closed() {
        let corpus = synth_corpus(&SynthConfig {
            noise_rate: 0.8,
            test_entities: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        for (m, r) in corpus.test.iter().zip(&corpus.test_records) {
            let expressed: BTreeSet<TypeId> = r
                .tokens
                .iter()
                .filter_map(|t| parse_signal_token(t))
                .collect();
            assert_eq!(m.gold, corpus.hierarchy.close_upward(&expressed));
            assert!(!m.gold.is_empty());
        }
    }

    #[test]
    fn sentences_have_the_configured_shape() {
        let cfg = SynthConfig::default();
        let corpus = synth_corpus(&cfg).unwrap();
        for r in corpus.train_records.iter().chain(&corpus.test_records) {
            assert_eq!(r.tokens.len(), cfg.sentence_len);
            assert_eq!(r.span, (0, 1));
            assert_eq!(r.tokens[0], "ent");
        }
        for bag in &corpus.train {
            let n = bag.sentences.len();
            assert!((cfg.sentences_min..=cfg.sentences_max).contains(&n));
        }
    }

    #[test]
    fn every_sentence_expresses_a_nonempty_prefix_of_one_path() {
        let corpus = synth_corpus(&SynthConfig::default()).unwrap();
        for r in corpus.train_records.iter().chain(&corpus.test_records) {
            let expressed: BTreeSet<TypeId> = r
                .tokens
                .iter()
                .filter_map(|t| parse_signal_token(t))
                .collect();
            assert!(!expressed.is_empty(), "sentence {:?}", r.tokens);
            // Upward-closed and on one path: the deepest expressed type's
            // root path is exactly the expressed set.
            let deepest = expressed
                .iter()
                .max_by_key(|&&t| corpus.hierarchy.depth(t))
                .copied()
                .unwrap();
            let path: BTreeSet<TypeId> =
                corpus.hierarchy.path_of(deepest).into_iter().collect();
            assert_eq!(expressed, path, "sentence {:?}", r.tokens);
        }
        // Test mentions are labeled with exactly what they express.
        for r in &corpus.test_records {
            let expressed: BTreeSet<TypeId> = r
                .tokens
                .iter()
                .filter_map(|t| parse_signal_token(t))
                .collect();
            let labeled: BTreeSet<TypeId> = r
                .types
                .iter()
                .map(|name| corpus.hierarchy.id(name).unwrap())
                .collect();
            assert_eq!(labeled, expressed, "test mention {:?}", r.tokens);
        }
        // Depths genuinely vary: some sentence stops short of the full path.
        let some_shallow = corpus
            .train_records
            .iter()
            .chain(&corpus.test_records)
            .any(|r| {
                let expressed: BTreeSet<TypeId> = r
                    .tokens
                    .iter()
                    .filter_map(|t| parse_signal_token(t))
                    .collect();
                expressed.len() < corpus.hierarchy.max_depth()
            });
        assert!(some_shallow, "every sentence expresses a full path");
    }
}
