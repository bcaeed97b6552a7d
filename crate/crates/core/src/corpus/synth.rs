//! Deterministic synthetic corpora with planted word/rule structure.
//!
//! Base words come from four templates; targets are produced by applying
//! rules from a mangling family tied to the word's template (most of the
//! time), from a foreign family (rarely), or by re-mangling an earlier target
//! (so hit chains exist for dynamic attacks).

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackedSet, CorpusError, Dictionary};
use crate::rules::{parse_rule, Rule, RuleSet};

pub const TEMPLATE_NAMES: [&str; 4] = ["name", "short", "digits", "mixed"];

pub const FAMILY_NAMES: [&str; 4] = ["digit-append", "repetition", "digit-shuffle", "case"];

/// Rules planted for each template, index-aligned with [`TEMPLATE_NAMES`].
const FAMILIES: [&[&str]; 4] = [
    &["$1", "$1 $2 $3", "$1 $2", "$2", "$7", "$0 $1", "$2 $3", "$6 $9", "$9 $9", "$1 $2 $3 $4", "$2 $0 $2 $0", "$!"],
    &["d", "p2", "f", "q", "z1", "Z1", "z2", "Z2", "d $1", "c d"],
    &["r", "^0", "^1", "^9", "]", "[", "{", "}", "$0 $0", "D1"],
    &["c", "u", "C", "t", "T0", "T1", "sa@", "se3", "so0", "si1", "c sa@", "u $!"],
];

/// Rules that are part of the rule set but never used for generation.
const NOISE_RULES: &[&str] =
    &["i3-", "o0X", "^z ^z", "$@ $@", "sx#", "@e", "x13", "Z4 z4", "'6 $#", "t r", "D2 D2", "q r"];

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_words: usize,
    pub n_targets: usize,
    /// Probability of each template, aligned with [`TEMPLATE_NAMES`].
    pub template_weights: [f64; 4],
    /// Fraction of targets derived from an earlier target rather than a dictionary word.
    pub chain_fraction: f64,
    /// Fraction of targets mangled with a family foreign to the base word's template.
    pub cross_fraction: f64,
}

impl SynthSpec {
    pub fn new(seed: u64, n_words: usize, n_targets: usize) -> Self {
        SynthSpec {
            seed,
            n_words,
            n_targets,
            template_weights: [0.35, 0.2, 0.2, 0.25],
            chain_fraction: 0.15,
            cross_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: &str| Err(CorpusError::InvalidSpec(msg.to_string()));
        if self.n_words == 0 || self.n_targets == 0 {
            return bad("n_words and n_targets must be positive");
        }
        if self.template_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("template weights must be non-negative");
        }
        if (self.template_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("template weights must sum to 1");
        }
        for f in [self.chain_fraction, self.cross_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return bad("fractions must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Provenance of one generated target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTarget {
    pub target: String,
    /// The word the rule was applied to: a dictionary word or an earlier target.
    pub base: String,
    pub rule: String,
    pub template: usize,
    pub family: usize,
    pub chained: bool,
}

/// Planted-structure record written next to a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub templates: Vec<String>,
    pub families: Vec<(String, Vec<String>)>,
    pub noise_rules: Vec<String>,
    /// Template index of each dictionary word, in dictionary order.
    pub word_templates: Vec<usize>,
    /// `planted_pairs[template][family]` counts targets generated from that pair.
    pub planted_pairs: Vec<Vec<usize>>,
    pub targets: Vec<PlantedTarget>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dictionary: Dictionary,
    pub targets: AttackedSet,
    pub rules: RuleSet,
    pub manifest: SynthManifest,
}

fn family_rules() -> Vec<Vec<Rule>> {
    FAMILIES.iter().map(|f| f.iter().map(|r| parse_rule(r).expect("built-in rule")).collect()).collect()
}

/// The full rule set of the generator: every family followed by the noise rules.
pub fn synth_ruleset() -> RuleSet {
    let rules = FAMILIES
        .iter()
        .flat_map(|f| f.iter())
        .chain(NOISE_RULES)
        .map(|r| parse_rule(r).expect("built-in rule"))
        .collect();
    RuleSet::new("synthetic", rules, true).expect("non-empty built-in rule set")
}

fn gen_word(template: usize, rng: &mut ChaCha8Rng) -> String {
    let mut w = Vec::new();
    match template {
        0 => {
            for _ in 0..rng.gen_range(2..=3) {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())]);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())]);
                if rng.gen_bool(0.3) {
                    w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())]);
                }
            }
        }
        1 => {
            for _ in 0..rng.gen_range(2..=4) {
                w.push(rng.gen_range(b'a'..=b'z'));
            }
        }
        2 => {
            for _ in 0..rng.gen_range(3..=8) {
                w.push(rng.gen_range(b'0'..=b'9'));
            }
        }
        _ => {
            for _ in 0..rng.gen_range(3..=6) {
                w.push(rng.gen_range(b'a'..=b'z'));
            }
            for _ in 0..rng.gen_range(1..=3) {
                w.push(rng.gen_range(b'0'..=b'9'));
            }
        }
    }
    String::from_utf8(w).expect("ASCII")
}

/// Generates a dictionary, an attacked set, and the rule set that explains it.
/// The output is a pure function of `spec`.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<SynthCorpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let template_dist = WeightedIndex::new(spec.template_weights)
        .map_err(|e| CorpusError::InvalidSpec(format!("template weights: {e}")))?;
    let families = family_rules();
    // within a family, earlier rules are more popular (1/rank)
    let family_dists: Vec<WeightedIndex<f64>> = families
        .iter()
        .map(|f| WeightedIndex::new((0..f.len()).map(|i| 1.0 / (i + 1) as f64)).expect("non-empty family"))
        .collect();

    let max_attempts = 100 * (spec.n_words + spec.n_targets);
    let mut attempts = 0;
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(spec.n_words);
    let mut word_templates = Vec::with_capacity(spec.n_words);
    while words.len() < spec.n_words {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CorpusError::InvalidSpec("could not generate enough unique words".into()));
        }
        let t = template_dist.sample(&mut rng);
        let w = gen_word(t, &mut rng);
        if seen.insert(w.clone()) {
            words.push(w);
            word_templates.push(t);
        }
    }

    let mut planted_pairs = vec![vec![0usize; FAMILIES.len()]; TEMPLATE_NAMES.len()];
    let mut target_set = HashSet::new();
    let mut targets: Vec<PlantedTarget> = Vec::with_capacity(spec.n_targets);
    attempts = 0;
    while targets.len() < spec.n_targets {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CorpusError::InvalidSpec("could not generate enough unique targets".into()));
        }
        let chained = !targets.is_empty() && rng.gen_bool(spec.chain_fraction);
        let (base, template) = if chained {
            let parent = &targets[rng.gen_range(0..targets.len())];
            (parent.target.clone(), parent.template)
        } else {
            let i = rng.gen_range(0..words.len());
            (words[i].clone(), word_templates[i])
        };
        let family = if rng.gen_bool(spec.cross_fraction) {
            let offset = rng.gen_range(1..FAMILIES.len());
            (template + offset) % FAMILIES.len()
        } else {
            template
        };
        let rule = &families[family][family_dists[family].sample(&mut rng)];
        let Some(guess) = rule.apply(&base) else { continue };
        if guess == base || !target_set.insert(guess.clone()) {
            continue;
        }
        planted_pairs[template][family] += 1;
        targets.push(PlantedTarget { target: guess, base, rule: rule.canonical(), template, family, chained });
    }

    let manifest = SynthManifest {
        spec: spec.clone(),
        templates: TEMPLATE_NAMES.iter().map(|s| s.to_string()).collect(),
        families: FAMILY_NAMES
            .iter()
            .zip(FAMILIES)
            .map(|(n, f)| (n.to_string(), f.iter().map(|r| r.to_string()).collect()))
            .collect(),
        noise_rules: NOISE_RULES.iter().map(|r| r.to_string()).collect(),
        word_templates,
        planted_pairs,
        targets,
    };
    Ok(SynthCorpus {
        dictionary: Dictionary::new(format!("synthetic-{}", spec.seed), words)?,
        targets: AttackedSet::new(manifest.targets.iter().map(|t| t.target.clone()))?,
        rules: synth_ruleset(),
        manifest,
    })
}
