//! Random attack instances shared by the integration tests.

#![allow(dead_code)]

pub mod gradient;

use adams::corpus::{synth_ruleset, AttackedSet, Dictionary};
use adams::rules::{parse_rule, Rule, RuleSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXTRA_RULES: &[&str] = &[
    ":", "l", "u", "c", "C", "t", "r", "d", "f", "{", "}", "[", "]", "q", "k", "K", "$1", "$!", "^1", "^x", "T0", "T2",
    "sa4", "se3", "so0", "@a", "D0", "D2", "x02", "O12", "i1_", "o0Z", "'3", "z1", "Z1", "p2", "$1 $2", "c $1", "u r",
];

/// A dictionary, a rule set, and an attacked set with hits that chain.
pub struct Instance {
    pub dict: Dictionary,
    pub rules: RuleSet,
    pub targets: AttackedSet,
}

pub fn rule_pool() -> Vec<Rule> {
    let synth: Vec<String> = synth_ruleset().rules().iter().map(|r| r.source().to_string()).collect();
    synth.iter().map(String::as_str).chain(EXTRA_RULES.iter().copied()).filter_map(|r| parse_rule(r).ok()).collect()
}

pub fn random_word(rng: &mut ChaCha8Rng, alphabet: &[u8], max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char).collect()
}

/// `n_words` words over a small alphabet, `n_rules` rules from the pool, and
/// `n_targets` passwords of which most are one or two rule applications away
/// from a word.
pub fn random_instance(seed: u64, n_words: usize, n_rules: usize, n_targets: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = b"abcdeo1234";
    let words: Vec<String> = (0..n_words).map(|_| random_word(&mut rng, alphabet, 7)).collect();
    let dict = Dictionary::new("random", words).expect("non-empty dictionary");
    let mut pool = rule_pool();
    pool.shuffle(&mut rng);
    pool.truncate(n_rules);
    let rules = RuleSet::new("random", pool, false).expect("non-empty rule set");
    let mut targets: Vec<String> = Vec::with_capacity(n_targets);
    while targets.len() < n_targets {
        let roll: f64 = rng.gen();
        let base = if roll < 0.15 || targets.is_empty() {
            random_word(&mut rng, alphabet, 8)
        } else if roll < 0.45 {
            targets[rng.gen_range(0..targets.len())].clone()
        } else {
            dict.words()[rng.gen_range(0..dict.len())].clone()
        };
        let rule = &rules.rules()[rng.gen_range(0..rules.len())];
        let t = if roll < 0.15 { Some(base) } else { rule.apply(&base) };
        if let Some(t) = t.filter(|t| !t.is_empty()) {
            targets.push(t);
        }
    }
    let targets = AttackedSet::new(targets).expect("non-empty targets");
    Instance { dict, rules, targets }
}

/// An untrained small model for `rules` whose scores spread over most of `(0, 1)`.
pub fn random_model(rules: &RuleSet, seed: u64) -> adams::CompatModelF64 {
    let config = adams::model::ModelConfig {
        depth: 1,
        filters: 8,
        kernel: 3,
        bottleneck: 2,
        embed_dim: 8,
        ..adams::model::ModelConfig::new(rules.len())
    };
    let mut model = adams::CompatModelF64::init(config, rules, seed).expect("valid config");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    model.weights.dense_weight.iter_mut().for_each(|w| *w *= 4.0);
    model.weights.dense_bias.iter_mut().for_each(|b| *b = rng.gen_range(-2.0..2.0));
    model
}

/// Every guess of a run, newline-terminated, with its hit flag.
pub fn guess_stream(
    inst: &Instance,
    model: Option<&dyn adams::model::CompatScorer>,
    config: &adams::engine::AttackConfig,
) -> (Vec<u8>, Vec<bool>, adams::engine::AttackReport) {
    let (mut bytes, mut hits) = (Vec::new(), Vec::new());
    let report = adams::engine::run_attack(&inst.dict, &inst.rules, &inst.targets, model, config, &mut |e| {
        bytes.extend_from_slice(e.guess.as_bytes());
        bytes.push(b'\n');
        hits.push(e.hit);
    })
    .expect("attack runs");
    (bytes, hits, report)
}

/// Whether `short` occurs in `long` as an ordered subsequence of lines.
pub fn is_subsequence(short: &[u8], long: &[u8]) -> bool {
    let mut long = long.split(|&b| b == b'\n');
    short.split(|&b| b == b'\n').all(|s| long.any(|l| l == s))
}
