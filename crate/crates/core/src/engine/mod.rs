//! Word-major guessing attacks.
//!
//! All five modes share one loop over a queue of pending words. A batch of
//! up to `batch_size` words is taken from the head of the queue, scored by
//! the model when the mode has one, and expanded word by word through the
//! selected rules. Hits found during a batch are pushed back onto the head
//! of the queue (in hit order) when the mode recycles, and budgets are
//! renormalized once per batch when the mode has them.

mod budget;
mod forest;
mod report;

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttackedSet, Dictionary};
use crate::model::{CompatScorer, ModelError};
use crate::rules::{RuleSet, RulesetFingerprint, Scratch, MAX_WORD_LEN};

pub use budget::{budget_delta, update_budgets, BudgetVector};
pub use forest::{extract_forest, write_forest_csv, ForestEdge, ForestNode, HitsForest, Parent};
pub use report::{AttackReport, BudgetTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    Standard,
    Adaptive,
    DynamicDict,
    DynamicBudget,
    Adams,
}

impl AttackMode {
    pub const ALL: [AttackMode; 5] =
        [AttackMode::Standard, AttackMode::Adaptive, AttackMode::DynamicDict, AttackMode::DynamicBudget, AttackMode::Adams];

    pub fn uses_model(self) -> bool {
        matches!(self, AttackMode::Adaptive | AttackMode::DynamicBudget | AttackMode::Adams)
    }

    pub fn uses_budgets(self) -> bool {
        matches!(self, AttackMode::DynamicBudget | AttackMode::Adams)
    }

    pub fn recycles(self) -> bool {
        matches!(self, AttackMode::DynamicDict | AttackMode::Adams)
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackMode::Standard => "standard",
            AttackMode::Adaptive => "adaptive",
            AttackMode::DynamicDict => "dynamic-dict",
            AttackMode::DynamicBudget => "dynamic-budget",
            AttackMode::Adams => "adams",
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected standard, adaptive, dynamic-dict, dynamic-budget or adams)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// Initial budget in `(0, 1]`.
    pub beta: f64,
    /// Numerator of the per-hit budget increment.
    pub delta_scale: f64,
    pub budget_clamp: (f64, f64),
    /// Words per inference batch.
    pub batch_size: usize,
    pub max_guesses: Option<u64>,
    /// Each target can be hit at most once.
    pub remove_on_hit: bool,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            mode: AttackMode::Standard,
            beta: 0.6,
            delta_scale: 1.0,
            budget_clamp: (0.05, 0.99),
            batch_size: 4096,
            max_guesses: None,
            remove_on_hit: true,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn with_mode(mode: AttackMode) -> Self {
        AttackConfig { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta {} outside (0, 1]", self.beta));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.mode.uses_budgets() {
            let (lo, hi) = self.budget_clamp;
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return bad(format!("budget clamp ({lo}, {hi}) must satisfy 0 < min < max < 1"));
            }
            if !(lo <= self.beta && self.beta <= hi) {
                return bad(format!("beta {} outside the budget clamp ({lo}, {hi})", self.beta));
            }
            if !(self.delta_scale >= 0.0 && self.delta_scale.is_finite()) {
                return bad("delta scale must be finite and non-negative".into());
            }
        }
        if self.mode.recycles() && !self.remove_on_hit {
            return bad(format!("mode {} requires remove_on_hit", self.mode));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rule set is empty")]
    EmptyRuleSet,
    #[error("dictionary is empty")]
    EmptyCorpus,
    #[error("model was trained for rule set {expected}, attack uses {found}")]
    FingerprintMismatch { expected: RulesetFingerprint, found: RulesetFingerprint },
    #[error("mode {0} needs a compatibility model")]
    MissingModel(AttackMode),
    #[error("score row has {scores} entries for {rules} rules")]
    LengthMismatch { scores: usize, rules: usize },
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One emitted guess.
#[derive(Debug, Clone, Copy)]
pub struct GuessEvent<'a> {
    pub guess: &'a str,
    pub word: &'a str,
    pub rule: usize,
    pub hit: bool,
}

/// Whether a rule with compatibility `score` passes budget `budget`.
#[inline]
pub fn is_selected(score: f64, budget: f64) -> bool {
    budget >= 1.0 || score > 1.0 - budget
}

/// Per-rule thresholds for [`select_compatible_rules`].
#[derive(Debug, Clone, Copy)]
pub enum Budgets<'a> {
    Uniform(f64),
    PerRule(&'a [f64]),
}

/// Indices of the rules whose score exceeds `1 - budget`, in rule order.
///
/// A budget of 1 selects every rule, whatever its score.
pub fn select_compatible_rules(scores: &[f64], budgets: Budgets<'_>) -> Result<Vec<usize>, EngineError> {
    if let Budgets::PerRule(b) = budgets {
        if b.len() != scores.len() {
            return Err(EngineError::LengthMismatch { scores: scores.len(), rules: b.len() });
        }
    }
    Ok((0..scores.len())
        .filter(|&j| {
            let b = match budgets {
                Budgets::Uniform(b) => b,
                Budgets::PerRule(b) => b[j],
            };
            is_selected(scores[j], b)
        })
        .collect())
}

pub fn run_standard(dict: &Dictionary, rules: &RuleSet, targets: &AttackedSet, config: &AttackConfig) -> Result<AttackReport, EngineError> {
    run_mode(AttackMode::Standard, dict, rules, targets, None, config)
}

pub fn run_adaptive(
    dict: &Dictionary,
    rules: &RuleSet,
    targets: &AttackedSet,
    model: &dyn CompatScorer,
    config: &AttackConfig,
) -> Result<AttackReport, EngineError> {
    run_mode(AttackMode::Adaptive, dict, rules, targets, Some(model), config)
}

pub fn run_dynamic_dict(dict: &Dictionary, rules: &RuleSet, targets: &AttackedSet, config: &AttackConfig) -> Result<AttackReport, EngineError> {
    run_mode(AttackMode::DynamicDict, dict, rules, targets, None, config)
}

pub fn run_dynamic_budget(
    dict: &Dictionary,
    rules: &RuleSet,
    targets: &AttackedSet,
    model: &dyn CompatScorer,
    config: &AttackConfig,
) -> Result<AttackReport, EngineError> {
    run_mode(AttackMode::DynamicBudget, dict, rules, targets, Some(model), config)
}

pub fn run_adams(
    dict: &Dictionary,
    rules: &RuleSet,
    targets: &AttackedSet,
    model: &dyn CompatScorer,
    config: &AttackConfig,
) -> Result<AttackReport, EngineError> {
    run_mode(AttackMode::Adams, dict, rules, targets, Some(model), config)
}

fn run_mode(
    mode: AttackMode,
    dict: &Dictionary,
    rules: &RuleSet,
    targets: &AttackedSet,
    model: Option<&dyn CompatScorer>,
    config: &AttackConfig,
) -> Result<AttackReport, EngineError> {
    let config = AttackConfig { mode, ..*config };
    run_attack(dict, rules, targets, model, &config, &mut |_| {})
}

/// Runs `config.mode`, calling `observer` on every emitted guess in order.
///
/// `model` is required by the adaptive modes and ignored by the others.
pub fn run_attack(
    dict: &Dictionary,
    rules: &RuleSet,
    targets: &AttackedSet,
    model: Option<&dyn CompatScorer>,
    config: &AttackConfig,
    observer: &mut dyn FnMut(&GuessEvent<'_>),
) -> Result<AttackReport, EngineError> {
    config.validate()?;
    let mode = config.mode;
    if rules.is_empty() {
        return Err(EngineError::EmptyRuleSet);
    }
    if dict.is_empty() {
        return Err(EngineError::EmptyCorpus);
    }
    let model = if mode.uses_model() {
        let m = model.ok_or(EngineError::MissingModel(mode))?;
        if m.fingerprint() != rules.fingerprint() {
            return Err(EngineError::FingerprintMismatch { expected: m.fingerprint(), found: rules.fingerprint() });
        }
        if m.n_rules() != rules.len() {
            return Err(EngineError::LengthMismatch { scores: m.n_rules(), rules: rules.len() });
        }
        Some(m)
    } else {
        None
    };

    let n_rules = rules.len();
    let cap = config.max_guesses.unwrap_or(u64::MAX);
    let mut queue: VecDeque<(String, Option<usize>)> = dict.words().iter().map(|w| (w.clone(), None)).collect();
    let mut seen: HashSet<String> = if mode.recycles() { dict.words().iter().cloned().collect() } else { HashSet::new() };
    let mut remaining = targets.passwords().clone();
    let mut budgets = mode.uses_budgets().then(|| BudgetVector::new(n_rules, config.beta, config.budget_clamp));
    let mut trace = budgets.as_ref().map(|_| BudgetTrace {
        normalizations: 0,
        max_mass_error: 0.0,
        clamp_violations: 0,
        final_budgets: Vec::new(),
    });

    let mut forest = HitsForest::default();
    let mut curve = vec![(0u64, 0u64)];
    let mut rule_hits = vec![0u64; n_rules];
    let mut rule_selections = vec![0u64; n_rules];
    let (mut guesses, mut hits, mut words_processed) = (0u64, 0u64, 0u64);
    let mut out = Vec::with_capacity(MAX_WORD_LEN);
    let mut scratch = Scratch::default();
    let mut thresholds = vec![config.beta; n_rules];
    let mut recycled: Vec<(String, usize)> = Vec::new();

    'attack: while !queue.is_empty() && guesses < cap {
        let take = queue.len().min(config.batch_size);
        let batch: Vec<(String, Option<usize>)> = queue.drain(..take).collect();
        let scores = match model {
            Some(m) => {
                let words: Vec<&str> = batch.iter().map(|(w, _)| w.as_str()).collect();
                Some(m.score(&words)?)
            }
            None => None,
        };
        if let Some(b) = &budgets {
            thresholds.copy_from_slice(b.values());
        }
        let mut incremented = false;
        for (i, (word, node)) in batch.iter().enumerate() {
            words_processed += 1;
            let row = scores.as_ref().map(|s| s.row(i));
            for (j, rule) in rules.rules().iter().enumerate() {
                if let Some(row) = row {
                    if !is_selected(row[j], thresholds[j]) {
                        continue;
                    }
                }
                rule_selections[j] += 1;
                if !rule.apply_into(word.as_bytes(), &mut out, &mut scratch) {
                    continue;
                }
                let guess = std::str::from_utf8(&out).expect("rules emit ASCII");
                guesses += 1;
                let hit = if config.remove_on_hit { remaining.remove(guess) } else { remaining.contains(guess) };
                observer(&GuessEvent { guess, word, rule: j, hit });
                if hit {
                    hits += 1;
                    rule_hits[j] += 1;
                    curve.push((guesses, hits));
                    let parent = match node {
                        Some(p) => Parent::Node(*p),
                        None => Parent::Root(word.clone()),
                    };
                    let id = forest.push(ForestNode { password: guess.to_string(), parent, rule: j, guess_index: guesses });
                    if let Some(b) = &mut budgets {
                        b.increment(j, budget_delta(config.delta_scale, guesses));
                        incremented = true;
                    }
                    if mode.recycles() && seen.insert(guess.to_string()) {
                        recycled.push((guess.to_string(), id));
                    }
                }
                if guesses >= cap {
                    break 'attack;
                }
            }
        }
        if let (Some(b), Some(t)) = (&mut budgets, &mut trace) {
            if incremented {
                b.normalize();
                t.normalizations += 1;
                t.max_mass_error = t.max_mass_error.max(b.mass_error());
                if !b.within_clamp() {
                    t.clamp_violations += 1;
                }
            }
        }
        for (w, id) in recycled.drain(..).rev() {
            queue.push_front((w, Some(id)));
        }
    }
    if curve.last().map(|p| p.0) != Some(guesses) {
        curve.push((guesses, hits));
    }
    if let (Some(b), Some(t)) = (&budgets, &mut trace) {
        t.final_budgets = b.values().to_vec();
    }
    Ok(AttackReport {
        config: *config,
        rules: rules.rules().iter().map(|r| r.canonical()).collect(),
        dictionary_size: dict.len(),
        original_size: targets.original_size(),
        words_processed,
        total_guesses: guesses,
        total_hits: hits,
        curve,
        rule_hits,
        rule_selections,
        forest,
        budget: trace,
    })
}
