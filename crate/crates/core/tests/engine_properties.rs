//! Attack modes against brute-force enumeration and against each other.

mod common;

use std::collections::HashSet;

use adams::engine::{AttackConfig, AttackMode};
use common::{guess_stream, is_subsequence, random_instance, random_model, Instance};

fn config(mode: AttackMode, beta: f64) -> AttackConfig {
    AttackConfig { beta, batch_size: 16, ..AttackConfig::with_mode(mode) }
}

/// Word-major enumeration of every (word, rule) application with targets
/// removed once hit.
fn brute_force(inst: &Instance) -> (Vec<u8>, Vec<bool>) {
    let mut remaining: HashSet<String> = inst.targets.passwords().clone();
    let (mut bytes, mut hits) = (Vec::new(), Vec::new());
    for word in inst.dict.words() {
        for rule in inst.rules.rules() {
            if let Some(g) = rule.apply(word) {
                hits.push(remaining.remove(&g));
                bytes.extend_from_slice(g.as_bytes());
                bytes.push(b'\n');
            }
        }
    }
    (bytes, hits)
}

#[test]
fn standard_matches_brute_force() {
    for seed in 0..20 {
        let inst = random_instance(seed, 150, 40, 400);
        let (bytes, hits, report) = guess_stream(&inst, None, &config(AttackMode::Standard, 0.6));
        let (want_bytes, want_hits) = brute_force(&inst);
        assert_eq!(bytes, want_bytes, "seed {seed}");
        assert_eq!(hits, want_hits, "seed {seed}");
        assert_eq!(report.total_guesses as usize, hits.len());
        assert_eq!(report.total_hits as usize, hits.iter().filter(|h| **h).count());
        assert_eq!(report.words_processed as usize, inst.dict.len());
    }
}

#[test]
fn full_budget_is_standard() {
    for seed in 0..20 {
        let inst = random_instance(100 + seed, 200, 50, 500);
        let model = random_model(&inst.rules, seed);
        let (standard, _, s) = guess_stream(&inst, None, &config(AttackMode::Standard, 1.0));
        let (adaptive, _, a) = guess_stream(&inst, Some(&model), &config(AttackMode::Adaptive, 1.0));
        assert_eq!(adaptive, standard, "seed {seed}");
        assert_eq!((a.total_guesses, a.total_hits), (s.total_guesses, s.total_hits));
    }
}

#[test]
fn smaller_budget_is_a_subsequence() {
    let mut strict = 0;
    for seed in 0..20 {
        let inst = random_instance(200 + seed, 200, 50, 500);
        let model = random_model(&inst.rules, seed);
        let (low, _, _) = guess_stream(&inst, Some(&model), &config(AttackMode::Adaptive, 0.4));
        let (high, _, _) = guess_stream(&inst, Some(&model), &config(AttackMode::Adaptive, 0.8));
        assert!(is_subsequence(&low, &high), "seed {seed}");
        strict += (!low.is_empty() && low.len() < high.len()) as usize;
    }
    assert!(strict >= 15, "budgets rarely separate: {strict} of 20");
}

#[test]
fn dynamic_dictionary_dominates_standard() {
    let mut gained = 0;
    for seed in 0..20 {
        let inst = random_instance(300 + seed, 150, 40, 400);
        let (_, _, s) = guess_stream(&inst, None, &config(AttackMode::Standard, 0.6));
        let (_, _, d) = guess_stream(&inst, None, &config(AttackMode::DynamicDict, 0.6));
        assert!(d.total_hits >= s.total_hits, "seed {seed}");
        assert!(d.total_guesses >= s.total_guesses, "seed {seed}");
        d.forest.verify(&inst.rules, &inst.targets).unwrap();
        gained += (d.total_hits > s.total_hits) as usize;
    }
    assert!(gained >= 15, "recycling rarely helps: {gained} of 20");
}

#[test]
fn recycling_forests_are_well_formed() {
    for seed in 0..10 {
        let inst = random_instance(400 + seed, 150, 40, 400);
        let model = random_model(&inst.rules, seed);
        for mode in [AttackMode::DynamicDict, AttackMode::Adams] {
            let (_, _, r) = guess_stream(&inst, Some(&model), &config(mode, 0.6));
            r.forest.verify(&inst.rules, &inst.targets).unwrap();
            assert_eq!(r.forest.len() as u64, r.total_hits);
            let distinct: HashSet<&str> = r.forest.nodes().iter().map(|n| n.password.as_str()).collect();
            assert_eq!(distinct.len(), r.forest.len());
        }
    }
}

#[test]
fn frozen_budgets_are_adaptive() {
    for seed in 0..10 {
        let inst = random_instance(500 + seed, 150, 40, 400);
        let model = random_model(&inst.rules, seed);
        let (adaptive, _, _) = guess_stream(&inst, Some(&model), &config(AttackMode::Adaptive, 0.6));
        let frozen = AttackConfig { delta_scale: 0.0, ..config(AttackMode::DynamicBudget, 0.6) };
        let (budget, _, r) = guess_stream(&inst, Some(&model), &frozen);
        assert_eq!(budget, adaptive, "seed {seed}");
        assert!(r.budget.unwrap().final_budgets.iter().all(|b| (b - 0.6).abs() < 1e-9));
    }
}

#[test]
fn budgets_are_conserved_and_clamped() {
    for seed in 0..10 {
        let inst = random_instance(600 + seed, 150, 40, 400);
        let model = random_model(&inst.rules, seed);
        let (_, _, r) = guess_stream(&inst, Some(&model), &config(AttackMode::Adams, 0.6));
        let trace = r.budget.expect("budget trace");
        assert!(trace.normalizations > 0, "seed {seed}");
        assert!(trace.max_mass_error <= 1e-6 * inst.rules.len() as f64, "seed {seed}");
        assert_eq!(trace.clamp_violations, 0);
        let sum: f64 = trace.final_budgets.iter().sum();
        assert!((sum - 0.6 * inst.rules.len() as f64).abs() <= 1e-6 * inst.rules.len() as f64);
    }
}

#[test]
fn runs_are_deterministic() {
    let inst = random_instance(7, 150, 40, 400);
    let model = random_model(&inst.rules, 7);
    for mode in AttackMode::ALL {
        let a = guess_stream(&inst, Some(&model), &config(mode, 0.6));
        let b = guess_stream(&inst, Some(&model), &config(mode, 0.6));
        assert_eq!(a.0, b.0, "{mode}");
        assert_eq!(a.2.to_json(), b.2.to_json(), "{mode}");
    }
}

#[test]
fn guess_cap_is_exact() {
    let inst = random_instance(8, 150, 40, 400);
    let capped = AttackConfig { max_guesses: Some(777), ..config(AttackMode::DynamicDict, 0.6) };
    let (bytes, _, r) = guess_stream(&inst, None, &capped);
    assert_eq!(r.total_guesses, 777);
    assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 777);
    assert_eq!(r.curve.last().unwrap().0, 777);
}
