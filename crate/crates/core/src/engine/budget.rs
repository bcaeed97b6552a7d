use serde::{Deserialize, Serialize};

/// Per-rule inclusion budgets with a conserved total mass of `len * beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetVector {
    values: Vec<f64>,
    beta: f64,
    clamp: (f64, f64),
}

impl BudgetVector {
    /// Every rule starts at `beta`. Requires `clamp.0 <= beta <= clamp.1`.
    pub fn new(n_rules: usize, beta: f64, clamp: (f64, f64)) -> Self {
        debug_assert!(clamp.0 <= beta && beta <= clamp.1);
        BudgetVector { values: vec![beta; n_rules], beta, clamp }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, rule: usize) -> f64 {
        self.values[rule]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn clamp_bounds(&self) -> (f64, f64) {
        self.clamp
    }

    pub fn total_mass(&self) -> f64 {
        self.values.len() as f64 * self.beta
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `|sum - total_mass|`
    pub fn mass_error(&self) -> f64 {
        (self.sum() - self.total_mass()).abs()
    }

    pub fn within_clamp(&self) -> bool {
        self.values.iter().all(|&v| v >= self.clamp.0 && v <= self.clamp.1)
    }

    /// Adds `delta` to rule `rule` and clamps it.
    pub fn increment(&mut self, rule: usize, delta: f64) {
        let (lo, hi) = self.clamp;
        self.values[rule] = (self.values[rule] + delta).clamp(lo, hi);
    }

    /// Restores the total mass by a common rescaling of all budgets, with
    /// clamping applied after the rescale.
    ///
    /// The scale `s` solves `sum(clamp(s * B_r)) = total_mass`; it is found
    /// by bisection, since the left side is continuous and non-decreasing in `s`.
    pub fn normalize(&mut self) {
        let (lo, hi) = self.clamp;
        let target = self.total_mass();
        let n = self.values.len() as f64;
        let mass = |s: f64, v: &[f64]| v.iter().map(|&b| (s * b).clamp(lo, hi)).sum::<f64>();
        let smallest = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let (mut a, mut b) = (0.0, hi / smallest.max(f64::MIN_POSITIVE));
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mass(mid, &self.values) < target {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= f64::EPSILON * b || (mass(b, &self.values) - target).abs() <= 1e-12 * n {
                break;
            }
        }
        let (ea, eb) = ((mass(a, &self.values) - target).abs(), (mass(b, &self.values) - target).abs());
        let s = if ea < eb { a } else { b };
        for v in &mut self.values {
            *v = (s * *v).clamp(lo, hi);
        }
    }
}

/// Budget step for a hit after `guesses_so_far` guesses.
pub fn budget_delta(delta_scale: f64, guesses_so_far: u64) -> f64 {
    delta_scale / guesses_so_far.max(1) as f64
}

/// One increment on `hit_rule` followed by normalization.
pub fn update_budgets(budgets: &BudgetVector, hit_rule: usize, guesses_so_far: u64, delta_scale: f64) -> BudgetVector {
    let mut next = budgets.clone();
    next.increment(hit_rule, budget_delta(delta_scale, guesses_so_far));
    next.normalize();
    next
}
