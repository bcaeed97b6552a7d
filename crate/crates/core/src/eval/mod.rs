//! Metrics over attack reports and model scores, run comparison, and the
//! throughput benchmark.

mod metrics;

use std::io::{self, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttackedSet, Dictionary};
use crate::engine::{run_attack, AttackConfig, AttackMode, AttackReport, EngineError};
use crate::model::CompatScorer;
use crate::rules::RuleSet;

pub use metrics::{auc, beta_success_rate};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels are all positive or all negative")]
    DegenerateLabels,
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("a pass of mode {0} emitted no guesses; the corpus is too small to benchmark")]
    CorpusTooSmall(AttackMode),
    #[error("comparison needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `x` with 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

/// Quotes a CSV field when it contains a comma, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub guesses: u64,
    pub hits: u64,
    pub fraction: f64,
}

/// Cumulative hits against guess number, with strictly increasing guess numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessCurve {
    pub original_size: usize,
    pub points: Vec<CurvePoint>,
}

impl GuessCurve {
    pub fn from_report(report: &AttackReport) -> Self {
        let n = report.original_size.max(1) as f64;
        let points = report
            .curve
            .iter()
            .map(|&(guesses, hits)| CurvePoint { guesses, hits, fraction: hits as f64 / n })
            .collect();
        GuessCurve { original_size: report.original_size, points }
    }

    /// Hits recorded at or before guess `n`.
    pub fn hits_at(&self, n: u64) -> u64 {
        let idx = self.points.partition_point(|p| p.guesses <= n);
        if idx == 0 {
            0
        } else {
            self.points[idx - 1].hits
        }
    }

    pub fn fraction_at(&self, n: u64) -> f64 {
        self.hits_at(n) as f64 / self.original_size.max(1) as f64
    }

    pub fn max_guesses(&self) -> u64 {
        self.points.last().map_or(0, |p| p.guesses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Each count divided by the sum of all counts.
    FractionOfTotal,
    /// Each count divided by the number of words processed.
    PerWord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleHistogram {
    pub rules: Vec<String>,
    pub counts: Vec<u64>,
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl RuleHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `rule_text,count,value`
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "rule_text,count,value")?;
        for i in 0..self.rules.len() {
            writeln!(out, "{},{},{}", csv_field(&self.rules[i]), self.counts[i], fmt_float(self.values[i]))?;
        }
        Ok(())
    }
}

/// Hits per rule as a fraction of all hits.
pub fn rule_hit_histogram(report: &AttackReport) -> RuleHistogram {
    let total = report.rule_hits.iter().sum::<u64>();
    let values = report.rule_hits.iter().map(|&h| if total == 0 { 0.0 } else { h as f64 / total as f64 }).collect();
    RuleHistogram {
        rules: report.rules.clone(),
        counts: report.rule_hits.clone(),
        values,
        normalization: Normalization::FractionOfTotal,
    }
}

/// Fraction of processed words for which each rule was selected.
pub fn rule_selection_frequency(report: &AttackReport) -> RuleHistogram {
    let words = report.words_processed.max(1) as f64;
    RuleHistogram {
        rules: report.rules.clone(),
        counts: report.rule_selections.clone(),
        values: report.rule_selections.iter().map(|&s| s as f64 / words).collect(),
        normalization: Normalization::PerWord,
    }
}

/// Guess counts `round(10^(k/10))` for `k = 0, 1, ...` up to `max`, with `max` itself appended.
pub fn log_grid(max: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = Vec::new();
    if max == 0 {
        return grid;
    }
    for k in 0.. {
        let g = 10f64.powf(k as f64 / 10.0).round() as u64;
        if g >= max {
            break;
        }
        if grid.last() != Some(&g) {
            grid.push(g);
        }
    }
    grid.push(max);
    grid
}

/// Hit fractions of several runs on a shared log-spaced guess grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub grid: Vec<u64>,
    /// `columns[run][point]`
    pub columns: Vec<Vec<f64>>,
}

impl Comparison {
    /// `guesses,<run 1>,<run 2>,...`
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        let header: Vec<String> = self.names.iter().map(|n| csv_field(n)).collect();
        writeln!(out, "guesses,{}", header.join(","))?;
        for (i, g) in self.grid.iter().enumerate() {
            write!(out, "{g}")?;
            for col in &self.columns {
                write!(out, ",{}", fmt_float(col[i]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Aligns runs on a grid covering `[1, largest guess count]`; each run's value
/// at `n` is its hit fraction after `n` guesses (step interpolation).
pub fn compare_runs(runs: &[(String, &AttackReport)]) -> Result<Comparison, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::TooFewRuns(runs.len()));
    }
    let curves: Vec<GuessCurve> = runs.iter().map(|(_, r)| GuessCurve::from_report(r)).collect();
    let max = curves.iter().map(GuessCurve::max_guesses).max().unwrap_or(0);
    let grid = log_grid(max);
    let columns = curves.iter().map(|c| grid.iter().map(|&g| c.fraction_at(g)).collect()).collect();
    Ok(Comparison { names: runs.iter().map(|(n, _)| n.clone()).collect(), grid, columns })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub mode: AttackMode,
    pub passes: u64,
    pub guesses: u64,
    pub seconds: f64,
    pub guesses_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub results: Vec<BenchResult>,
    /// Adaptive over standard throughput, when both were measured.
    pub adaptive_ratio: Option<f64>,
}

impl BenchReport {
    pub fn get(&self, mode: AttackMode) -> Option<&BenchResult> {
        self.results.iter().find(|r| r.mode == mode)
    }

    pub fn write_table(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{:<16} {:>8} {:>14} {:>16}", "mode", "passes", "guesses", "guesses/s")?;
        for r in &self.results {
            writeln!(out, "{:<16} {:>8} {:>14} {:>16.0}", r.mode.name(), r.passes, r.guesses, r.guesses_per_second)?;
        }
        if let Some(ratio) = self.adaptive_ratio {
            writeln!(out, "adaptive/standard ratio: {}", fmt_float(ratio))?;
        }
        Ok(())
    }
}

/// Guesses per second of each mode, counting inference and membership checks.
/// Full attack passes are repeated until `duration` has elapsed.
pub fn bench(
    dict: &Dictionary,
    rules: &RuleSet,
    targets: &AttackedSet,
    model: Option<&dyn CompatScorer>,
    modes: &[AttackMode],
    duration: Duration,
    base: &AttackConfig,
) -> Result<BenchReport, EvalError> {
    let mut results = Vec::new();
    for &mode in modes {
        let config = AttackConfig { mode, ..*base };
        let start = Instant::now();
        let (mut passes, mut guesses) = (0u64, 0u64);
        loop {
            let report = run_attack(dict, rules, targets, model, &config, &mut |_| {})?;
            if report.total_guesses == 0 {
                return Err(EvalError::CorpusTooSmall(mode));
            }
            passes += 1;
            guesses += report.total_guesses;
            if start.elapsed() >= duration {
                break;
            }
        }
        let seconds = start.elapsed().as_secs_f64();
        results.push(BenchResult { mode, passes, guesses, seconds, guesses_per_second: guesses as f64 / seconds });
    }
    let rate = |m: AttackMode| results.iter().find(|r| r.mode == m).map(|r| r.guesses_per_second);
    let adaptive_ratio = match (rate(AttackMode::Adaptive), rate(AttackMode::Standard)) {
        (Some(a), Some(s)) => Some(a / s),
        _ => None,
    };
    Ok(BenchReport { results, adaptive_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_standard;
    use crate::rules::parse_ruleset;

    fn report() -> AttackReport {
        let d = Dictionary::new("d", ["pass".to_string(), "word".to_string()]).unwrap();
        let r = parse_ruleset("$1\n$2\nu\n", "r", true).unwrap().ruleset;
        let x = AttackedSet::new(["pass1".to_string(), "word1".to_string(), "zzz".to_string()]).unwrap();
        run_standard(&d, &r, &x, &AttackConfig::default()).unwrap()
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.5), "0.500000000");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_float(123.456), "123.456000");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1e-7), "1.00000000e-7");
        assert_eq!(fmt_float(7.0 / 9.0).parse::<f64>().unwrap(), 0.777777778);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("abc"), "abc");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn success_rate_from_engine_example() {
        let d = Dictionary::new("d", ["pass".to_string()]).unwrap();
        let r = parse_ruleset("$1\n$2\n", "r", true).unwrap().ruleset;
        let x = AttackedSet::new(["pass1".to_string()]).unwrap();
        let rep = run_standard(&d, &r, &x, &AttackConfig::default()).unwrap();
        assert_eq!(beta_success_rate(&rep.curve, 1, 2), 1.0);
        assert_eq!(beta_success_rate(&rep.curve, 1, 0), 0.0);
    }

    #[test]
    fn histograms() {
        let rep = report();
        let h = rule_hit_histogram(&rep);
        assert_eq!(h.values, vec![1.0, 0.0, 0.0]);
        assert_eq!(h.total(), rep.total_hits);
        let s = rule_selection_frequency(&rep);
        assert_eq!(s.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn curve_lookup() {
        let c = GuessCurve::from_report(&report());
        assert_eq!(c.hits_at(0), 0);
        assert_eq!(c.hits_at(1), 1);
        assert_eq!(c.hits_at(3), 1);
        assert_eq!(c.hits_at(4), 2);
        assert_eq!(c.hits_at(1000), 2);
        assert!(c.points.windows(2).all(|w| w[0].guesses < w[1].guesses));
    }

    #[test]
    fn grid() {
        assert_eq!(log_grid(1), vec![1]);
        assert_eq!(log_grid(10), vec![1, 2, 3, 4, 5, 6, 8, 10]);
        let g = log_grid(12345);
        assert_eq!((g[0], *g.last().unwrap()), (1, 12345));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(log_grid(0).is_empty());
    }

    #[test]
    fn comparing_a_run_with_itself() {
        let rep = report();
        let c = compare_runs(&[("a".into(), &rep), ("b".into(), &rep)]).unwrap();
        assert_eq!(c.columns[0], c.columns[1]);
        assert_eq!(*c.grid.last().unwrap(), rep.total_guesses);
        assert!(matches!(compare_runs(&[("a".into(), &rep)]), Err(EvalError::TooFewRuns(1))));
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("guesses,a,b\n1,0.333333333,0.333333333\n"));
    }

    #[test]
    fn bench_reports_every_mode() {
        let d = Dictionary::new("d", (0..50).map(|i| format!("w{i}"))).unwrap();
        let r = parse_ruleset("$1\nu\nr\n", "r", true).unwrap().ruleset;
        let x = AttackedSet::new(["w11".to_string()]).unwrap();
        let modes = [AttackMode::Standard, AttackMode::DynamicDict];
        let b = bench(&d, &r, &x, None, &modes, Duration::from_millis(20), &AttackConfig::default()).unwrap();
        assert_eq!(b.results.len(), 2);
        assert!(b.results.iter().all(|r| r.guesses_per_second > 0.0));
        assert!(b.adaptive_ratio.is_none());
    }
}
