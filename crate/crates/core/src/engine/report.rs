use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forest::{extract_forest, write_forest_csv, HitsForest};
use super::AttackConfig;
use crate::eval::{csv_field, fmt_float};

/// Budget state observed across an attack's normalizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetTrace {
    pub normalizations: u64,
    /// Largest `|sum(B) - |R| * beta|` seen right after a normalization.
    pub max_mass_error: f64,
    /// Normalizations after which some budget lay outside the clamp.
    pub clamp_violations: u64,
    pub final_budgets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub config: AttackConfig,
    pub rules: Vec<String>,
    pub dictionary_size: usize,
    pub original_size: usize,
    /// Queue entries processed, including recycled hits.
    pub words_processed: u64,
    pub total_guesses: u64,
    pub total_hits: u64,
    /// `(guess_number, cumulative_hits)`, starting at `(0, 0)` and ending at the totals.
    pub curve: Vec<(u64, u64)>,
    pub rule_hits: Vec<u64>,
    pub rule_selections: Vec<u64>,
    pub forest: HitsForest,
    pub budget: Option<BudgetTrace>,
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// `guess_number,hits,fraction`
    pub fn write_curve_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "guess_number,hits,fraction")?;
        let n = self.original_size.max(1) as f64;
        for &(g, h) in &self.curve {
            writeln!(out, "{g},{h},{}", fmt_float(h as f64 / n))?;
        }
        Ok(())
    }

    /// `rule_text,selections,hits`
    pub fn write_rules_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "rule_text,selections,hits")?;
        for (i, r) in self.rules.iter().enumerate() {
            writeln!(out, "{},{},{}", csv_field(r), self.rule_selections[i], self.rule_hits[i])?;
        }
        Ok(())
    }

    pub fn write_forest_csv(&self, out: impl Write) -> io::Result<()> {
        write_forest_csv(&extract_forest(&self.forest, &self.rules), out)
    }

    /// Writes `report.json`, `curve.csv`, `rules.csv` and `forest.csv` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        let mut buf = Vec::new();
        self.write_curve_csv(&mut buf)?;
        std::fs::write(dir.join("curve.csv"), &buf)?;
        buf.clear();
        self.write_rules_csv(&mut buf)?;
        std::fs::write(dir.join("rules.csv"), &buf)?;
        buf.clear();
        self.write_forest_csv(&mut buf)?;
        std::fs::write(dir.join("forest.csv"), &buf)
    }

    /// Reads `report.json` from a report directory, or the file itself.
    pub fn read(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
        let text = std::fs::read_to_string(file)?;
        Self::from_json(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Hits divided by guesses; 0 before the first guess.
    pub fn precision(&self) -> f64 {
        if self.total_guesses == 0 {
            0.0
        } else {
            self.total_hits as f64 / self.total_guesses as f64
        }
    }

    /// Guess number at which the curve first reaches `hits`.
    pub fn guesses_to_reach(&self, hits: u64) -> Option<u64> {
        self.curve.iter().find(|(_, h)| *h >= hits).map(|(g, _)| *g)
    }
}
