use super::EvalError;
use crate::scalar::Scalar;

/// ROC-AUC over paired `(score, label)` observations; tied scores share their midrank.
pub fn auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].as_f64().total_cmp(&scores[b].as_f64()));
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]].as_f64();
        let mut j = i;
        while j < order.len() && scores[order[j]].as_f64() == value {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank
        let midrank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum += midrank * tied_pos as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Fraction of the attacked set recovered within the first `budget` guesses,
/// read off a `(guess_number, cumulative_hits)` step curve.
pub fn beta_success_rate(curve: &[(u64, u64)], original_size: usize, budget: u64) -> f64 {
    if original_size == 0 {
        return 0.0;
    }
    let hits = curve.iter().take_while(|(g, _)| *g <= budget).map(|(_, h)| *h).last().unwrap_or(0);
    hits as f64 / original_size as f64
}
