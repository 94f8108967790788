use super::OracleError;

/// Fraction of (negative, positive) pairs whose scores are strictly ordered.
/// Tied scores earn nothing.
pub fn auc_from_scores(scores: &[u32], labels: &[u8]) -> Result<f64, OracleError> {
    debug_assert_eq!(scores.len(), labels.len());
    let top = scores.iter().copied().max().unwrap_or(0) as usize;
    let mut neg = vec![0u64; top + 1];
    let mut pos = vec![0u64; top + 1];
    for (&s, &y) in scores.iter().zip(labels) {
        if y == 1 {
            pos[s as usize] += 1;
        } else {
            neg[s as usize] += 1;
        }
    }
    let n_neg: u64 = neg.iter().sum();
    let n_pos: u64 = pos.iter().sum();
    if n_neg == 0 || n_pos == 0 {
        return Err(OracleError::SingleClass(if n_pos == 0 { 0 } else { 1 }));
    }
    let mut below = 0u64;
    let mut concordant = 0u64;
    for s in 0..=top {
        concordant += pos[s] * below;
        below += neg[s];
    }
    Ok(concordant as f64 / (n_neg * n_pos) as f64)
}
