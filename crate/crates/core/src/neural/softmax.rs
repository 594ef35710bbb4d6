use crate::error::{Error, Result};

/// Masked softmax with max subtraction. Masked-out entries are exactly 0.
pub fn softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "softmax: {} logits vs {} mask entries",
            logits.len(),
            mask.len()
        )));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Dimension("softmax: every entry is masked".into()));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    Ok(out)
}

/// Log-probabilities over an unmasked logit vector.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}
