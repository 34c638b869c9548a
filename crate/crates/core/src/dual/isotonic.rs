/// Weighted least-squares projection onto non-decreasing sequences
/// (pool adjacent violators).
pub fn monotone_project(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m1, w1, n1) = blocks[blocks.len() - 1];
            let (m0, w0, n0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let wt = w0 + w1;
            let mean = if wt > 0.0 { (m0 * w0 + m1 * w1) / wt } else { 0.5 * (m0 + m1) };
            *blocks.last_mut().unwrap() = (mean, wt, n0 + n1);
        }
    }
    blocks.into_iter().flat_map(|(m, _, n)| std::iter::repeat(m).take(n)).collect()
}

/// Total downward variation `sum max(0, x_k - x_{k+1})`.
pub fn monotone_violation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(monotone_project(&[0.3, 0.1], &[1.0, 1.0]), vec![0.2, 0.2]);
        assert_eq!(monotone_project(&[0.1, 0.2, 0.3], &[1.0; 3]), vec![0.1, 0.2, 0.3]);
        assert_eq!(monotone_project(&[], &[]), Vec::<f64>::new());
        let out = monotone_project(&[1.0, 3.0, 2.0, 0.0], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(out, vec![1.0, 5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0]);
    }

    #[test]
    fn violation() {
        assert_eq!(monotone_violation(&[0.3, 0.1, 0.2, 0.0]), 0.4);
        assert_eq!(monotone_violation(&[0.0, 1.0]), 0.0);
    }
}
