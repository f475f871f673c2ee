//! Small empirical summaries used by the experiments.

/// `sup_λ λ μ({v > λ}) / l1` for a function given by values and cell measures.
///
/// The supremum is approached as `λ` increases to each distinct value `v_k`,
/// where it equals `v_k μ({v ≥ v_k})`. Returns 0 when `l1` is 0.
pub fn weak_l1_quotient(values: &[f64], measures: &[f64], l1: f64) -> f64 {
    assert_eq!(values.len(), measures.len());
    if l1 <= 0.0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = values[order[i]];
        while i < order.len() && values[order[i]] == v {
            mass += measures[order[i]];
            i += 1;
        }
        best = best.max(v * mass);
    }
    best / l1
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`, or `None`
/// when fewer than two distinct abscissae are given.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weak_quotient_of_an_indicator() {
        // 1 on half the space: λ μ(v > λ) → ½, ‖v‖₁ = ½.
        let q = weak_l1_quotient(&[1.0, 0.0], &[0.5, 0.5], 0.5);
        assert_eq!(q, 1.0);
    }

    #[test]
    fn weak_quotient_takes_the_best_level() {
        // Levels: 4 · ¼ = 1, 1 · ¾ = ¾.
        let q = weak_l1_quotient(&[4.0, 1.0, 1.0, 0.0], &[0.25; 4], 1.0);
        assert_eq!(q, 1.0);
        let q = weak_l1_quotient(&[2.0, 1.8, 1.8, 1.8], &[0.25; 4], 1.0);
        assert!((q - 1.8).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_gives_zero() {
        assert_eq!(weak_l1_quotient(&[0.0], &[1.0], 0.0), 0.0);
    }

    #[test]
    fn slope_of_an_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (m, b) = least_squares_slope(&xs, &ys).unwrap();
        assert!((m - 2.5).abs() < 1e-12 && (b + 1.0).abs() < 1e-12);
        assert!(least_squares_slope(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
