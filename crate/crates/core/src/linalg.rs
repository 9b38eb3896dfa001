//! Dense helpers for the small constant matrices that show up in the
//! built-in games. Row-major storage throughout.

/// Spectral norm `‖A‖₂` by power iteration on `AᵀA`, stopped once the
/// relative change of the estimate drops below `1e-10`.
pub(crate) fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    let apply = |v: &[f64]| -> Vec<f64> {
        let av: Vec<f64> = (0..rows)
            .map(|r| a[r * cols..(r + 1) * cols].iter().zip(v).map(|(x, y)| x * y).sum())
            .collect();
        let mut out = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c] += a[r * cols + c] * av[r];
            }
        }
        out
    };
    // Deterministic start with no special alignment to any coordinate axis.
    let mut v: Vec<f64> = (0..cols).map(|c| 1.0 + 0.1 * c as f64).collect();
    let mut estimate = 0.0f64;
    for _ in 0..100_000 {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= n);
        let w = apply(&v);
        let lambda = w.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        let next = lambda.max(0.0).sqrt();
        let done = (next - estimate).abs() <= 1e-10 * next.max(f64::MIN_POSITIVE);
        estimate = next;
        v = w;
        if done {
            break;
        }
    }
    estimate
}

/// Cholesky test for positive definiteness of a symmetric `n × n` matrix.
pub(crate) fn is_positive_definite(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return false;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    true
}
