//! Small numerical helpers shared by design and estimation.

use nalgebra::DMatrix;

/// Central-difference Jacobian of `f` at `x`, one row per output.
pub fn central_jacobian<F>(f: F, x: &[f64], step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut xp = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = step * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let m = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(m, x.len(), |i, j| cols[j][i])
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with a relative threshold on the largest singular value.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|v| **v > rel_tol * top).count(),
        _ => 0,
    }
}

/// Remove the component along unit vector `n` from every row.
pub fn project_out_rows(m: &DMatrix<f64>, n: &[f64]) -> DMatrix<f64> {
    let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = m.clone();
    if norm == 0.0 {
        return out;
    }
    for i in 0..m.nrows() {
        let dot: f64 = (0..m.ncols()).map(|j| m[(i, j)] * n[j]).sum::<f64>() / (norm * norm);
        for j in 0..m.ncols() {
            out[(i, j)] -= dot * n[j];
        }
    }
    out
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    v[lo] * (1.0 - f) + v[hi] * f
}

/// Ordinary least squares `y = a + b·x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_quadratic() {
        let j = central_jacobian(|x| vec![x[0] * x[0], x[0] * x[1]], &[2.0, 3.0], 1e-6);
        assert!((j[(0, 0)] - 4.0).abs() < 1e-6);
        assert!((j[(1, 1)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn percentiles_and_fit() {
        let v: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert!((percentile(&v, 99.5) - 99.5).abs() < 1e-12);
        let (a, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }
}
