/// Absolute floor used in the denominator of [`relative_error`].
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

/// Central-difference gradient of `f` at `p`.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, p: &[f64], eps: f64) -> Vec<f64> {
    let mut work = p.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let plus = f(&work);
        work[i] = orig - eps;
        let minus = f(&work);
        work[i] = orig;
        grad.push((plus - minus) / (2.0 * eps));
    }
    grad
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| relative_error(a, b))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_two_p() {
        let p = [1.5, -0.25, 3.0];
        let g = finite_diff_grad(|q| q.iter().map(|x| x * x).sum(), &p, 1e-5);
        for (gi, pi) in g.iter().zip(p) {
            assert!((gi - 2.0 * pi).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, 2.0], 1e-5);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-12);
    }
}
