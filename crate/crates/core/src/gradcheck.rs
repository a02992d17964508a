//! Finite-difference helpers used to verify analytic gradients.

/// Fourth-order central difference of `f` at `x` with step `h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_polynomial() {
        let d = central_difference(|x| x.powi(3) - 2.0 * x, 1.5, 1e-3);
        assert!((d - (3.0 * 2.25 - 2.0)).abs() < 1e-10);
        assert!(relative_error(1.0, 1.0 + 1e-9, 1e-12) < 1e-8);
    }
}
