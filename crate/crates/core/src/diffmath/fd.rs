/// Central-difference gradient `(f(x + h·eᵢ) - f(x - h·eᵢ)) / 2h`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmath::softplus;

    #[test]
    fn quadratic() {
        let g = fd_gradient(|x| x[0] * x[0], &[3.0], 1e-4);
        assert!((g[0] - 6.0).abs() <= 1e-7);
    }

    #[test]
    fn constant_is_zero() {
        let g = fd_gradient(|_| 4.25, &[1.0, -2.0, 0.5], 1e-4);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn softplus_slope_at_zero() {
        let g = fd_gradient(|x| softplus(x[0]), &[0.0], 1e-4);
        assert!((g[0] - 0.5).abs() < 1e-9);
    }
}
