//! Triangle quadrature in barycentric coordinates (weights sum to one).

const A: f64 = 0.445_948_490_915_965;
const B: f64 = 0.091_576_213_509_771;
const WA: f64 = 0.223_381_589_678_011;
const WB: f64 = 0.109_951_743_655_322;

/// Six-point rule, exact for polynomials of degree 4.
pub const DUNAVANT6: [([f64; 3], f64); 6] = [
    ([A, A, 1.0 - 2.0 * A], WA),
    ([A, 1.0 - 2.0 * A, A], WA),
    ([1.0 - 2.0 * A, A, A], WA),
    ([B, B, 1.0 - 2.0 * B], WB),
    ([B, 1.0 - 2.0 * B, B], WB),
    ([1.0 - 2.0 * B, B, B], WB),
];

/// Edge midpoints, exact for degree 2.
pub const MIDPOINTS3: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dunavant_integrates_quartics() {
        // ∫_T λ₁⁴ = 2|T|·4!/6! on the reference triangle, i.e. 1/15 of |T|
        let weights: f64 = DUNAVANT6.iter().map(|(_, w)| w).sum();
        assert!((weights - 1.0).abs() < 1e-14);
        let q: f64 = DUNAVANT6.iter().map(|(l, w)| w * l[0].powi(4)).sum();
        assert!((q - 1.0 / 15.0).abs() < 1e-12);
        let q: f64 = DUNAVANT6.iter().map(|(l, w)| w * l[0] * l[0] * l[1] * l[2]).sum();
        // 2·2!·1!·1!/6! = 1/180
        assert!((q - 1.0 / 180.0).abs() < 1e-12);
    }
}

/// `(∫₀ᵀ v(t)² dt)^{1/2}` by the trapezoid rule from samples of `v(t)²`.
pub fn trapezoid_l2(times: &[f64], squares: &[f64]) -> f64 {
    assert_eq!(times.len(), squares.len());
    times
        .windows(2)
        .zip(squares.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}
