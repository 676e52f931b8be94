use super::{Matrix, NumericsError};

// Largest ‖A‖₁·t accepted; beyond this the squaring phase loses all accuracy.
const MAX_SCALED_NORM: f64 = 1e6;
const TAYLOR_TERMS: usize = 24;

/// `e^{At}` by scaling and squaring around a truncated Taylor series. The
/// matrix is scaled by `2^-s` until its 1-norm is at most 1/4, so 24 terms
/// put the truncation error far below double precision.
pub fn matrix_exp(a: &Matrix, t: f64) -> Result<Matrix, NumericsError> {
    assert!(a.is_square(), "exponential of a non-square matrix");
    a.check_finite()?;
    assert!(t >= 0.0 && t.is_finite(), "matrix_exp needs a finite t >= 0");
    let n = a.rows();
    if t == 0.0 || n == 0 {
        return Ok(Matrix::identity(n));
    }
    let at = a.scale(t);
    let norm = at.norm_1();
    if !(norm <= MAX_SCALED_NORM) {
        return Err(NumericsError::NormOverflow(norm));
    }
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > 0.25 {
        scaled_norm *= 0.5;
        squarings += 1;
    }
    let x = at.scale(0.5f64.powi(squarings as i32));

    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = term.matmul(&x).scale(1.0 / k as f64);
        result = result.add(&term);
        if term.max_abs() <= f64::EPSILON * 1e-3 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result.check_finite()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn zero_time_is_identity() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(matrix_exp(&a, 0.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn diagonal_case() {
        let e = matrix_exp(&Matrix::diag(&[-1.0, -2.0]), 1.0).unwrap();
        let want = Matrix::diag(&[(-1.0f64).exp(), (-2.0f64).exp()]);
        assert!(max_diff(&e, &want) < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        let a = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        let t = 2.5f64;
        let e = matrix_exp(&a, t).unwrap();
        let want = Matrix::from_rows(&[[t.cos(), -t.sin()], [t.sin(), t.cos()]]);
        assert!(max_diff(&e, &want) < 1e-13);
    }

    #[test]
    fn nilpotent_is_exact() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        let e = matrix_exp(&a, 3.0).unwrap();
        assert!(max_diff(&e, &Matrix::from_rows(&[[1.0, 3.0], [0.0, 1.0]])) < 1e-14);
    }

    #[test]
    fn two_state_generator_closed_form() {
        // P_00(t) = b/(a+b) + a/(a+b) e^{-(a+b)t}
        let (ra, rb) = (2.0, 3.0);
        let q = Matrix::from_rows(&[[-ra, ra], [rb, -rb]]);
        let t = 0.7f64;
        let e = matrix_exp(&q, t).unwrap();
        let s = ra + rb;
        let p00 = rb / s + ra / s * (-s * t).exp();
        assert!((e[(0, 0)] - p00).abs() < 1e-14);
        assert!((e[(0, 0)] + e[(0, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let mut a = Matrix::identity(2);
        a[(0, 1)] = f64::INFINITY;
        assert_eq!(matrix_exp(&a, 1.0), Err(NumericsError::NonFiniteEntry { row: 0, col: 1 }));
        assert!(matches!(
            matrix_exp(&Matrix::identity(2), 1e7),
            Err(NumericsError::NormOverflow(_))
        ));
    }
}
