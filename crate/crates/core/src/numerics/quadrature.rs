use super::NumericsError;

const DEFAULT_SUBDIVISIONS: usize = 2000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let sum = f(center - dx) + f(center + dx);
        kronrod += w * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let raw = ((kronrod - gauss) * half).abs();
    // the plain Gauss/Kronrod gap overstates the error for smooth integrands
    let roundoff = 50.0 * f64::EPSILON * value.abs();
    let error = if raw <= roundoff { 0.0 } else { raw };
    Segment { a, b, value, error }
}

/// Integral of `f` over `[a, b]` to absolute accuracy `tol` by globally
/// adaptive Gauss–Kronrod (7/15) subdivision.
pub fn quadrature(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, NumericsError> {
    quadrature_with_limit(f, a, b, tol, DEFAULT_SUBDIVISIONS)
}

pub fn quadrature_with_limit(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_subdivisions: usize,
) -> Result<f64, NumericsError> {
    assert!(a <= b, "quadrature needs a <= b");
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![kronrod(&mut f, a, b)];
    let mut subdivisions = 0;
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= tol {
            return Ok(segments.iter().map(|s| s.value).sum());
        }
        if subdivisions >= max_subdivisions {
            return Err(NumericsError::SubdivisionLimit(max_subdivisions));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(NumericsError::SubdivisionLimit(subdivisions));
        }
        segments.push(kronrod(&mut f, seg.a, mid));
        segments.push(kronrod(&mut f, mid, seg.b));
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant() {
        assert!((quadrature(|_| 1.0, 0.0, 1.0, 1e-14).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(quadrature(|_| 1.0, 2.0, 2.0, 1e-14).unwrap(), 0.0);
    }

    #[test]
    fn exponential_decay() {
        let (gamma, h) = (1.5f64, 0.1f64);
        let got = quadrature(|t| (-2.0 * gamma * t).exp(), 0.0, h, 1e-14).unwrap();
        let want = (1.0 - (-0.3f64).exp()) / 3.0;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_needs_subdivision() {
        let got = quadrature(|t| (50.0 * t).sin().powi(2), 0.0, 3.0, 1e-12).unwrap();
        let want = 1.5 - (300.0f64).sin() / 200.0;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn subdivision_limit() {
        let r = quadrature_with_limit(|t| (200.0 * t).sin(), 0.0, 10.0, 1e-14, 2);
        assert_eq!(r, Err(NumericsError::SubdivisionLimit(2)));
    }
}
