use super::{Matrix, NumericsError};

const MAX_ITERATIONS_PER_ROOT: usize = 60;

/// Eigenvalues of a real matrix as (re, im) pairs. Complex eigenvalues appear
/// as adjacent conjugate pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub eigenvalues: Vec<(f64, f64)>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.0).fold(f64::INFINITY, f64::min)
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|(re, im)| re.hypot(*im))
            .fold(0.0, f64::max)
    }

    pub fn sum(&self) -> (f64, f64) {
        self.eigenvalues
            .iter()
            .fold((0.0, 0.0), |(a, b), (re, im)| (a + re, b + im))
    }

    pub fn product(&self) -> (f64, f64) {
        self.eigenvalues
            .iter()
            .fold((1.0, 0.0), |(a, b), (re, im)| (a * re - b * im, a * im + b * re))
    }

    /// Eigenvalues sorted by descending real part (ties by imaginary part).
    pub fn sorted_by_real_desc(&self) -> Vec<(f64, f64)> {
        let mut out = self.eigenvalues.clone();
        out.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
        out
    }
}

/// All eigenvalues of a square real matrix: balancing, reduction to upper
/// Hessenberg form by stabilised elimination, then Francis double-shift QR.
/// Sizes one and two are solved in closed form.
pub fn eigenvalues(a: &Matrix) -> Result<ComplexSpectrum, NumericsError> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    a.check_finite()?;
    let n = a.rows();
    let eigenvalues = match n {
        0 => Vec::new(),
        1 => vec![(a[(0, 0)], 0.0)],
        2 => two_by_two(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]),
        _ => {
            // 1-based working copy, row/col 0 unused
            let mut h = vec![vec![0.0; n + 1]; n + 1];
            for i in 0..n {
                for j in 0..n {
                    h[i + 1][j + 1] = a[(i, j)];
                }
            }
            balance(&mut h, n);
            hessenberg(&mut h, n);
            hqr(&mut h, n)?
        }
    };
    Ok(ComplexSpectrum { eigenvalues })
}

fn two_by_two(a: f64, b: f64, c: f64, d: f64) -> Vec<(f64, f64)> {
    let half_trace = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // larger-magnitude root first, the other from the determinant
        let big = half_trace + root.copysign(half_trace);
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { half_trace - root };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        vec![(hi, 0.0), (lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        vec![(half_trace, im), (half_trace, -im)]
    }
}

fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut().skip(1) {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    for m in 2..n {
        let mut x: f64 = 0.0;
        let mut pivot = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                pivot = j;
            }
        }
        if pivot != m {
            for j in (m - 1)..=n {
                let tmp = a[pivot][j];
                a[pivot][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut().skip(1) {
                row.swap(pivot, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for j in 1..=n {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
    // drop the stored multipliers so only the Hessenberg band remains
    for i in 3..=n {
        for j in 1..(i - 1) {
            a[i][j] = 0.0;
        }
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<(f64, f64)>, NumericsError> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERATIONS_PER_ROOT {
                        return Err(NumericsError::IterationLimitExceeded(its));
                    }
                    if its == 10 || its == 20 || its == 40 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    pp += r * a[k + 2][j];
                                    a[k + 2][j] -= pp * z;
                                }
                                a[k + 1][j] -= pp * y;
                                a[k][j] -= pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    pp += z * a[i][k + 2];
                                    a[i][k + 2] -= pp * r;
                                }
                                a[i][k + 1] -= pp * q;
                                a[i][k] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_reals(s: &ComplexSpectrum) -> Vec<f64> {
        let mut v: Vec<f64> = s.eigenvalues.iter().map(|e| e.0).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn zero_matrix() {
        let s = eigenvalues(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(s.eigenvalues, vec![(0.0, 0.0), (0.0, 0.0)]);
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let s = eigenvalues(&Matrix::from_rows(&[[0.0, -2.0], [2.0, 0.0]])).unwrap();
        assert_eq!(s.eigenvalues, vec![(0.0, 2.0), (0.0, -2.0)]);
    }

    #[test]
    fn companion_matrix_roots() {
        // roots 1, 2, 3, 4 of x^4 - 10x^3 + 35x^2 - 50x + 24
        let a = Matrix::from_rows(&[
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]);
        let s = eigenvalues(&a).unwrap();
        for (got, want) in sorted_reals(&s).iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn complex_block_in_larger_matrix() {
        let a = Matrix::from_rows(&[
            [1.0, -3.0, 0.0, 0.5],
            [3.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, -2.0, 0.0],
            [0.0, 0.0, 1.0, 5.0],
        ]);
        let s = eigenvalues(&a).unwrap();
        let mut got = s.eigenvalues.clone();
        got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let want = [(-2.0, 0.0), (1.0, -3.0), (1.0, 3.0), (5.0, 0.0)];
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-10 && (g.1 - w.1).abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn non_finite_input() {
        let mut a = Matrix::identity(3);
        a[(1, 2)] = f64::NAN;
        assert_eq!(eigenvalues(&a), Err(NumericsError::NonFiniteEntry { row: 1, col: 2 }));
    }
}
