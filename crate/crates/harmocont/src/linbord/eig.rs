//! Eigenvalues of small dense real matrices: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR iteration (the
//! EISPACK `hqr` scheme, eigenvalues only).

use super::Mat;
use crate::error::{Error, Result};
use num_complex::Complex64;

const MAX_ITER_PER_EIGENVALUE: usize = 60;

/// Eigenvalues of a real matrix, sorted by descending real part; ties broken
/// by descending imaginary part. Complex eigenvalues occur in exact
/// conjugate pairs.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

impl Spectrum {
    fn new(mut values: Vec<Complex64>) -> Self {
        values.sort_by(|a, b| {
            b.re.partial_cmp(&a.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        Spectrum { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest real part over the spectrum.
    pub fn max_real_part(&self) -> f64 {
        self.values.first().map(|v| v.re).unwrap_or(f64::NAN)
    }

    /// Representatives (positive imaginary part) of the complex-conjugate
    /// pairs, in spectrum order.
    pub fn complex_pairs(&self) -> Vec<Complex64> {
        self.values.iter().copied().filter(|v| v.im > 0.0).collect()
    }

    /// The complex-pair representative whose real part is closest to zero,
    /// together with the count of pairs tied for that distance within `tol`.
    pub fn pair_closest_to_axis(&self, tol: f64) -> Option<(Complex64, usize)> {
        let pairs = self.complex_pairs();
        let best = pairs
            .iter()
            .copied()
            .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())?;
        let ties = pairs
            .iter()
            .filter(|v| (v.re.abs() - best.re.abs()).abs() <= tol)
            .count();
        Some((best, ties))
    }
}

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(a: &Mat) -> Result<Spectrum> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
            context: "eigenvalue computation needs a square matrix",
        });
    }
    if n == 0 {
        return Ok(Spectrum::new(Vec::new()));
    }
    let mut h = a.clone();
    reduce_to_hessenberg(&mut h);
    let values = francis_qr(&mut h)?;
    Ok(Spectrum::new(values))
}

/// Householder similarity reduction to upper Hessenberg form, in place.
fn reduce_to_hessenberg(h: &mut Mat) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns the
/// eigenvalues. Follows the EISPACK/JAMA `hqr` algorithm.
#[allow(clippy::too_many_lines)]
fn francis_qr(h: &mut Mat) -> Result<Vec<Complex64>> {
    let nn = h.rows();
    let mut eig = vec![Complex64::new(0.0, 0.0); nn];
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let (mut w, mut x, mut y): (f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    while n >= 0 {
        let en = n as usize;

        // look for a single small sub-diagonal element
        let mut l = en;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == en {
            // one root found
            h[(en, en)] += exshift;
            eig[en] = Complex64::new(h[(en, en)], 0.0);
            n -= 1;
            iter = 0;
        } else if l == en - 1 {
            // two roots found
            w = h[(en, en - 1)] * h[(en - 1, en)];
            p = (h[(en - 1, en - 1)] - h[(en, en)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(en, en)] += exshift;
            h[(en - 1, en - 1)] += exshift;
            x = h[(en, en)];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let first = x + z;
                let second = if z != 0.0 { x - w / z } else { first };
                eig[en - 1] = Complex64::new(first, 0.0);
                eig[en] = Complex64::new(second, 0.0);
            } else {
                eig[en - 1] = Complex64::new(x + p, z);
                eig[en] = Complex64::new(x + p, -z);
            }
            n -= 2;
            iter = 0;
        } else {
            // form shift
            x = h[(en, en)];
            y = 0.0;
            w = 0.0;
            if l < en {
                y = h[(en - 1, en - 1)];
                w = h[(en, en - 1)] * h[(en - 1, en)];
            }

            if iter == 10 {
                // exceptional shift
                exshift += x;
                for i in 0..=en {
                    h[(i, i)] -= x;
                }
                s = h[(en, en - 1)].abs() + h[(en - 1, en - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=en {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            if iter > MAX_ITER_PER_EIGENVALUE {
                return Err(Error::EigNonConvergence { index: en });
            }

            // look for two consecutive small sub-diagonal elements
            let mut m = en - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=en {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=en and columns m..=en
            for k in m..en {
                let notlast = k != en - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                } else {
                    x = 1.0;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[(k, k - 1)] = -s * x;
                } else if l != m {
                    h[(k, k - 1)] = -h[(k, k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                // row modification
                for j in k..nn {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if notlast {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * z;
                    }
                    h[(k, j)] -= pp * x;
                    h[(k + 1, j)] -= pp * y;
                }

                // column modification
                for i in 0..=en.min(k + 3) {
                    let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                    if notlast {
                        pp += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k)] -= pp;
                    h[(i, k + 1)] -= pp * q;
                }
            }
        }
    }
    Ok(eig)
}

/// Solves `(A - shift I) x = b` over the complex field by Gaussian
/// elimination with partial pivoting. Used for inverse iteration on
/// near-critical eigenpairs.
pub fn solve_complex(a: &Mat, shift: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
            context: "complex shifted solve",
        });
    }
    let mut m: Vec<Complex64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut v = Complex64::new(a[(i, j)], 0.0);
            if i == j {
                v -= shift;
            }
            m.push(v);
        }
    }
    let mut rhs = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        let mut piv_val = m[k * n + k].norm();
        for i in k + 1..n {
            let v = m[i * n + k].norm();
            if v > piv_val {
                piv_val = v;
                piv = i;
            }
        }
        if piv_val < 1e-300 {
            return Err(Error::Singular { pivot: k });
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            rhs.swap(k, piv);
        }
        let pivot = m[k * n + k];
        for i in k + 1..n {
            let factor = m[i * n + k] / pivot;
            if factor.norm() != 0.0 {
                for j in k + 1..n {
                    let v = m[k * n + j];
                    m[i * n + j] -= factor * v;
                }
                let v = rhs[k];
                rhs[i] -= factor * v;
            }
        }
    }
    for i in (0..n).rev() {
        let mut sum = rhs[i];
        for j in i + 1..n {
            sum -= m[i * n + j] * rhs[j];
        }
        rhs[i] = sum / m[i * n + i];
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linbord::lu_factor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_matrix() {
        let a = Mat::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0]]);
        let spec = eigenvalues(&a).unwrap();
        let re: Vec<f64> = spec.values().iter().map(|v| v.re).collect();
        assert_eq!(re, vec![3.0, 2.0, 1.0]);
        assert!(spec.values().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn rotation_generator() {
        let beta = 2.5;
        let a = Mat::from_rows(&[&[0.0, -beta], &[beta, 0.0]]);
        let spec = eigenvalues(&a).unwrap();
        assert!((spec.values()[0].re).abs() < 1e-12);
        assert!((spec.values()[0].im - beta).abs() < 1e-12);
        assert!((spec.values()[1].im + beta).abs() < 1e-12);
    }

    #[test]
    fn conjugate_pairs_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(2..9);
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.gen_range(-2.0..2.0);
                }
            }
            let spec = eigenvalues(&a).unwrap();
            let mut values: Vec<Complex64> = spec.values().to_vec();
            while let Some(v) = values.pop() {
                if v.im != 0.0 {
                    let partner = values
                        .iter()
                        .position(|u| (u.re - v.re).abs() < 1e-10 && (u.im + v.im).abs() < 1e-10);
                    assert!(partner.is_some(), "unpaired complex eigenvalue {v}");
                    values.remove(partner.unwrap());
                }
            }
        }
    }

    #[test]
    fn product_is_determinant_sum_is_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.gen_range(2..9);
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.gen_range(-2.0..2.0);
                }
            }
            let spec = eigenvalues(&a).unwrap();
            let prod = spec
                .values()
                .iter()
                .fold(Complex64::new(1.0, 0.0), |acc, v| acc * v);
            let sum: Complex64 = spec.values().iter().sum();
            let det = lu_factor(&a).map(|f| f.determinant()).unwrap_or(0.0);
            let scale = det.abs().max(1.0);
            assert!(
                (prod.re - det).abs() / scale < 1e-8,
                "det {det} vs product {prod}"
            );
            assert!(prod.im.abs() / scale < 1e-8);
            assert!((sum.re - a.trace()).abs() < 1e-10 * a.trace().abs().max(1.0));
        }
    }

    /// Characteristic-polynomial oracle: |det(A - lambda I)| must be small
    /// relative to the matrix scale at every reported eigenvalue.
    #[test]
    fn char_poly_residual_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.gen_range(-3.0..3.0);
                }
            }
            let spec = eigenvalues(&a).unwrap();
            let scale: f64 = (0..n)
                .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            for v in spec.values() {
                let det = complex_det_shifted(&a, *v);
                assert!(
                    det.norm() < 1e-7 * scale.powi(n as i32).max(1.0),
                    "residual {} at {v}",
                    det.norm()
                );
            }
        }
    }

    fn complex_det_shifted(a: &Mat, shift: Complex64) -> Complex64 {
        let n = a.rows();
        let mut m: Vec<Complex64> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut v = Complex64::new(a[(i, j)], 0.0);
                if i == j {
                    v -= shift;
                }
                m.push(v);
            }
        }
        let mut det = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let mut piv = k;
            let mut best = m[k * n + k].norm();
            for i in k + 1..n {
                if m[i * n + k].norm() > best {
                    best = m[i * n + k].norm();
                    piv = i;
                }
            }
            if best == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if piv != k {
                for j in 0..n {
                    m.swap(k * n + j, piv * n + j);
                }
                det = -det;
            }
            det *= m[k * n + k];
            let pivot = m[k * n + k];
            for i in k + 1..n {
                let factor = m[i * n + k] / pivot;
                for j in k + 1..n {
                    let v = m[k * n + j];
                    m[i * n + j] -= factor * v;
                }
            }
        }
        det
    }

    #[test]
    fn colpitts_origin_spectrum_at_hopf() {
        // Jacobian of the Colpitts model at the origin for Q=0.8, gamma=0.5,
        // alpha_F=1, G=1; analytically (lambda + 1.25)(lambda^2 + 1).
        let a = Mat::from_rows(&[
            &[0.0, 2.5, 2.5],
            &[0.0, 0.0, 2.5],
            &[-0.2, -0.2, -1.25],
        ]);
        let spec = eigenvalues(&a).unwrap();
        let pairs = spec.complex_pairs();
        assert_eq!(pairs.len(), 1);
        assert!(pairs[0].re.abs() < 1e-8, "pair real part {}", pairs[0].re);
        assert!((pairs[0].im - 1.0).abs() < 1e-9);
        let real: Vec<&Complex64> = spec.values().iter().filter(|v| v.im == 0.0).collect();
        assert_eq!(real.len(), 1);
        assert!((real[0].re + 1.25).abs() < 1e-9);
    }

    #[test]
    fn inverse_iteration_solve() {
        let a = Mat::from_rows(&[&[0.0, -2.0], &[2.0, 0.0]]);
        // (A - (2i + eps) I) q = b should be nearly parallel to the
        // eigenvector (1, -i)/sqrt(2).
        let shift = Complex64::new(1e-8, 2.0);
        let b = vec![Complex64::new(1.0, 0.3), Complex64::new(-0.2, 0.9)];
        let q = solve_complex(&a, shift, &b).unwrap();
        let ratio = q[1] / q[0];
        assert!((ratio - Complex64::new(0.0, -1.0)).norm() < 1e-6);
    }
}
