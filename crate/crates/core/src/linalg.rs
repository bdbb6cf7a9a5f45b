//! Dense complex linear algebra used throughout the library.
//!
//! Provides a Hermitian eigensolver (Householder tridiagonalization followed by
//! implicit-shift QL with eigenvector accumulation), an LU-based linear solver
//! with partial pivoting, and small helpers for inner products and norms. All
//! routines are self-contained and deterministic.

use crate::error::{Error, Result};
use crate::scalar::{r, Real};
use crate::{CMat, CVec, Cx, RVec};
use num_complex::Complex;
use num_traits::Zero;

/// Conjugated inner product `a^H b`.
pub fn cdot<T: Real>(a: &CVec<T>, b: &CVec<T>) -> Cx<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .fold(Complex::zero(), |acc, (x, y)| acc + x.conj() * y)
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr<T: Real>(a: &CVec<T>) -> T {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Euclidean norm of a complex vector.
pub fn norm<T: Real>(a: &CVec<T>) -> T {
    norm_sqr(a).sqrt()
}

/// Squared Frobenius norm of a complex matrix.
pub fn fro_norm_sqr<T: Real>(a: &CMat<T>) -> T {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Rank-one outer product `a b^H`.
pub fn outer<T: Real>(a: &CVec<T>, b: &CVec<T>) -> CMat<T> {
    let (m, n) = (a.len(), b.len());
    CMat::from_shape_fn((m, n), |(i, j)| a[i] * b[j].conj())
}

/// Conjugate transpose.
pub fn dagger<T: Real>(a: &CMat<T>) -> CMat<T> {
    a.t().mapv(|x| x.conj())
}

/// Symmetrizes a nearly Hermitian matrix: `(A + A^H) / 2`.
pub fn hermitize<T: Real>(a: &CMat<T>) -> CMat<T> {
    let at = dagger(a);
    (a + &at).mapv(|x| x * Complex::new(r::<T>(0.5), T::zero()))
}

/// Identity matrix of size n.
pub fn eye<T: Real>(n: usize) -> CMat<T> {
    CMat::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::zero()
        }
    })
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues sorted ascending and the unitary matrix whose columns
/// are the matching eigenvectors, so `A = V diag(w) V^H`. Only the Hermitian
/// part of the input is used.
pub fn eigh<T: Real>(a: &CMat<T>) -> Result<(RVec<T>, CMat<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigh needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((RVec::zeros(0), CMat::zeros((0, 0))));
    }

    // Work on the Hermitian part so tiny asymmetries from accumulated products
    // cannot push the reduction off the tridiagonal form.
    let mut m = hermitize(a);
    let mut q = eye::<T>(n);

    // Householder reduction to Hermitian tridiagonal form. Column k is mapped
    // onto the subdiagonal by a Hermitian unitary H = I - tau v v^H with real
    // tau, applied two-sided via the rank-two update A -= v w^H + w v^H.
    for k in 0..n.saturating_sub(2) {
        let mlen = n - k - 1;
        let mut v = CVec::from_shape_fn(mlen, |i| m[(k + 1 + i, k)]);
        let below: T = v.iter().skip(1).map(|x| x.norm_sqr()).sum();
        let x0 = v[0];
        if below <= T::epsilon() * T::epsilon() * (below + x0.norm_sqr()) {
            continue;
        }
        let nrm = (below + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > T::zero() {
            x0 / Complex::new(x0.norm(), T::zero())
        } else {
            Complex::new(T::one(), T::zero())
        };
        let sigma = phase * Complex::new(nrm, T::zero());
        v[0] += sigma;
        let tau = T::one() / (nrm * (nrm + x0.norm()));

        // p = tau * A22 * v over the trailing block.
        let mut p = CVec::from_elem(mlen, Cx::<T>::zero());
        for i in 0..mlen {
            let mut acc = Cx::<T>::zero();
            for j in 0..mlen {
                acc += m[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = acc * Complex::new(tau, T::zero());
        }
        let kk = cdot(&v, &p) * Complex::new(tau * r::<T>(0.5), T::zero());
        let w = CVec::from_shape_fn(mlen, |i| p[i] - kk * v[i]);
        for i in 0..mlen {
            for j in 0..mlen {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                m[(k + 1 + i, k + 1 + j)] -= upd;
            }
        }
        // Column k itself becomes (-sigma, 0, ..., 0).
        m[(k + 1, k)] = -sigma;
        m[(k, k + 1)] = -sigma.conj();
        for i in 2..=mlen {
            m[(k + i, k)] = Cx::<T>::zero();
            m[(k, k + i)] = Cx::<T>::zero();
        }
        // Accumulate Q <- Q H on the trailing columns.
        for row in 0..n {
            let mut acc = Cx::<T>::zero();
            for j in 0..mlen {
                acc += q[(row, k + 1 + j)] * v[j];
            }
            let acc = acc * Complex::new(tau, T::zero());
            for j in 0..mlen {
                let sub = acc * v[j].conj();
                q[(row, k + 1 + j)] -= sub;
            }
        }
    }

    // Rotate the complex subdiagonal onto the real axis with a diagonal phase
    // matrix, folding the phases into Q's columns.
    let mut d = RVec::from_shape_fn(n, |i| m[(i, i)].re);
    let mut e = RVec::zeros(n);
    let mut dphase = Cx::<T>::new(T::one(), T::zero());
    for i in 0..n - 1 {
        let sub = m[(i + 1, i)];
        let mag = sub.norm();
        e[i] = mag;
        let next = if mag > T::zero() {
            dphase * (sub / Complex::new(mag, T::zero()))
        } else {
            dphase
        };
        for row in 0..n {
            q[(row, i + 1)] = q[(row, i + 1)] * next;
        }
        dphase = next;
    }

    ql_implicit_shift(&mut d, &mut e, &mut q)?;

    // Sort ascending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let w = RVec::from_shape_fn(n, |i| d[order[i]]);
    let vecs = CMat::from_shape_fn((n, n), |(i, j)| q[(i, order[j])]);
    Ok((w, vecs))
}

/// Implicit-shift QL sweep on a real symmetric tridiagonal matrix, rotating the
/// complex eigenvector accumulator alongside. `d` holds the diagonal, `e[i]`
/// couples rows i and i+1.
fn ql_implicit_shift<T: Real>(d: &mut RVec<T>, e: &mut RVec<T>, z: &mut CMat<T>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let eps = T::epsilon();
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut mm = l;
            while mm < n - 1 {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= eps * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical(
                    "tridiagonal QL failed to converge in 60 sweeps".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (e[l] * r::<T>(2.0));
            let mut rr = g.hypot(T::one());
            let denom = g + if g >= T::zero() { rr.abs() } else { -rr.abs() };
            g = d[mm] - d[l] + e[l] / denom;
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                rr = f.hypot(g);
                e[i + 1] = rr;
                if rr == T::zero() {
                    d[i + 1] -= p;
                    e[mm] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / rr;
                c = g / rr;
                g = d[i + 1] - p;
                rr = (d[i] - g) * s + c * b * r::<T>(2.0);
                p = s * rr;
                d[i + 1] = g + p;
                g = c * rr - b;
                for row in 0..n {
                    f = z[(row, i + 1)].re;
                    let fi = z[(row, i + 1)].im;
                    let zr = z[(row, i)];
                    z[(row, i + 1)] = Complex::new(s * zr.re + c * f, s * zr.im + c * fi);
                    z[(row, i)] = Complex::new(c * zr.re - s * f, c * zr.im - s * fi);
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = T::zero();
        }
    }
    Ok(())
}

/// LU factorization with partial pivoting.
pub struct Lu<T: Real> {
    lu: CMat<T>,
    piv: Vec<usize>,
    sign_swaps: usize,
}

impl<T: Real> Lu<T> {
    /// Factors a square complex matrix.
    pub fn new(a: &CMat<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut swaps = 0usize;
        for k in 0..n {
            let mut pk = k;
            let mut best = lu[(k, k)].norm_sqr();
            for i in k + 1..n {
                let m = lu[(i, k)].norm_sqr();
                if m > best {
                    best = m;
                    pk = i;
                }
            }
            if best == T::zero() {
                return Err(Error::Numerical("singular matrix in LU".into()));
            }
            if pk != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pk, j)];
                    lu[(pk, j)] = tmp;
                }
                piv.swap(k, pk);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let sub = factor * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(Self {
            lu,
            piv,
            sign_swaps: swaps,
        })
    }

    /// Solves `A x = b` for one right-hand side.
    pub fn solve_vec(&self, b: &CVec<T>) -> Result<CVec<T>> {
        let n = self.lu.nrows();
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "rhs length {} does not match system size {n}",
                b.len()
            )));
        }
        let mut x = CVec::from_shape_fn(n, |i| b[self.piv[i]]);
        for i in 1..n {
            for j in 0..i {
                let sub = self.lu[(i, j)] * x[j];
                x[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let sub = self.lu[(i, j)] * x[j];
                x[i] -= sub;
            }
            x[i] /= self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &CMat<T>) -> Result<CMat<T>> {
        let n = self.lu.nrows();
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "rhs rows {} do not match system size {n}",
                b.nrows()
            )));
        }
        let mut out = CMat::zeros((n, b.ncols()));
        for j in 0..b.ncols() {
            let col = CVec::from_shape_fn(n, |i| b[(i, j)]);
            let x = self.solve_vec(&col)?;
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    /// Determinant from the factorization.
    pub fn det(&self) -> Cx<T> {
        let n = self.lu.nrows();
        let mut det = (0..n).fold(Cx::<T>::new(T::one(), T::zero()), |acc, i| {
            acc * self.lu[(i, i)]
        });
        if self.sign_swaps % 2 == 1 {
            det = -det;
        }
        det
    }
}

/// Solves `A x = b` for a general square complex system.
pub fn solve<T: Real>(a: &CMat<T>, b: &CVec<T>) -> Result<CVec<T>> {
    Lu::new(a)?.solve_vec(b)
}

/// Matrix inverse through LU.
pub fn inv<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    let n = a.nrows();
    Lu::new(a)?.solve_mat(&eye::<T>(n))
}

/// Inverse square root of a Hermitian positive definite matrix.
///
/// Eigenvalues below `rel_floor` times the largest are clamped to that floor
/// before inversion so nearly singular inputs stay usable.
pub fn inv_sqrt_psd<T: Real>(a: &CMat<T>, rel_floor: T) -> Result<CMat<T>> {
    let (w, v) = eigh(a)?;
    let n = w.len();
    if n == 0 {
        return Ok(CMat::zeros((0, 0)));
    }
    let wmax = w.iter().fold(T::zero(), |m, &x| if x > m { x } else { m });
    if wmax <= T::zero() {
        return Err(Error::Numerical(
            "inverse square root of a non positive matrix".into(),
        ));
    }
    let floor = rel_floor * wmax;
    let scale = RVec::from_shape_fn(n, |i| {
        let lam = if w[i] > floor { w[i] } else { floor };
        T::one() / lam.sqrt()
    });
    // V diag(scale) V^H
    let mut out = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = Cx::<T>::zero();
            for k in 0..n {
                acc += v[(i, k)] * v[(j, k)].conj() * Complex::new(scale[k], T::zero());
            }
            out[(i, j)] = acc;
        }
    }
    Ok(hermitize(&out))
}

/// Largest singular value of a complex matrix, computed from the Gram matrix.
pub fn spectral_norm<T: Real>(a: &CMat<T>) -> Result<T> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(T::zero());
    }
    let gram = if a.nrows() >= a.ncols() {
        dagger(a).dot(a)
    } else {
        a.dot(&dagger(a))
    };
    let (w, _) = eigh(&gram)?;
    let top = w[w.len() - 1];
    Ok(if top > T::zero() { top.sqrt() } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_mat, complex_gaussian_vec, SeedPlan};
    use ndarray::array;

    fn rand_hermitian(n: usize, seed: u64) -> CMat<f64> {
        let mut rng = SeedPlan::new(seed).stream("linalg-test");
        let g = complex_gaussian_mat::<f64, _>(&mut rng, n, n);
        hermitize(&g)
    }

    #[test]
    fn eigh_diagonal_matrix_is_exact() {
        let a = array![
            [Cx::<f64>::new(3.0, 0.0), Cx::new(0.0, 0.0)],
            [Cx::new(0.0, 0.0), Cx::new(-1.0, 0.0)]
        ];
        let (w, v) = eigh(&a).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 3.0).abs() < 1e-14);
        // Columns are unit vectors aligned with the axes.
        assert!((v[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((v[(0, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_two_by_two_analytic() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = array![
            [Cx::<f64>::new(2.0, 0.0), Cx::new(0.0, 1.0)],
            [Cx::new(0.0, -1.0), Cx::new(2.0, 0.0)]
        ];
        let (w, _) = eigh(&a).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_random_matrices() {
        for n in [1usize, 2, 3, 5, 8, 13, 24, 40] {
            let a = rand_hermitian(n, 1000 + n as u64);
            let (w, v) = eigh(&a).unwrap();
            // A V = V diag(w)
            let av = a.dot(&v);
            let mut err = 0.0f64;
            for j in 0..n {
                for i in 0..n {
                    err += (av[(i, j)] - v[(i, j)] * w[j]).norm_sqr();
                }
            }
            let scale = fro_norm_sqr(&a).max(1.0);
            assert!(
                err.sqrt() < 1e-10 * scale.sqrt(),
                "n={n} residual {}",
                err.sqrt()
            );
            // V^H V = I
            let gram = dagger(&v).dot(&v);
            let mut orth = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    orth += (gram[(i, j)] - Cx::new(target, 0.0)).norm_sqr();
                }
            }
            assert!(orth.sqrt() < 1e-10, "n={n} orthogonality {}", orth.sqrt());
            // Trace identity.
            let tr: f64 = (0..n).map(|i| a[(i, i)].re).sum();
            let ws: f64 = w.iter().sum();
            assert!((tr - ws).abs() < 1e-9 * (1.0 + tr.abs()));
            // Ascending order.
            for i in 1..n {
                assert!(w[i] >= w[i - 1]);
            }
        }
    }

    #[test]
    fn eigh_handles_repeated_eigenvalues() {
        let a = eye::<f64>(6).mapv(|x| x * Cx::new(2.5, 0.0));
        let (w, v) = eigh(&a).unwrap();
        for i in 0..6 {
            assert!((w[i] - 2.5).abs() < 1e-13);
        }
        let gram = dagger(&v).dot(&v);
        for i in 0..6 {
            assert!((gram[(i, i)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_solves_random_systems() {
        for n in [1usize, 2, 5, 17, 33] {
            let mut rng = SeedPlan::new(2000 + n as u64).stream("linalg-test");
            let a = complex_gaussian_mat::<f64, _>(&mut rng, n, n);
            let x_true = complex_gaussian_vec::<f64, _>(&mut rng, n);
            let b = a.dot(&x_true);
            let x = solve(&a, &b).unwrap();
            let mut err = 0.0f64;
            for i in 0..n {
                err += (x[i] - x_true[i]).norm_sqr();
            }
            assert!(err.sqrt() < 1e-9 * (1.0 + norm(&x_true)), "n={n}");
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = SeedPlan::new(55).stream("linalg-test");
        let a = complex_gaussian_mat::<f64, _>(&mut rng, 9, 9);
        let ai = inv(&a).unwrap();
        let prod = a.dot(&ai);
        for i in 0..9 {
            for j in 0..9 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Cx::new(target, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_lu_is_rejected() {
        let a = CMat::<f64>::zeros((3, 3));
        assert!(Lu::new(&a).is_err());
    }

    #[test]
    fn inv_sqrt_psd_squares_to_inverse() {
        let n = 7;
        let mut rng = SeedPlan::new(77).stream("linalg-test");
        let g = complex_gaussian_mat::<f64, _>(&mut rng, n, n);
        // Gram matrix plus a ridge is safely positive definite.
        let a = dagger(&g).dot(&g) + eye::<f64>(n).mapv(|x| x * Cx::new(0.1, 0.0));
        let s = inv_sqrt_psd(&a, 1e-14).unwrap();
        let should_be_inv = s.dot(&s);
        let prod = a.dot(&should_be_inv);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (prod[(i, j)] - Cx::new(target, 0.0)).norm() < 1e-8,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn spectral_norm_matches_known_case() {
        // diag(3, 1) embedded in a rectangular matrix.
        let a = array![
            [Cx::<f64>::new(3.0, 0.0), Cx::new(0.0, 0.0)],
            [Cx::new(0.0, 0.0), Cx::new(1.0, 0.0)],
            [Cx::new(0.0, 0.0), Cx::new(0.0, 0.0)]
        ];
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dagger_and_outer_agree() {
        let a = CVec::from_vec(vec![Cx::<f64>::new(1.0, 2.0), Cx::new(0.0, -1.0)]);
        let b = CVec::from_vec(vec![Cx::new(3.0, 0.0), Cx::new(1.0, 1.0)]);
        let ab = outer(&a, &b);
        let ba = outer(&b, &a);
        let abd = dagger(&ab);
        for i in 0..2 {
            for j in 0..2 {
                assert!((abd[(i, j)] - ba[(i, j)]).norm() < 1e-14);
            }
        }
        assert!((cdot(&a, &a) - Cx::new(norm_sqr(&a), 0.0)).norm() < 1e-14);
    }
}
