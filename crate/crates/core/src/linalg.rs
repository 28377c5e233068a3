//! Dense complex linear algebra helpers on top of `nalgebra`: SVD with
//! sorted singular values, numerical rank, nullspaces and least-dominant
//! eigenvectors.
//!
//! Rank decisions use the usual convention: singular values at or below
//! `max(rows, cols) * eps * sigma_max` count as zero unless a relative
//! tolerance is given explicitly.

use nalgebra::{ComplexField, DMatrix};

use crate::scalar::{CMat, Cx, Real};

/// Thin SVD `A = U diag(s) V^H` with singular values sorted descending.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: CMat<T>,
    pub singular_values: Vec<T>,
    pub v: CMat<T>,
}

/// `max(rows, cols) * eps * sigma_max`.
pub fn default_rank_tolerance<T: Real>(sigma_max: T, rows: usize, cols: usize) -> T {
    T::lit(rows.max(cols) as f64) * T::eps() * sigma_max
}

fn threshold<T: Real>(sv: &[T], rows: usize, cols: usize, rtol: Option<T>) -> T {
    let smax = sv.first().copied().unwrap_or_else(T::zero);
    match rtol {
        Some(r) => r * smax,
        None => default_rank_tolerance(smax, rows, cols),
    }
}

fn sorted_order<T: Real>(sv: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

pub fn svd<T: Real>(a: &CMat<T>) -> Svd<T> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: CMat::zeros(m, 0),
            singular_values: Vec::new(),
            v: CMat::zeros(n, 0),
        };
    }
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let raw: Vec<T> = dec.singular_values.iter().copied().collect();
    let order = sorted_order(&raw);
    let mut su = CMat::zeros(m, k);
    let mut sv = CMat::zeros(n, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv.set_column(dst, &v_t.row(src).adjoint());
        s.push(raw[src]);
    }
    Svd {
        u: su,
        singular_values: s,
        v: sv,
    }
}

/// Full right singular basis (`cols x cols`), with the singular values
/// padded by zeros up to `cols` entries.
pub fn right_singular_full<T: Real>(a: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let (m, n) = a.shape();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let padded = if m >= n {
        a.clone()
    } else {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    };
    let dec = svd(&padded);
    let mut s = dec.singular_values;
    s.resize(n, T::zero());
    (s, dec.v)
}

pub fn singular_values<T: Real>(a: &CMat<T>) -> Vec<T> {
    if a.nrows().min(a.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<T> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank; `rtol` is relative to the largest singular value.
pub fn numerical_rank<T: Real>(a: &CMat<T>, rtol: Option<T>) -> usize {
    let s = singular_values(a);
    let tol = threshold(&s, a.nrows(), a.ncols(), rtol);
    s.iter().filter(|&&x| x > tol).count()
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number<T: Real>(a: &CMat<T>) -> T {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
        (Some(_), Some(_)) => T::max_value().unwrap_or_else(T::one),
        _ => T::one(),
    }
}

/// Orthonormal basis of the column space.
pub fn column_basis<T: Real>(a: &CMat<T>, rtol: Option<T>) -> CMat<T> {
    let dec = svd(a);
    let tol = threshold(&dec.singular_values, a.nrows(), a.ncols(), rtol);
    let r = dec.singular_values.iter().filter(|&&x| x > tol).count();
    dec.u.columns(0, r).into_owned()
}

/// Orthonormalized copy of `a` with the same column span, or the numerical
/// column rank when `a` is rank deficient.
pub fn orthonormal_columns<T: Real>(a: &CMat<T>) -> Result<CMat<T>, usize> {
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(CMat::zeros(m, 0));
    }
    let rank = numerical_rank(a, None);
    if rank < n {
        return Err(rank);
    }
    Ok(a.clone().qr().q())
}

/// Orthonormal basis of the right nullspace of `a`, in canonical form.
///
/// The raw SVD basis is rotated to reduced column-echelon form and then
/// Gram-Schmidt orthonormalized in pivot order, so the returned basis does
/// not depend on how the SVD resolves repeated zero singular values.
pub fn nullspace<T: Real>(a: &CMat<T>) -> CMat<T> {
    let (m, n) = a.shape();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let (s, v) = right_singular_full(a);
    let tol = threshold(&s, m, n, None);
    let keep: Vec<usize> = (0..n).filter(|&i| s[i] <= tol).collect();
    let mut basis = CMat::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &v.column(src));
    }
    canonical_basis(basis)
}

fn canonical_basis<T: Real>(raw: CMat<T>) -> CMat<T> {
    let (n, r) = raw.shape();
    if r == 0 {
        return raw;
    }
    let pivot_tol = T::lit(1e-8);
    let mut x = raw.clone();
    let mut p = 0;
    for row in 0..n {
        if p == r {
            break;
        }
        let mut best = p;
        let mut best_mag = T::zero();
        for c in p..r {
            let mag = x[(row, c)].modulus();
            if mag > best_mag {
                best = c;
                best_mag = mag;
            }
        }
        if best_mag <= pivot_tol {
            continue;
        }
        x.swap_columns(p, best);
        let inv = Cx::new(T::one(), T::zero()) / x[(row, p)];
        let scaled = x.column(p) * inv;
        x.set_column(p, &scaled);
        for c in 0..r {
            if c == p {
                continue;
            }
            let f = x[(row, c)];
            if f.modulus() > T::zero() {
                let updated = x.column(c) - x.column(p) * f;
                x.set_column(c, &updated);
            }
        }
        p += 1;
    }
    if p < r {
        return raw;
    }
    gram_schmidt(&mut x);
    x
}

/// Modified Gram-Schmidt with one reorthogonalization pass, in place.
pub(crate) fn gram_schmidt<T: Real>(x: &mut CMat<T>) {
    for c in 0..x.ncols() {
        for _ in 0..2 {
            for q in 0..c {
                let proj = x.column(q).dotc(&x.column(c));
                let updated = x.column(c) - x.column(q) * proj;
                x.set_column(c, &updated);
            }
        }
        let norm = x.column(c).norm();
        if norm > T::zero() {
            let updated = x.column(c).unscale(norm);
            x.set_column(c, &updated);
        }
    }
}

/// Rotate each column so its first non-negligible entry is real positive.
pub fn fix_phases<T: Real>(x: &mut CMat<T>) {
    let tiny = T::eps().sqrt();
    for c in 0..x.ncols() {
        let scale = x.column(c).norm();
        let lead = x.column(c).iter().copied().find(|z| z.modulus() > tiny * scale);
        if let Some(z) = lead {
            let phase = z.conj() / Cx::new(z.modulus(), T::zero());
            let updated = x.column(c) * phase;
            x.set_column(c, &updated);
        }
    }
}

/// The `count` eigenvectors of a Hermitian matrix with the smallest
/// eigenvalues (ascending), with the phase convention of [`fix_phases`].
pub fn least_eigenvectors<T: Real>(h: &CMat<T>, count: usize) -> (CMat<T>, Vec<T>) {
    let n = h.nrows();
    if count == 0 || n == 0 {
        return (CMat::zeros(n, 0), Vec::new());
    }
    let sym = (h + h.adjoint()).unscale(T::lit(2.0));
    let eig = sym.symmetric_eigen();
    let vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut out = CMat::zeros(n, count);
    let mut picked = Vec::with_capacity(count);
    for (dst, &src) in idx.iter().take(count).enumerate() {
        out.set_column(dst, &eig.eigenvectors.column(src));
        picked.push(vals[src]);
    }
    fix_phases(&mut out);
    (out, picked)
}

/// The `count` left singular vectors of `a` belonging to its smallest
/// singular values (counting structural zeros when `a` is wide).
pub fn least_left_singular<T: Real>(a: &CMat<T>, count: usize) -> CMat<T> {
    let m = a.nrows();
    let (_, v) = right_singular_full(&a.adjoint());
    v.columns(m - count, count).into_owned()
}

/// `a - B B^H a` for an orthonormal `basis`.
pub fn project_out<T: Real>(a: &CMat<T>, basis: &CMat<T>) -> CMat<T> {
    a - basis * (basis.adjoint() * a)
}

/// Squared Frobenius norm.
pub fn frobenius_sq<T: Real>(a: &CMat<T>) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.modulus_squared())
}

/// Identity-like `rows x cols` complex matrix.
pub fn eye<T: Real>(rows: usize, cols: usize) -> CMat<T> {
    DMatrix::identity(rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cx<f64> {
        Cx::new(re, im)
    }

    #[test]
    fn nullspace_of_zero_and_identity() {
        let z = CMat::<f64>::zeros(3, 4);
        assert_eq!(nullspace(&z).ncols(), 4);
        let i = eye::<f64>(4, 4);
        assert_eq!(nullspace(&i).ncols(), 0);
    }

    #[test]
    fn nullspace_of_block_all_ones() {
        // six 1x2 blocks of ones on the block diagonal of a 6x12 matrix
        let mut p = CMat::<f64>::zeros(6, 12);
        for b in 0..6 {
            p[(b, 2 * b)] = c(1.0, 0.0);
            p[(b, 2 * b + 1)] = c(1.0, 0.0);
        }
        let ns = nullspace(&p);
        assert_eq!(ns.ncols(), 6);
        let h = 1.0 / 2f64.sqrt();
        for col in 0..6 {
            let support: Vec<usize> = (0..12).filter(|&r| ns[(r, col)].norm() > 1e-12).collect();
            assert_eq!(support.len(), 2, "column {col} support {support:?}");
            let (a, b) = (support[0], support[1]);
            assert_eq!(a / 2, b / 2);
            assert!((ns[(a, col)] - c(h, 0.0)).norm() < 1e-12);
            assert!((ns[(b, col)] - c(-h, 0.0)).norm() < 1e-12);
        }
        assert!((&p * &ns).norm() < 1e-12);
    }

    #[test]
    fn rank_and_column_basis() {
        let a = CMat::<f64>::from_fn(4, 3, |r, col| c((r + 1) as f64, col as f64));
        // columns are r+1 + i*col: rank 2
        assert_eq!(numerical_rank(&a, None), 2);
        let b = column_basis(&a, None);
        assert_eq!(b.ncols(), 2);
        assert!(project_out(&a, &b).norm() < 1e-12);
        assert!(orthonormal_columns(&a).is_err());
    }

    #[test]
    fn least_eigenvectors_are_sorted_with_phase_fixed() {
        let h = CMat::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(3.0, 0.0),
            c(1.0, 0.0),
            c(2.0, 0.0),
        ]));
        let (v, vals) = least_eigenvectors(&h, 2);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        assert!((v[(1, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((v[(2, 1)] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn least_left_singular_spans_complement() {
        let a = CMat::<f64>::from_fn(4, 2, |r, col| c((r * col + 1) as f64, r as f64));
        let u = least_left_singular(&a, 2);
        assert!((u.adjoint() * &a).norm() < 1e-12);
        assert!((u.adjoint() * &u - eye::<f64>(2, 2)).norm() < 1e-12);
    }
}
