//! Fixed-capacity vectors and matrices for conserved states.
//!
//! Every model in the crate has at most three conserved components, so states
//! are stored as `[T; MAX_VARS]` with the unused trailing entries kept at zero.
//! Linear operations then act on the padding harmlessly.

use crate::scalar::Real;

/// Largest state dimension of any supported model (2D shallow water).
pub const MAX_VARS: usize = 3;

/// Conserved (or entropy-variable) vector, zero padded past the model's `p`.
pub type State<T> = [T; MAX_VARS];

/// Square matrix acting on [`State`]; row-major.
pub type Mat<T> = [[T; MAX_VARS]; MAX_VARS];

/// Spatial position; the second coordinate is ignored in 1D.
pub type Point<T> = [T; 2];

#[inline]
pub fn zero<T: Real>() -> State<T> {
    [T::zero(); MAX_VARS]
}

#[inline]
pub fn zero_mat<T: Real>() -> Mat<T> {
    [[T::zero(); MAX_VARS]; MAX_VARS]
}

#[inline]
pub fn dot<T: Real>(a: &State<T>, b: &State<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn add<T: Real>(a: &State<T>, b: &State<T>) -> State<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: &State<T>, b: &State<T>) -> State<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(s: T, a: &State<T>) -> State<T> {
    [s * a[0], s * a[1], s * a[2]]
}

/// `a + s * b`
#[inline]
pub fn axpy<T: Real>(a: &State<T>, s: T, b: &State<T>) -> State<T> {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn mat_vec<T: Real>(m: &Mat<T>, x: &State<T>) -> State<T> {
    [dot(&m[0], x), dot(&m[1], x), dot(&m[2], x)]
}

/// `mᵀ x`
#[inline]
pub fn mat_t_vec<T: Real>(m: &Mat<T>, x: &State<T>) -> State<T> {
    let mut out = zero();
    for (i, row) in m.iter().enumerate() {
        for (o, &mij) in out.iter_mut().zip(row.iter()) {
            *o = *o + mij * x[i];
        }
    }
    out
}

/// `r diag(lam) rᵀ`
pub fn gram_weighted<T: Real>(r: &Mat<T>, lam: &State<T>) -> Mat<T> {
    let mut out = zero_mat();
    for (i, out_row) in out.iter_mut().enumerate() {
        for (j, o) in out_row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in 0..MAX_VARS {
                acc = acc + r[i][k] * lam[k] * r[j][k];
            }
            *o = acc;
        }
    }
    out
}

/// Copies the first `p` entries of `src` into a zero-padded state.
#[inline]
pub fn from_slice<T: Real>(src: &[T]) -> State<T> {
    let mut s = zero();
    s[..src.len()].copy_from_slice(src);
    s
}

pub fn max_abs<T: Real>(a: &State<T>) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
