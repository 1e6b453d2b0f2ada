//! Complex scalars viewed as two-dimensional real Gaussians.
//!
//! A complex random variable `z` is handled through its interleaved real
//! representation `(Re z, Im z)`. Every message and EP site in the crate is a
//! 2-dimensional real Gaussian, stored either in moment form ([`MomentGauss2`])
//! or in canonical form ([`CanonGauss2`]). The canonical form may be improper
//! (zero or indefinite precision); it is only rejected when converted to
//! moments.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A complex scalar. Stored values are expected to be finite.
pub type ComplexScalar = Complex64;

/// Slack used when checking that a covariance is positive semidefinite.
///
/// The smallest eigenvalue may dip to `-EPS_PSD * max(1, largest eigenvalue)`.
pub const EPS_PSD: f64 = 1e-12;

/// Strict positivity threshold on the smallest eigenvalue of a precision.
pub const EPS_PD: f64 = 0.0;

/// Two real components interpreted as `(Re, Im)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RealVec2(pub [f64; 2]);

impl RealVec2 {
    pub const ZERO: Self = RealVec2([0.0, 0.0]);

    pub const fn new(re: f64, im: f64) -> Self {
        RealVec2([re, im])
    }

    pub fn from_complex(z: ComplexScalar) -> Self {
        RealVec2([z.re, z.im])
    }

    pub fn to_complex(self) -> ComplexScalar {
        Complex64::new(self.0[0], self.0[1])
    }

    pub fn dot(self, other: Self) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    pub fn norm_l1(self) -> f64 {
        self.0[0].abs() + self.0[1].abs()
    }

    pub fn max_abs(self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for RealVec2 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for RealVec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        RealVec2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Sub for RealVec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        RealVec2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Neg for RealVec2 {
    type Output = Self;
    fn neg(self) -> Self {
        RealVec2([-self.0[0], -self.0[1]])
    }
}

impl Mul<f64> for RealVec2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        RealVec2([self.0[0] * s, self.0[1] * s])
    }
}

/// A 2x2 real matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Self = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Self = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Mat2([[a, 0.0], [0.0, d]])
    }

    pub const fn scalar(s: f64) -> Self {
        Mat2::diag(s, s)
    }

    /// The rotation-scaling block `[[Re z, -Im z], [Im z, Re z]]` that acts on
    /// interleaved vectors like multiplication by `z`.
    pub fn from_complex(z: ComplexScalar) -> Self {
        Mat2([[z.re, -z.im], [z.im, z.re]])
    }

    pub fn outer(u: RealVec2, v: RealVec2) -> Self {
        Mat2([[u[0] * v[0], u[0] * v[1]], [u[1] * v[0], u[1] * v[1]]])
    }

    pub fn transpose(self) -> Self {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn trace(self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = self.0;
        let inv = Mat2([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ]);
        inv.is_finite().then_some(inv)
    }

    /// `(m + m^T) / 2`.
    pub fn symmetrize(self) -> Self {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        Mat2([[self.0[0][0], off], [off, self.0[1][1]]])
    }

    /// `t * self * t^T`.
    pub fn congruence(self, t: Mat2) -> Self {
        t * self * t.transpose()
    }

    /// Eigenvalues `(smallest, largest)` of the symmetric part.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let s = self.symmetrize().0;
        let (a, b, d) = (s[0][0], s[0][1], s[1][1]);
        let mid = 0.5 * (a + d);
        let h = 0.5 * (a - d);
        let rad = (h * h + b * b).sqrt();
        let det = a * d - b * b;
        if mid >= 0.0 {
            let hi = mid + rad;
            let lo = if hi > 0.0 { det / hi } else { mid - rad };
            (lo.min(hi), hi)
        } else {
            let lo = mid - rad;
            let hi = if lo < 0.0 { det / lo } else { mid + rad };
            (lo, hi.max(lo))
        }
    }

    /// Replace negative eigenvalues of the symmetric part by zero.
    pub fn project_psd(self) -> Self {
        let s = self.symmetrize();
        let m = s.0;
        if m[0][0] >= 0.0 && m[1][1] >= 0.0 && m[0][0] * m[1][1] >= m[0][1] * m[0][1] {
            return s;
        }
        let (lo, hi) = s.sym_eigenvalues();
        if lo >= 0.0 {
            return s;
        }
        if hi <= 0.0 {
            return Mat2::ZERO;
        }
        // Rank-one part along the top eigenvector.
        let m = s.0;
        let v = if (m[0][0] - lo).abs() >= (m[1][1] - lo).abs() {
            RealVec2::new(m[0][0] - lo, m[1][0])
        } else {
            RealVec2::new(m[0][1], m[1][1] - lo)
        };
        let n2 = v.dot(v);
        if n2 == 0.0 {
            return Mat2::ZERO;
        }
        Mat2::outer(v, v) * (hi / n2)
    }

    /// Raise every eigenvalue of the symmetric part to at least `floor`.
    pub fn with_eigen_floor(self, floor: f64) -> Self {
        let s = self.symmetrize();
        let (lo, hi) = s.sym_eigenvalues();
        if lo >= floor {
            return s;
        }
        if hi <= floor {
            return Mat2::scalar(floor);
        }
        // s = lo * P_lo + hi * P_hi with P_lo + P_hi = I.
        let p_hi = (s - Mat2::scalar(lo)) * (1.0 / (hi - lo));
        Mat2::scalar(floor) + p_hi * (hi - floor)
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_symmetric(self) -> bool {
        self.0[0][1] == self.0[1][0]
    }
}

impl Index<(usize, usize)> for Mat2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl Add for Mat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Neg for Mat2 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul for Mat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<RealVec2> for Mat2 {
    type Output = RealVec2;
    fn mul(self, v: RealVec2) -> RealVec2 {
        let a = self.0;
        RealVec2([
            a[0][0] * v[0] + a[0][1] * v[1],
            a[1][0] * v[0] + a[1][1] * v[1],
        ])
    }
}

impl Mul<f64> for Mat2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        let a = self.0;
        Mat2([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }
}

/// True iff both eigenvalues of the symmetrized matrix exceed [`EPS_PD`].
pub fn is_positive_definite(m: Mat2) -> bool {
    let (lo, _) = m.sym_eigenvalues();
    lo > EPS_PD
}

/// True iff the symmetrized matrix is positive semidefinite up to [`EPS_PSD`]
/// relative slack.
pub fn is_positive_semidefinite(m: Mat2) -> bool {
    let s = m.symmetrize().0;
    if s[0][0] >= 0.0 && s[1][1] >= 0.0 && s[0][0] * s[1][1] >= s[0][1] * s[0][1] {
        return true;
    }
    let (lo, hi) = m.sym_eigenvalues();
    lo >= -EPS_PSD * hi.abs().max(1.0)
}

/// Inverse of a symmetric positive definite 2x2 matrix.
fn spd_inverse(m: Mat2) -> Result<Mat2> {
    let m = m.symmetrize();
    if !is_positive_definite(m) {
        return Err(Error::NotPositiveDefinite);
    }
    m.inverse()
        .map(Mat2::symmetrize)
        .ok_or(Error::NotPositiveDefinite)
}

/// A 2-dimensional real Gaussian in moment form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentGauss2 {
    pub mean: RealVec2,
    pub cov: Mat2,
}

impl MomentGauss2 {
    pub fn new(mean: RealVec2, cov: Mat2) -> Self {
        MomentGauss2 { mean, cov }
    }

    /// Circular Gaussian with per-dimension variance `var`.
    pub fn circular(mean: ComplexScalar, var: f64) -> Self {
        MomentGauss2::new(RealVec2::from_complex(mean), Mat2::scalar(var))
    }

    /// Zero mean, covariance `v_large * I`: the stand-in for an
    /// uninformative message.
    pub fn flat(v_large: f64) -> Self {
        MomentGauss2::new(RealVec2::ZERO, Mat2::scalar(v_large))
    }

    pub fn to_canon(&self) -> Result<CanonGauss2> {
        moment_to_canon(self)
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.cov.is_finite()
    }

    /// Normalized product of two densities.
    ///
    /// Uses the canonical form when both covariances are positive definite
    /// and falls back to the moment-form update anchored on the tighter
    /// factor otherwise. Returns `None` when the product is not proper.
    pub fn fuse(&self, other: &MomentGauss2) -> Option<MomentGauss2> {
        if let (Ok(a), Ok(b)) = (self.to_canon(), other.to_canon()) {
            if let Ok(m) = gauss_product_canon(&a, &b).to_moment() {
                return Some(m);
            }
        }
        let (tight, wide) = if self.cov.trace() <= other.cov.trace() {
            (self, other)
        } else {
            (other, self)
        };
        let gain = tight.cov * (tight.cov + wide.cov).symmetrize().inverse()?;
        let mean = tight.mean + gain * (wide.mean - tight.mean);
        let cov = (tight.cov - gain * tight.cov).project_psd();
        let out = MomentGauss2::new(mean, cov);
        out.is_finite().then_some(out)
    }
}

/// A 2-dimensional real Gaussian in canonical (information) form:
/// `exp(info^T x - x^T prec x / 2)`, possibly improper.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CanonGauss2 {
    pub info: RealVec2,
    pub prec: Mat2,
}

impl CanonGauss2 {
    /// The uninformative site: zero information and zero precision.
    pub const ZERO: Self = CanonGauss2 {
        info: RealVec2::ZERO,
        prec: Mat2::ZERO,
    };

    pub fn new(info: RealVec2, prec: Mat2) -> Self {
        CanonGauss2 { info, prec }
    }

    pub fn to_moment(&self) -> Result<MomentGauss2> {
        canon_to_moment(self)
    }

    pub fn is_proper(&self) -> bool {
        is_positive_definite(self.prec)
    }

    pub fn is_zero(&self) -> bool {
        *self == CanonGauss2::ZERO
    }

    pub fn is_finite(&self) -> bool {
        self.info.is_finite() && self.prec.is_finite()
    }

    /// `a * self + b * other`, applied to both parameters.
    pub fn blend(&self, a: f64, other: &CanonGauss2, b: f64) -> CanonGauss2 {
        CanonGauss2::new(
            self.info * a + other.info * b,
            self.prec * a + other.prec * b,
        )
    }
}

impl Add for CanonGauss2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        gauss_product_canon(&self, &o)
    }
}

impl Sub for CanonGauss2 {
    type Output = Self;
    /// Division of densities.
    fn sub(self, o: Self) -> Self {
        CanonGauss2::new(self.info - o.info, self.prec - o.prec)
    }
}

/// `cov = prec^-1`, `mean = prec^-1 info`.
pub fn canon_to_moment(g: &CanonGauss2) -> Result<MomentGauss2> {
    let cov = spd_inverse(g.prec)?;
    Ok(MomentGauss2::new(cov * g.info, cov))
}

/// `prec = cov^-1`, `info = cov^-1 mean`.
pub fn moment_to_canon(g: &MomentGauss2) -> Result<CanonGauss2> {
    let prec = spd_inverse(g.cov)?;
    Ok(CanonGauss2::new(prec * g.mean, prec))
}

/// Product of two canonical Gaussians: parameters add. The result may be
/// improper.
pub fn gauss_product_canon(a: &CanonGauss2, b: &CanonGauss2) -> CanonGauss2 {
    CanonGauss2::new(a.info + b.info, a.prec + b.prec)
}

/// Interleaved real representation `(Re a1, Im a1, Re a2, Im a2, ...)` of a
/// complex vector.
#[derive(Clone, Debug, PartialEq)]
pub struct InterleavedVec(Vec<f64>);

impl InterleavedVec {
    pub fn from_real(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch {
                expected: values.len() + 1,
                found: values.len(),
            });
        }
        Ok(InterleavedVec(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn component(&self, n: usize) -> RealVec2 {
        RealVec2([self.0[2 * n], self.0[2 * n + 1]])
    }

    pub fn to_complex(&self) -> Vec<ComplexScalar> {
        self.0
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    }
}

/// Interleaved real representation of a complex matrix: each entry becomes
/// the 2x2 block `[[Re, -Im], [Im, Re]]`.
#[derive(Clone, Debug)]
pub struct InterleavedMat(Mat<f64>);

impl InterleavedMat {
    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.0
    }

    pub fn block(&self, i: usize, j: usize) -> Mat2 {
        let m = &self.0;
        Mat2::new(
            m[(2 * i, 2 * j)],
            m[(2 * i, 2 * j + 1)],
            m[(2 * i + 1, 2 * j)],
            m[(2 * i + 1, 2 * j + 1)],
        )
    }

    /// Checks the rotation-scaling structure of every block.
    pub fn has_block_structure(&self) -> bool {
        (0..self.0.nrows() / 2).all(|i| {
            (0..self.0.ncols() / 2).all(|j| {
                let b = self.block(i, j);
                b[(0, 0)] == b[(1, 1)] && b[(0, 1)] == -b[(1, 0)]
            })
        })
    }

    pub fn mul_vec(&self, v: &InterleavedVec) -> InterleavedVec {
        let m = &self.0;
        let out = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v.0[c]).sum())
            .collect();
        InterleavedVec(out)
    }
}

pub fn underline_vec(a: &[ComplexScalar]) -> InterleavedVec {
    InterleavedVec(a.iter().flat_map(|z| [z.re, z.im]).collect())
}

pub fn underline_mat(a: MatRef<'_, ComplexScalar>) -> InterleavedMat {
    let mut out = Mat::<f64>::zeros(2 * a.nrows(), 2 * a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    InterleavedMat(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexScalar {
        Complex64::new(re, im)
    }

    #[test]
    fn underline_vec_examples() {
        assert_eq!(underline_vec(&[c(1.0, 2.0)]).as_slice(), &[1.0, 2.0]);
        assert_eq!(
            underline_vec(&[c(0.0, 1.0), c(-1.0, 0.0)]).as_slice(),
            &[0.0, 1.0, -1.0, 0.0]
        );
    }

    #[test]
    fn underline_mat_examples() {
        let j = Mat::from_fn(1, 1, |_, _| c(0.0, 1.0));
        let u = underline_mat(j.as_ref());
        assert_eq!(u.block(0, 0), Mat2::new(0.0, -1.0, 1.0, 0.0));

        let eye =
            Mat::<ComplexScalar>::from_fn(3, 3, |i, k| c(if i == k { 1.0 } else { 0.0 }, 0.0));
        let u = underline_mat(eye.as_ref());
        for r in 0..6 {
            for k in 0..6 {
                assert_eq!(u.as_ref()[(r, k)], if r == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn underline_mat_dft2_times_vector() {
        let w = Mat::from_fn(2, 2, |i, k| {
            if i * k == 1 {
                c(-1.0, 0.0)
            } else {
                c(1.0, 0.0)
            }
        });
        let b = [c(1.0, 0.0), c(0.0, 1.0)];
        let lhs = underline_mat(w.as_ref()).mul_vec(&underline_vec(&b));
        assert_eq!(lhs.as_slice(), &[1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn conversion_examples() {
        let m = canon_to_moment(&CanonGauss2::new(RealVec2::ZERO, Mat2::IDENTITY)).unwrap();
        assert_eq!(m, MomentGauss2::new(RealVec2::ZERO, Mat2::IDENTITY));

        let m = canon_to_moment(&CanonGauss2::new(
            RealVec2::new(2.0, 0.0),
            Mat2::scalar(2.0),
        ))
        .unwrap();
        assert_eq!(m.mean, RealVec2::new(1.0, 0.0));
        assert_eq!(m.cov, Mat2::scalar(0.5));

        let g = moment_to_canon(&MomentGauss2::new(
            RealVec2::new(1.0, 0.0),
            Mat2::scalar(0.5),
        ))
        .unwrap();
        assert_eq!(g.info, RealVec2::new(2.0, 0.0));
        assert_eq!(g.prec, Mat2::scalar(2.0));
    }

    #[test]
    fn conversion_rejects_non_pd() {
        let bad = CanonGauss2::new(RealVec2::ZERO, Mat2::diag(1.0, -0.1));
        assert_eq!(canon_to_moment(&bad), Err(Error::NotPositiveDefinite));
        assert_eq!(
            canon_to_moment(&CanonGauss2::ZERO),
            Err(Error::NotPositiveDefinite)
        );
        let flat_cov = MomentGauss2::new(RealVec2::ZERO, Mat2::diag(1.0, 0.0));
        assert_eq!(moment_to_canon(&flat_cov), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn product_examples() {
        let a = CanonGauss2::new(RealVec2::new(0.3, -1.2), Mat2::new(2.0, 0.1, 0.1, 1.0));
        assert_eq!(gauss_product_canon(&a, &CanonGauss2::ZERO), a);

        let p = gauss_product_canon(
            &CanonGauss2::new(RealVec2::new(1.0, 0.0), Mat2::IDENTITY),
            &CanonGauss2::new(RealVec2::new(0.0, 1.0), Mat2::IDENTITY),
        );
        assert_eq!(
            p,
            CanonGauss2::new(RealVec2::new(1.0, 1.0), Mat2::scalar(2.0))
        );

        // k copies of one proper site keep its mean.
        let single = a.to_moment().unwrap();
        let mut acc = CanonGauss2::ZERO;
        for _ in 0..5 {
            acc = acc + a;
        }
        let prod = acc.to_moment().unwrap();
        assert!((prod.mean - single.mean).max_abs() < 1e-14);
    }

    #[test]
    fn pd_examples() {
        assert!(is_positive_definite(Mat2::IDENTITY));
        assert!(!is_positive_definite(Mat2::diag(1.0, -0.1)));
        assert!(is_positive_definite(Mat2::new(1.0, 0.999, 0.999, 1.0)));
        assert!(!is_positive_definite(Mat2::ZERO));
    }

    #[test]
    fn pd_agrees_with_eigen_decomposition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let d: f64 = rng.random_range(-2.0..2.0);
            let oracle = nalgebra::Matrix2::new(a, b, b, d).symmetric_eigen();
            let min_eig = oracle.eigenvalues.min();
            assert_eq!(
                is_positive_definite(Mat2::new(a, b, b, d)),
                min_eig > 0.0,
                "{a} {b} {d}"
            );
        }
    }

    #[test]
    fn psd_projection_and_floor() {
        let m = Mat2::new(1.0, 2.0, 2.0, 1.0); // eigenvalues -1, 3
        let p = m.project_psd();
        let (lo, hi) = p.sym_eigenvalues();
        assert!(lo.abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let f = Mat2::diag(1.0, 0.0).with_eigen_floor(1e-3);
        assert_eq!(f, Mat2::diag(1.0, 1e-3));
        let r = Mat2::new(2.0, 0.5, 0.5, 1.0);
        assert_eq!(r.with_eigen_floor(1e-3), r);
    }

    #[test]
    fn fuse_flat_with_proper() {
        let proper = MomentGauss2::new(RealVec2::new(1.0, -2.0), Mat2::new(0.5, 0.1, 0.1, 0.3));
        let fused = MomentGauss2::flat(1e12).fuse(&proper).unwrap();
        assert!((fused.mean - proper.mean).max_abs() < 1e-9);
        assert!((fused.cov - proper.cov).max_abs() < 1e-9);
        // Singular covariance falls back to the moment-form update.
        let point = MomentGauss2::new(RealVec2::new(3.0, 0.0), Mat2::diag(1.0, 0.0));
        let fused = point.fuse(&proper).unwrap();
        assert!(is_positive_semidefinite(fused.cov));
    }

    fn spd() -> impl Strategy<Value = Mat2> {
        (0.05f64..5.0, 0.05f64..5.0, -1.0f64..1.0).prop_map(|(a, d, r)| {
            let b = r * (a * d).sqrt() * 0.95;
            Mat2::new(a, b, b, d)
        })
    }

    fn canon() -> impl Strategy<Value = CanonGauss2> {
        (
            -3.0f64..3.0,
            -3.0f64..3.0,
            -3.0f64..3.0,
            -3.0f64..3.0,
            -3.0f64..3.0,
        )
            .prop_map(|(x, y, a, b, d)| {
                CanonGauss2::new(RealVec2::new(x, y), Mat2::new(a, b, b, d))
            })
    }

    fn cmat(n: usize) -> impl Strategy<Value = Mat<ComplexScalar>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |v| Mat::from_fn(n, n, |i, j| c(v[i * n + j].0, v[i * n + j].1)))
    }

    proptest! {
        #[test]
        fn underline_is_ring_homomorphism((a, b) in (1usize..=8).prop_flat_map(|n| (cmat(n), cmat(n)))) {
            let prod = underline_mat((&a * &b).as_ref()).into_inner();
            let lhs = underline_mat(a.as_ref()).into_inner() * underline_mat(b.as_ref()).into_inner();
            let sum = underline_mat((&a + &b).as_ref()).into_inner();
            let lhs_sum = underline_mat(a.as_ref()).into_inner() + underline_mat(b.as_ref()).into_inner();
            for i in 0..prod.nrows() {
                for j in 0..prod.ncols() {
                    prop_assert!((prod[(i, j)] - lhs[(i, j)]).abs() <= 1e-10);
                    prop_assert!((sum[(i, j)] - lhs_sum[(i, j)]).abs() <= 1e-10);
                }
            }
            prop_assert!(underline_mat(a.as_ref()).has_block_structure());
        }

        #[test]
        fn underline_vec_is_isometry(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..16)) {
            let a: Vec<_> = v.iter().map(|&(r, i)| c(r, i)).collect();
            let complex_norm: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let u = underline_vec(&a);
            prop_assert_eq!(u.len(), 2 * a.len());
            let real_norm: f64 = u.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((complex_norm - real_norm).abs() <= 1e-12 * (1.0 + complex_norm));
        }

        #[test]
        fn canon_moment_round_trip(prec in spd(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let g = CanonGauss2::new(RealVec2::new(x, y), prec);
            let back = moment_to_canon(&canon_to_moment(&g).unwrap()).unwrap();
            let scale = prec.max_abs().max(1.0);
            prop_assert!((back.prec - g.prec).max_abs() <= 1e-12 * scale * 10.0);
            prop_assert!((back.info - g.info).max_abs() <= 1e-10 * (1.0 + g.info.max_abs()));
        }

        #[test]
        fn product_commutes_and_associates(a in canon(), b in canon(), c3 in canon()) {
            prop_assert_eq!(gauss_product_canon(&a, &b), gauss_product_canon(&b, &a));
            // Addition of floats is not associative in general; the contract is
            // exactness for the parameter sums, which holds for dyadic inputs.
            let q = |g: CanonGauss2| CanonGauss2::new(
                RealVec2::new((g.info[0] * 64.0).round() / 64.0, (g.info[1] * 64.0).round() / 64.0),
                Mat2::new((g.prec[(0, 0)] * 64.0).round() / 64.0, (g.prec[(0, 1)] * 64.0).round() / 64.0,
                          (g.prec[(1, 0)] * 64.0).round() / 64.0, (g.prec[(1, 1)] * 64.0).round() / 64.0));
            let (a, b, c3) = (q(a), q(b), q(c3));
            prop_assert_eq!(a + (b + c3), (a + b) + c3);
        }
    }
}
