//! Exact Gaussian uncertainty propagation through the full DFT matrix.
//!
//! Given independent Gaussian sites on the time-domain components `u^t_n` and
//! on the frequency-domain components `u^f_k = (W u^t)_k`, the posterior over
//! `u^t` is Gaussian with precision `W^T D_f W + D_t` (all in the interleaved
//! real representation). This module assembles that precision, factors it,
//! and reports the posterior in both domains. It is the O(N^3) reference the
//! belief-propagation path is checked against.

use std::f64::consts::PI;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Par, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{CanonGauss2, ComplexScalar, Mat2, MomentGauss2, RealVec2};

/// Largest accepted condition estimate of the combined precision.
pub const MAX_CONDITION: f64 = 1e12;

/// `exp(-j 2 pi k / n)`.
pub fn twiddle(n: usize, k: usize) -> ComplexScalar {
    let (s, c) = (-2.0 * PI * (k % n) as f64 / n as f64).sin_cos();
    Complex64::new(c, s)
}

pub fn is_power_of_two(n: usize) -> bool {
    n >= 1 && n.is_power_of_two()
}

/// The symmetric N-point DFT matrix, `W[k][n] = exp(-j 2 pi k n / N)`.
#[derive(Clone, Debug)]
pub struct DftMatrix {
    entries: Mat<ComplexScalar>,
}

impl DftMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<ComplexScalar> {
        &self.entries
    }

    pub fn apply(&self, x: &[ComplexScalar]) -> Vec<ComplexScalar> {
        let w = &self.entries;
        (0..w.nrows())
            .map(|k| (0..w.ncols()).map(|n| w[(k, n)] * x[n]).sum())
            .collect()
    }
}

/// # Panics
/// If `n == 0`.
pub fn dft_matrix(n: usize) -> DftMatrix {
    assert!(n >= 1, "DFT size must be positive");
    DftMatrix {
        entries: Mat::from_fn(n, n, |k, m| twiddle(n, (k * m) % n)),
    }
}

/// In-place radix-2 decimation-in-time FFT. The length must be a power of two.
pub(crate) fn fft_in_place(buf: &mut [ComplexScalar]) {
    let n = buf.len();
    debug_assert!(is_power_of_two(n));
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let table: Vec<ComplexScalar> = (0..n / 2).map(|k| twiddle(n, k)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let t = table[j * step] * buf[start + j + half];
                let u = buf[start + j];
                buf[start + j] = u + t;
                buf[start + j + half] = u - t;
            }
        }
        len *= 2;
    }
}

/// In-place inverse DFT, `(1/N) conj(W) x`.
pub(crate) fn ifft_in_place(buf: &mut [ComplexScalar]) {
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z = z.conj());
    fft_in_place(buf);
    buf.iter_mut().for_each(|z| *z = z.conj() * scale);
}

/// Radix-2 decimation-in-time FFT, equal to `dft_matrix(N) * x`.
pub fn fft_deterministic(x: &[ComplexScalar]) -> Result<Vec<ComplexScalar>> {
    if !is_power_of_two(x.len()) {
        return Err(Error::NotPowerOfTwo(x.len()));
    }
    let mut out = x.to_vec();
    fft_in_place(&mut out);
    Ok(out)
}

/// Inverse of [`fft_deterministic`].
pub fn ifft(x: &[ComplexScalar]) -> Result<Vec<ComplexScalar>> {
    if !is_power_of_two(x.len()) {
        return Err(Error::NotPowerOfTwo(x.len()));
    }
    let mut out = x.to_vec();
    ifft_in_place(&mut out);
    Ok(out)
}

/// Plain O(N^2) DFT for lengths that are not powers of two.
fn dft_any(x: &[ComplexScalar], inverse: bool) -> Vec<ComplexScalar> {
    let n = x.len();
    if is_power_of_two(n) {
        let mut out = x.to_vec();
        if inverse {
            ifft_in_place(&mut out);
        } else {
            fft_in_place(&mut out);
        }
        return out;
    }
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    (0..n)
        .map(|k| {
            let acc: ComplexScalar = (0..n)
                .map(|m| {
                    let w = twiddle(n, (k * m) % n);
                    x[m] * if inverse { w.conj() } else { w }
                })
                .sum();
            acc * scale
        })
        .collect()
}

/// Which side of the transform a set of sites lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Time,
    Frequency,
}

/// One independent canonical Gaussian site per complex component.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalSiteSet {
    pub domain: Domain,
    pub sites: Vec<CanonGauss2>,
}

impl DiagonalSiteSet {
    pub fn new(domain: Domain, sites: Vec<CanonGauss2>) -> Self {
        DiagonalSiteSet { domain, sites }
    }

    /// `n` uninformative sites.
    pub fn flat(domain: Domain, n: usize) -> Self {
        DiagonalSiteSet::new(domain, vec![CanonGauss2::ZERO; n])
    }

    pub fn from_moments(domain: Domain, moments: &[MomentGauss2]) -> Result<Self> {
        let sites = moments
            .iter()
            .map(MomentGauss2::to_canon)
            .collect::<Result<_>>()?;
        Ok(DiagonalSiteSet::new(domain, sites))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// A 2N-dimensional real Gaussian in moment form (interleaved layout).
#[derive(Clone, Debug)]
pub struct MomentGaussN {
    pub mean: Vec<f64>,
    pub cov: Mat<f64>,
}

impl MomentGaussN {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Per-component block of a 2N-dimensional Gaussian.
pub fn marginals_of(g: &MomentGaussN) -> Vec<MomentGauss2> {
    (0..g.dim() / 2)
        .map(|n| {
            let (a, b) = (2 * n, 2 * n + 1);
            MomentGauss2::new(
                RealVec2::new(g.mean[a], g.mean[b]),
                Mat2::new(g.cov[(a, a)], g.cov[(a, b)], g.cov[(b, a)], g.cov[(b, b)]),
            )
        })
        .collect()
}

/// Per-component posterior marginals in both domains.
#[derive(Clone, Debug)]
pub struct PosteriorMarginals {
    pub time: Vec<MomentGauss2>,
    pub freq: Vec<MomentGauss2>,
}

fn to_complex(v: &[f64]) -> Vec<ComplexScalar> {
    v.chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect()
}

fn to_real(v: &[ComplexScalar]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// The assembled posterior system `P mu = b` over the time domain.
struct PosteriorSystem {
    n: usize,
    llt: faer::linalg::solvers::Llt<f64>,
    mean: Vec<f64>,
}

fn check_sites(time: &DiagonalSiteSet, freq: &DiagonalSiteSet) -> Result<usize> {
    if time.domain != Domain::Time || freq.domain != Domain::Frequency {
        return Err(Error::InvalidConfig(
            "expected time sites first and frequency sites second".into(),
        ));
    }
    if time.len() != freq.len() {
        return Err(Error::LengthMismatch {
            expected: time.len(),
            found: freq.len(),
        });
    }
    if time.is_empty() {
        return Err(Error::InvalidConfig("empty site set".into()));
    }
    Ok(time.len())
}

/// Time-domain precision `W^T D_f W + D_t` and information vector
/// `W^T Gamma + gamma`.
///
/// Writing each frequency precision block as `s I + (anti-circular part)`,
/// the quadratic form `sum_k f_k^T Lambda_k f_k` with `f = W u` becomes
/// `u^H C u + Re(u^T H u)` where `C` is circulant and `H` is Hankel, both
/// generated by a single length-N DFT. Assembly is therefore O(N^2).
fn assemble(time: &DiagonalSiteSet, freq: &DiagonalSiteSet) -> (Mat<f64>, Vec<f64>) {
    let n = time.len();
    let mut s = Vec::with_capacity(n);
    let mut tau_conj = Vec::with_capacity(n);
    for site in &freq.sites {
        let l = site.prec.symmetrize();
        s.push(Complex64::new(0.5 * (l[(0, 0)] + l[(1, 1)]), 0.0));
        tau_conj.push(Complex64::new(0.5 * (l[(0, 0)] - l[(1, 1)]), -l[(0, 1)]));
    }
    let circ = dft_any(&s, false);
    let hank = dft_any(&tau_conj, false);

    let mut p = Mat::<f64>::zeros(2 * n, 2 * n);
    for col in 0..n {
        for row in 0..n {
            let c = circ[(col + n - row) % n];
            let h = hank[(row + col) % n];
            p[(2 * row, 2 * col)] = c.re + h.re;
            p[(2 * row, 2 * col + 1)] = -c.im - h.im;
            p[(2 * row + 1, 2 * col)] = c.im - h.im;
            p[(2 * row + 1, 2 * col + 1)] = c.re - h.re;
        }
    }
    for (i, site) in time.sites.iter().enumerate() {
        let l = site.prec.symmetrize();
        for a in 0..2 {
            for b in 0..2 {
                p[(2 * i + a, 2 * i + b)] += l[(a, b)];
            }
        }
    }

    let gamma: Vec<ComplexScalar> = freq
        .sites
        .iter()
        .map(|g| g.info.to_complex().conj())
        .collect();
    // W^H Gamma = conj(W conj(Gamma))
    let back: Vec<ComplexScalar> = dft_any(&gamma, false)
        .into_iter()
        .map(|z| z.conj())
        .collect();
    let mut info = to_real(&back);
    for (i, site) in time.sites.iter().enumerate() {
        info[2 * i] += site.info[0];
        info[2 * i + 1] += site.info[1];
    }
    (p, info)
}

impl PosteriorSystem {
    fn solve(time: &DiagonalSiteSet, freq: &DiagonalSiteSet) -> Result<Self> {
        let n = check_sites(time, freq)?;
        let (p, info) = assemble(time, freq);
        let llt = p.llt(Side::Lower).map_err(|_| Error::SingularSystem {
            condition: f64::INFINITY,
        })?;
        let diag = llt.L().diagonal().column_vector();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..2 * n {
            lo = lo.min(diag[i]);
            hi = hi.max(diag[i]);
        }
        let condition = (hi / lo).powi(2);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::SingularSystem { condition });
        }
        let rhs = Mat::from_fn(2 * n, 1, |i, _| info[i]);
        let sol = llt.solve(&rhs);
        let mean = (0..2 * n).map(|i| sol[(i, 0)]).collect();
        Ok(PosteriorSystem { n, llt, mean })
    }

    fn freq_mean(&self) -> Vec<f64> {
        to_real(&dft_any(&to_complex(&self.mean), false))
    }
}

/// Full posterior moments in the time domain and their pushforward to the
/// frequency domain.
///
/// The mean is obtained from a Cholesky solve of the combined precision; the
/// covariance is the factorization-based inverse. Individual sites may be
/// improper as long as the combined precision is positive definite.
pub fn exact_posterior(
    time: &DiagonalSiteSet,
    freq: &DiagonalSiteSet,
) -> Result<(MomentGaussN, MomentGaussN)> {
    let sys = PosteriorSystem::solve(time, freq)?;
    let n = sys.n;
    let cov_t = sys.llt.inverse();
    let mut cov_t = cov_t;
    symmetrize_in_place(&mut cov_t);

    // W Sigma W^T: transform every column, then every row.
    let mut half = Mat::<f64>::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let col: Vec<f64> = (0..2 * n).map(|i| cov_t[(i, j)]).collect();
        let out = to_real(&dft_any(&to_complex(&col), false));
        for i in 0..2 * n {
            half[(i, j)] = out[i];
        }
    }
    let mut cov_f = Mat::<f64>::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        let row: Vec<f64> = (0..2 * n).map(|j| half[(i, j)]).collect();
        let out = to_real(&dft_any(&to_complex(&row), false));
        for j in 0..2 * n {
            cov_f[(i, j)] = out[j];
        }
    }
    symmetrize_in_place(&mut cov_f);

    let freq_mean = sys.freq_mean();
    Ok((
        MomentGaussN {
            mean: sys.mean,
            cov: cov_t,
        },
        MomentGaussN {
            mean: freq_mean,
            cov: cov_f,
        },
    ))
}

/// Same posterior as [`exact_posterior`] but only its per-component
/// marginals, computed from the inverse Cholesky factor without forming the
/// full covariances.
pub fn posterior_marginals(
    time: &DiagonalSiteSet,
    freq: &DiagonalSiteSet,
) -> Result<PosteriorMarginals> {
    let sys = PosteriorSystem::solve(time, freq)?;
    let n = sys.n;
    let dim = 2 * n;
    // Sigma = G^T G with G = L^-1.
    let mut g = Mat::<f64>::zeros(dim, dim);
    faer::linalg::triangular_inverse::invert_lower_triangular(g.as_mut(), sys.llt.L(), Par::Seq);

    let mut time_blocks = vec![Mat2::ZERO; n];
    for (c, block) in time_blocks.iter_mut().enumerate() {
        let (a, b) = (g.col(2 * c), g.col(2 * c + 1));
        let (mut aa, mut ab, mut bb) = (0.0, 0.0, 0.0);
        for k in 2 * c..dim {
            aa += a[k] * a[k];
            ab += a[k] * b[k];
            bb += b[k] * b[k];
        }
        *block = Mat2::new(aa, ab, ab, bb);
    }

    // Sigma_f = (G W^T)^T (G W^T); row r of G W^T is the DFT of row r of G.
    let mut freq_acc = vec![[0.0f64; 3]; n];
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..dim {
        for (m, z) in row.iter_mut().enumerate() {
            *z = Complex64::new(g[(r, 2 * m)], g[(r, 2 * m + 1)]);
        }
        if is_power_of_two(n) {
            fft_in_place(&mut row);
        } else {
            row = dft_any(&row, false);
        }
        for (acc, z) in freq_acc.iter_mut().zip(&row) {
            acc[0] += z.re * z.re;
            acc[1] += z.re * z.im;
            acc[2] += z.im * z.im;
        }
    }

    let freq_mean = sys.freq_mean();
    let time = (0..n)
        .map(|i| {
            MomentGauss2::new(
                RealVec2::new(sys.mean[2 * i], sys.mean[2 * i + 1]),
                time_blocks[i],
            )
        })
        .collect();
    let freq = (0..n)
        .map(|k| {
            let [aa, ab, bb] = freq_acc[k];
            MomentGauss2::new(
                RealVec2::new(freq_mean[2 * k], freq_mean[2 * k + 1]),
                Mat2::new(aa, ab, ab, bb),
            )
        })
        .collect();
    Ok(PosteriorMarginals { time, freq })
}

/// Posterior mean only (time and frequency), skipping all covariance work.
pub fn posterior_mean(
    time: &DiagonalSiteSet,
    freq: &DiagonalSiteSet,
) -> Result<(Vec<ComplexScalar>, Vec<ComplexScalar>)> {
    let sys = PosteriorSystem::solve(time, freq)?;
    let t = to_complex(&sys.mean);
    let f = dft_any(&t, false);
    Ok((t, f))
}

fn symmetrize_in_place(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in j + 1..m.nrows() {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
