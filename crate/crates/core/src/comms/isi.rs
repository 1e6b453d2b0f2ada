//! BPSK over a static ISI channel with additive white Gaussian noise.
//!
//! A block of `K` symbols is zero-padded to `N >= K + taps - 1`, so the
//! linear convolution with the channel equals the circular one and the
//! channel acts as a per-bin multiplication in the frequency domain.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dft::{fft_deterministic, ifft, DiagonalSiteSet, Domain};
use crate::ep::LocalDistribution;
use crate::error::{Error, Result};
use crate::gaussian::{ComplexScalar, MomentGauss2};

/// Channel impulse response used by the equalization experiment.
pub const STANDARD_TAPS: [f64; 11] = [
    0.04, -0.05, 0.07, -0.21, -0.5, 0.72, 0.36, 0.0, 0.21, 0.03, 0.07,
];

/// Information block length of the equalization experiment.
pub const STANDARD_BLOCK: usize = 1000;

/// Channel responses smaller than this make a bin unusable.
pub const MIN_RESPONSE: f64 = 1e-12;

/// Largest channel memory the trellis detector accepts.
pub const MAX_TRELLIS_TAPS: usize = 12;

/// Largest block the exhaustive detector accepts.
pub const MAX_BRUTE_FORCE_BLOCK: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct IsiScenario {
    pub taps: Vec<ComplexScalar>,
    /// Noise variance per real dimension.
    pub sigma2: f64,
    /// Information symbols per block.
    pub k: usize,
    /// Padded block length, a power of two.
    pub n: usize,
}

/// `10^(-snr_db / 10)`: noise variance per real dimension for unit-energy
/// symbols.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

impl IsiScenario {
    /// Smallest power-of-two padding that avoids circular wrap-around.
    pub fn new(taps: Vec<ComplexScalar>, sigma2: f64, k: usize) -> Result<Self> {
        if taps.is_empty() || k == 0 {
            return Err(Error::InvalidConfig(
                "ISI scenario needs taps and a non-empty block".into(),
            ));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance {sigma2} is negative"
            )));
        }
        let n = (k + taps.len() - 1).next_power_of_two();
        Ok(IsiScenario { taps, sigma2, k, n })
    }

    /// The standard 11-tap channel with `K = 1000` at the given SNR.
    pub fn standard(snr_db: f64) -> Self {
        let taps = STANDARD_TAPS
            .iter()
            .map(|&t| Complex64::new(t, 0.0))
            .collect();
        IsiScenario::new(taps, sigma2_from_snr_db(snr_db), STANDARD_BLOCK).expect("valid constants")
    }

    /// DFT of the zero-padded impulse response.
    pub fn freq_response(&self) -> Vec<ComplexScalar> {
        let mut h = self.taps.clone();
        h.resize(self.n, Complex64::new(0.0, 0.0));
        fft_deterministic(&h).expect("padded length is a power of two")
    }
}

/// Equiprobable random BPSK symbols.
pub fn random_bpsk<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Circular complex noise with variance `sigma2` per real dimension.
pub fn complex_noise<R: Rng + ?Sized>(n: usize, sigma2: f64, rng: &mut R) -> Vec<ComplexScalar> {
    let s = sigma2.sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Received padded block `y = u * h + noise`, length `N`.
pub fn simulate_isi<R: Rng + ?Sized>(
    u: &[f64],
    scenario: &IsiScenario,
    rng: &mut R,
) -> Result<Vec<ComplexScalar>> {
    if u.len() != scenario.k {
        return Err(Error::LengthMismatch {
            expected: scenario.k,
            found: u.len(),
        });
    }
    let mut y = complex_noise(scenario.n, scenario.sigma2, rng);
    for (i, &sym) in u.iter().enumerate() {
        for (l, h) in scenario.taps.iter().enumerate() {
            y[i + l] += h * sym;
        }
    }
    Ok(y)
}

fn check_response(h_f: &[ComplexScalar]) -> Result<()> {
    match h_f.iter().position(|h| h.norm() < MIN_RESPONSE) {
        Some(bin) => Err(Error::ZeroFrequencyResponse { bin }),
        None => Ok(()),
    }
}

/// Per-bin likelihood of the transmitted spectrum: circular Gaussian with
/// mean `y_f / h_f` and per-dimension variance `N sigma2 / |h_f|^2`.
pub fn isi_freq_likelihood(
    y_f: &[ComplexScalar],
    h_f: &[ComplexScalar],
    sigma2: f64,
    n: usize,
) -> Result<DiagonalSiteSet> {
    DiagonalSiteSet::from_moments(Domain::Frequency, &isi_freq_moments(y_f, h_f, sigma2, n)?)
}

fn isi_freq_moments(
    y_f: &[ComplexScalar],
    h_f: &[ComplexScalar],
    sigma2: f64,
    n: usize,
) -> Result<Vec<MomentGauss2>> {
    if y_f.len() != h_f.len() {
        return Err(Error::LengthMismatch {
            expected: h_f.len(),
            found: y_f.len(),
        });
    }
    check_response(h_f)?;
    Ok(y_f
        .iter()
        .zip(h_f)
        .map(|(y, h)| MomentGauss2::circular(y / h, n as f64 * sigma2 / h.norm_sqr()))
        .collect())
}

fn slice(x: &[ComplexScalar], k: usize) -> Vec<f64> {
    x.iter()
        .take(k)
        .map(|z| if z.re >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}

/// Channel inversion per bin, back to time, sign of the real part of the
/// first `k` samples.
pub fn zf_equalize(y_f: &[ComplexScalar], h_f: &[ComplexScalar], k: usize) -> Result<Vec<f64>> {
    if y_f.len() != h_f.len() {
        return Err(Error::LengthMismatch {
            expected: h_f.len(),
            found: y_f.len(),
        });
    }
    check_response(h_f)?;
    let x: Vec<ComplexScalar> = y_f.iter().zip(h_f).map(|(y, h)| y / h).collect();
    Ok(slice(&ifft(&x)?, k))
}

/// Linear MMSE estimate of the `k` real, unit-variance symbols from the
/// padded received block, followed by sign decisions.
///
/// Solves `(Re(H^H H) + sigma2 I) u = Re(H^H y)` over the information
/// positions, where `H` is the circulant channel matrix. This is the same
/// Gaussian posterior mean that one undamped EP round produces with
/// unit-variance BPSK projections and zero padding.
pub fn lmmse_equalize(
    y_f: &[ComplexScalar],
    h_f: &[ComplexScalar],
    sigma2: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let n = h_f.len();
    if y_f.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y_f.len(),
        });
    }
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "block {k} longer than padded length {n}"
        )));
    }
    // Circular autocorrelation of h and correlation of h with y.
    let power: Vec<ComplexScalar> = h_f
        .iter()
        .map(|h| Complex64::new(h.norm_sqr(), 0.0))
        .collect();
    let r = ifft(&power)?;
    let cross: Vec<ComplexScalar> = y_f.iter().zip(h_f).map(|(y, h)| h.conj() * y).collect();
    let b = ifft(&cross)?;
    let g = Mat::from_fn(k, k, |i, j| {
        r[(j + n - i) % n].re + if i == j { sigma2 } else { 0.0 }
    });
    let rhs = Mat::from_fn(k, 1, |i, _| b[i].re);
    let llt = g.llt(Side::Lower).map_err(|_| Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let u = llt.solve(&rhs);
    Ok((0..k)
        .map(|i| if u[(i, 0)] >= 0.0 { 1.0 } else { -1.0 })
        .collect())
}

fn symbol(bit: usize) -> f64 {
    if bit == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Maximum-likelihood BPSK sequence for `y = u * h + noise` over the first
/// `k + taps - 1` received samples, by dynamic programming over the last
/// `taps - 1` symbols.
pub fn viterbi_map_detect(
    y_t: &[ComplexScalar],
    taps: &[ComplexScalar],
    sigma2: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let _ = sigma2; // equiprobable symbols: the argmax does not depend on it
    let l = taps.len();
    if l == 0 || l > MAX_TRELLIS_TAPS {
        return Err(Error::StateSpaceTooLarge { taps: l });
    }
    let span = k + l - 1;
    if y_t.len() < span {
        return Err(Error::LengthMismatch {
            expected: span,
            found: y_t.len(),
        });
    }
    let mem = l - 1;
    if mem == 0 {
        return Ok((0..k)
            .map(|t| {
                if (taps[0].conj() * y_t[t]).re >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect());
    }
    let states = 1usize << mem;
    // Bit j of a state is the symbol j+1 steps back (1 means +1).
    let mut cost = vec![f64::INFINITY; states];
    cost[0] = 0.0;
    let mut from_high = vec![0u8; k * states];
    let mut next = vec![0.0; states];
    for t in 0..k {
        next.fill(f64::INFINITY);
        for (s_new, slot) in next.iter_mut().enumerate() {
            let u_t = symbol(s_new & 1);
            for high in 0..2usize {
                let s_old = (s_new >> 1) | (high << (mem - 1));
                let c_old = cost[s_old];
                if !c_old.is_finite() {
                    continue;
                }
                let mut pred = taps[0] * u_t;
                for j in 1..=mem.min(t) {
                    pred += taps[j] * symbol((s_old >> (j - 1)) & 1);
                }
                let c = c_old + (y_t[t] - pred).norm_sqr();
                if c < *slot {
                    *slot = c;
                    from_high[t * states + s_new] = high as u8;
                }
            }
        }
        std::mem::swap(&mut cost, &mut next);
    }
    // Tail: the last `mem` samples only see already decided symbols.
    let mut best = (f64::INFINITY, 0usize);
    for (s, &c) in cost.iter().enumerate() {
        if !c.is_finite() {
            continue;
        }
        let mut total = c;
        for t in k..span {
            let mut pred = Complex64::new(0.0, 0.0);
            for j in (t - k + 1)..=mem {
                if j <= t {
                    pred += taps[j] * symbol((s >> (j - 1 - (t - k))) & 1);
                }
            }
            total += (y_t[t] - pred).norm_sqr();
        }
        if total < best.0 {
            best = (total, s);
        }
    }
    let mut out = vec![0.0; k];
    let mut s = best.1;
    for t in (0..k).rev() {
        out[t] = symbol(s & 1);
        let high = from_high[t * states + s] as usize;
        s = (s >> 1) | (high << (mem - 1));
    }
    Ok(out)
}

/// Exhaustive maximum-likelihood detection over all `2^k` sequences.
pub fn brute_force_map(
    y_t: &[ComplexScalar],
    taps: &[ComplexScalar],
    sigma2: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let _ = sigma2;
    if k > MAX_BRUTE_FORCE_BLOCK {
        return Err(Error::BlockTooLarge { len: k });
    }
    let span = k + taps.len() - 1;
    if y_t.len() < span {
        return Err(Error::LengthMismatch {
            expected: span,
            found: y_t.len(),
        });
    }
    let mut best = (f64::INFINITY, 0usize);
    for bits in 0..(1usize << k) {
        let u: Vec<f64> = (0..k).map(|i| symbol((bits >> i) & 1)).collect();
        let mut c = 0.0;
        for (t, y) in y_t.iter().enumerate().take(span) {
            let mut pred = Complex64::new(0.0, 0.0);
            for (j, h) in taps.iter().enumerate() {
                if t >= j && t - j < k {
                    pred += h * u[t - j];
                }
            }
            c += (y - pred).norm_sqr();
        }
        if c < best.0 {
            best = (c, bits);
        }
    }
    Ok((0..k).map(|i| symbol((best.1 >> i) & 1)).collect())
}

/// EP local factors: BPSK on the information positions, zero on the
/// padding, and the per-bin channel likelihood in the frequency domain.
pub fn isi_locals(
    scenario: &IsiScenario,
    y_f: &[ComplexScalar],
    h_f: &[ComplexScalar],
) -> Result<(Vec<LocalDistribution>, Vec<LocalDistribution>)> {
    let time = (0..scenario.n)
        .map(|i| {
            if i < scenario.k {
                LocalDistribution::bpsk(0.5)
            } else {
                LocalDistribution::point_mass(Complex64::new(0.0, 0.0))
            }
        })
        .collect();
    let freq = isi_freq_moments(y_f, h_f, scenario.sigma2, scenario.n)?
        .into_iter()
        .map(LocalDistribution::FixedGaussian)
        .collect();
    Ok((time, freq))
}

/// Sign decisions on the real part of the first `k` time beliefs.
pub fn decide(beliefs: &[MomentGauss2], k: usize) -> Vec<f64> {
    beliefs
        .iter()
        .take(k)
        .map(|b| if b.mean[0] >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}
