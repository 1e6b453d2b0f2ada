//! Random pairs of Gaussian site sets for checking GaBP against the exact
//! posterior.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dft::{ifft, DiagonalSiteSet, Domain};
use crate::error::Result;
use crate::gaussian::{Mat2, MomentGauss2, RealVec2};

#[derive(Clone, Debug, PartialEq)]
pub struct TrialPair {
    pub time: Vec<MomentGauss2>,
    pub freq: Vec<MomentGauss2>,
}

impl TrialPair {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn site_sets(&self) -> Result<(DiagonalSiteSet, DiagonalSiteSet)> {
        Ok((
            DiagonalSiteSet::from_moments(Domain::Time, &self.time)?,
            DiagonalSiteSet::from_moments(Domain::Frequency, &self.freq)?,
        ))
    }
}

/// Uniform on `(0, hi]`, so every sampled variance is proper.
fn positive_uniform<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> f64 {
    hi * (1.0 - rng.random::<f64>())
}

fn diag_cov<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> Mat2 {
    let a = positive_uniform(rng, hi);
    let d = positive_uniform(rng, hi);
    Mat2::diag(a, d)
}

fn draw<R: Rng + ?Sized>(rng: &mut R, cov: Mat2) -> RealVec2 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    RealVec2::new(a * cov[(0, 0)].sqrt(), b * cov[(1, 1)].sqrt())
}

/// Where the perturbation of the time-domain means is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TrialNoise {
    /// Noise with covariance `Sigma_f[k]` is added to frequency mean `k`
    /// before the inverse DFT.
    #[default]
    Frequency,
    /// Noise with covariance `Sigma_f[n]` is added to time mean `n` after
    /// the inverse DFT.
    Time,
}

impl std::fmt::Display for TrialNoise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrialNoise::Frequency => "frequency",
            TrialNoise::Time => "time",
        })
    }
}

/// [`sample_trial_pair_with`] using [`TrialNoise::default`].
pub fn sample_trial_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TrialPair> {
    sample_trial_pair_with(n, TrialNoise::default(), rng)
}

/// Diagonal time covariances with entries in `(0, 1]`, frequency ones in
/// `(0, N]`, frequency means drawn from their own covariance, and time
/// means equal to a noisy inverse DFT of the frequency means.
///
/// # Errors
/// `NotPowerOfTwo` if `n` is not a power of two.
pub fn sample_trial_pair_with<R: Rng + ?Sized>(
    n: usize,
    noise: TrialNoise,
    rng: &mut R,
) -> Result<TrialPair> {
    let time_cov: Vec<Mat2> = (0..n).map(|_| diag_cov(rng, 1.0)).collect();
    let freq_cov: Vec<Mat2> = (0..n).map(|_| diag_cov(rng, n as f64)).collect();
    let freq_mean: Vec<RealVec2> = freq_cov.iter().map(|c| draw(rng, *c)).collect();
    let perturb: Vec<RealVec2> = freq_cov.iter().map(|c| draw(rng, *c)).collect();
    let time_mean: Vec<RealVec2> = match noise {
        TrialNoise::Frequency => {
            let noisy: Vec<Complex64> = freq_mean
                .iter()
                .zip(&perturb)
                .map(|(m, e)| (*m + *e).to_complex())
                .collect();
            ifft(&noisy)?
                .into_iter()
                .map(RealVec2::from_complex)
                .collect()
        }
        TrialNoise::Time => {
            let clean: Vec<Complex64> = freq_mean.iter().map(|m| m.to_complex()).collect();
            ifft(&clean)?
                .into_iter()
                .zip(&perturb)
                .map(|(z, e)| RealVec2::from_complex(z) + *e)
                .collect()
        }
    };
    let time = time_mean
        .into_iter()
        .zip(&time_cov)
        .map(|(m, c)| MomentGauss2::new(m, *c))
        .collect();
    let freq = freq_mean
        .iter()
        .zip(&freq_cov)
        .map(|(m, c)| MomentGauss2::new(*m, *c))
        .collect();
    Ok(TrialPair { time, freq })
}
