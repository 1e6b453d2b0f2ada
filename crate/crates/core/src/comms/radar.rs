//! Joint sensing and communication: estimating a sparse multipath channel
//! from OFDM symbols that are only known through soft information.
//!
//! Each subcarrier carries a BPSK symbol `u_f[n]`, the receiver sees
//! `y_f[n] = u_f[n] h_f[n] + noise` and holds an LLR for every symbol. The
//! time-domain channel taps follow a two-component Gaussian mixture with a
//! few strong and many weak paths.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dft::{fft_deterministic, ifft};
use crate::ep::LocalDistribution;
use crate::error::{Error, Result};
use crate::gaussian::{ComplexScalar, Mat2, MomentGauss2, RealVec2};

use super::isi::complex_noise;

pub const STANDARD_SIZE: usize = 1024;
pub const STANDARD_SPARSITY: f64 = 0.01;
pub const STANDARD_LLR_SCALE: f64 = 3.25;
/// Per-dimension variance of a strong tap.
pub const VAR_LARGE_TAP: f64 = 1.0;
/// Per-dimension variance of a weak tap.
pub const VAR_SMALL_TAP: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct RadarScenario {
    pub n: usize,
    /// Probability that a tap is strong.
    pub sparsity: f64,
    pub var_large: f64,
    pub var_small: f64,
    /// Noise variance per real dimension.
    pub sigma2: f64,
    /// LLR quality: LLRs are drawn from `N(u c, 2c)`.
    pub c: f64,
}

impl RadarScenario {
    pub fn new(n: usize, sparsity: f64, sigma2: f64, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "radar block length must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&sparsity) {
            return Err(Error::InvalidConfig(format!(
                "sparsity {sparsity} outside [0, 1]"
            )));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance {sigma2} is negative"
            )));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "LLR scale {c} must be positive"
            )));
        }
        Ok(RadarScenario {
            n,
            sparsity,
            var_large: VAR_LARGE_TAP,
            var_small: VAR_SMALL_TAP,
            sigma2,
            c,
        })
    }

    /// Standard setup (`N = 1024`, `s = 0.01`) at a sensing SNR in dB.
    pub fn standard(snr_db: f64, c: f64) -> Result<Self> {
        let mut sc = RadarScenario::new(STANDARD_SIZE, STANDARD_SPARSITY, 1.0, c)?;
        sc.sigma2 = sc.sigma2_for_snr_db(snr_db);
        Ok(sc)
    }

    /// Per-dimension variance of one tap under the mixture.
    pub fn tap_variance(&self) -> f64 {
        self.sparsity * self.var_large + (1.0 - self.sparsity) * self.var_small
    }

    /// `E|h_f[n]|^2 = 2 N tap_variance`.
    pub fn freq_power(&self) -> f64 {
        2.0 * self.n as f64 * self.tap_variance()
    }

    /// Noise variance such that `E|h_f|^2 / (2 sigma2)` equals the SNR.
    pub fn sigma2_for_snr_db(&self, snr_db: f64) -> f64 {
        self.freq_power() / (2.0 * 10f64.powf(snr_db / 10.0))
    }

    /// Time-domain prior of one tap as a local factor.
    pub fn tap_prior(&self) -> LocalDistribution {
        LocalDistribution::GaussMix {
            weights: vec![self.sparsity, 1.0 - self.sparsity],
            components: vec![
                MomentGauss2::new(RealVec2::ZERO, Mat2::scalar(self.var_large)),
                MomentGauss2::new(RealVec2::ZERO, Mat2::scalar(self.var_small)),
            ],
        }
    }
}

/// Independent taps from the strong/weak mixture.
pub fn sample_radar_channel<R: Rng + ?Sized>(
    scenario: &RadarScenario,
    rng: &mut R,
) -> Vec<ComplexScalar> {
    (0..scenario.n)
        .map(|_| {
            let strong = rng.random::<f64>() < scenario.sparsity;
            let s = if strong {
                scenario.var_large
            } else {
                scenario.var_small
            }
            .sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// `p(u = +1)` for an LLR, computed without overflow.
pub fn p_plus(llr: f64) -> f64 {
    if llr >= 0.0 {
        1.0 / (1.0 + (-llr).exp())
    } else {
        let e = llr.exp();
        e / (1.0 + e)
    }
}

/// `E[u] = tanh(llr / 2)` for a BPSK symbol.
pub fn soft_symbol(llr: f64) -> f64 {
    (0.5 * llr).tanh()
}

/// LLRs from `N(u c, 2c)` for each symbol; variance and mean are tied so
/// that the LLRs are consistent.
pub fn sample_llrs<R: Rng + ?Sized>(u_f: &[f64], c: f64, rng: &mut R) -> Result<Vec<f64>> {
    let noise = Normal::new(0.0, (2.0 * c).sqrt())
        .map_err(|_| Error::InvalidConfig(format!("LLR scale {c} must be positive")))?;
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "LLR scale {c} must be positive"
        )));
    }
    Ok(u_f
        .iter()
        .map(|&u| u.signum() * c + noise.sample(rng))
        .collect())
}

/// Symbol priors induced by LLRs.
pub fn llr_priors(llrs: &[f64]) -> Vec<LocalDistribution> {
    llrs.iter()
        .map(|&l| LocalDistribution::bpsk_llr(l))
        .collect()
}

/// Hard decisions, with `sign(0) = +1`.
pub fn hard_decisions(llrs: &[f64]) -> Vec<f64> {
    llrs.iter()
        .map(|&l| if l >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}

/// Received subcarriers `y_f = u_f h_f + noise`.
pub fn simulate_radar<R: Rng + ?Sized>(
    h_t: &[ComplexScalar],
    u_f: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<ComplexScalar>> {
    if u_f.len() != h_t.len() {
        return Err(Error::LengthMismatch {
            expected: h_t.len(),
            found: u_f.len(),
        });
    }
    let h_f = fft_deterministic(h_t)?;
    let noise = complex_noise(h_t.len(), sigma2, rng);
    Ok(h_f
        .iter()
        .zip(u_f)
        .zip(noise)
        .map(|((h, u), z)| h * *u + z)
        .collect())
}

/// Divide out the hard symbol decisions and transform back.
pub fn zf_channel_estimate(y_f: &[ComplexScalar], llrs: &[f64]) -> Result<Vec<ComplexScalar>> {
    if y_f.len() != llrs.len() {
        return Err(Error::LengthMismatch {
            expected: y_f.len(),
            found: llrs.len(),
        });
    }
    let h_f: Vec<_> = y_f
        .iter()
        .zip(hard_decisions(llrs))
        .map(|(y, u)| y * u)
        .collect();
    ifft(&h_f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelPrior {
    /// No prior on the channel.
    None,
    /// Single Gaussian with the mixture's per-tap variance.
    Gaussian,
}

/// Gaussian view of one subcarrier as a function of `h_f`: mean
/// `E[u] y`, covariance `sigma2 I + (1 - E[u]^2) y y^T`.
pub fn soft_bin_likelihood(y: ComplexScalar, llr: f64, sigma2: f64) -> MomentGauss2 {
    let m = soft_symbol(llr);
    let yv = RealVec2::from_complex(y);
    MomentGauss2::new(
        yv * m,
        Mat2::scalar(sigma2) + Mat2::outer(yv, yv) * (1.0 - m * m),
    )
}

/// Linear MMSE channel estimate from soft symbol statistics.
///
/// A white time-domain prior stays white per subcarrier (variance `N v`
/// per dimension), so the estimate is a per-bin Gaussian fusion followed by
/// an inverse DFT.
pub fn lmmse_channel_estimate(
    y_f: &[ComplexScalar],
    llrs: &[f64],
    sigma2: f64,
    prior: ChannelPrior,
    tap_variance: f64,
) -> Result<Vec<ComplexScalar>> {
    if y_f.len() != llrs.len() {
        return Err(Error::LengthMismatch {
            expected: y_f.len(),
            found: llrs.len(),
        });
    }
    let n = y_f.len() as f64;
    let mut h_f = Vec::with_capacity(y_f.len());
    for (&y, &l) in y_f.iter().zip(llrs) {
        let lik = soft_bin_likelihood(y, l, sigma2);
        let est = match prior {
            ChannelPrior::None => lik.mean,
            ChannelPrior::Gaussian => {
                let p = MomentGauss2::new(RealVec2::ZERO, Mat2::scalar(n * tap_variance));
                (p.to_canon()? + lik.to_canon()?).to_moment()?.mean
            }
        };
        h_f.push(est.to_complex());
    }
    ifft(&h_f)
}

/// EP local factors: the tap mixture in time, and per subcarrier the
/// two-component mixture over `h_f = +-y_f` weighted by the LLR.
pub fn radar_locals(
    scenario: &RadarScenario,
    y_f: &[ComplexScalar],
    llrs: &[f64],
) -> Result<(Vec<LocalDistribution>, Vec<LocalDistribution>)> {
    if y_f.len() != scenario.n || llrs.len() != scenario.n {
        return Err(Error::LengthMismatch {
            expected: scenario.n,
            found: y_f.len().min(llrs.len()),
        });
    }
    let time = vec![scenario.tap_prior(); scenario.n];
    let cov = Mat2::scalar(scenario.sigma2);
    let freq = y_f
        .iter()
        .zip(llrs)
        .map(|(&y, &l)| {
            let yv = RealVec2::from_complex(y);
            let p = p_plus(l);
            LocalDistribution::GaussMix {
                weights: vec![p, 1.0 - p],
                components: vec![MomentGauss2::new(yv, cov), MomentGauss2::new(-yv, cov)],
            }
        })
        .collect();
    Ok((time, freq))
}
