//! Expectation propagation with Gaussian sites on both sides of the DFT.
//!
//! Every time-domain component and every frequency-domain component has a
//! true local factor (a pmf, a Gaussian mixture or a Gaussian) and a
//! Gaussian site standing in for it. Each round refines all sites from the
//! current beliefs by moment matching, then recomputes the beliefs, either
//! exactly through the dense DFT posterior or approximately with GaBP on the
//! FFT graph.

use crate::dft::{posterior_marginals, DiagonalSiteSet, Domain};
use crate::error::{Error, Result};
use crate::gaussian::{
    is_positive_definite, CanonGauss2, ComplexScalar, Mat2, MomentGauss2, RealVec2,
};
use crate::graph::{
    build_graph, ConvergenceReport, GabpConfig, GabpState, Schedule, TAU_CONV, V_LARGE,
};

/// Gaussian surrogate of one local factor, in canonical form.
pub type SiteParams = CanonGauss2;

/// Smallest eigenvalue allowed in a tilted covariance before it is
/// inverted. Discrete supports on the real axis have zero imaginary
/// variance, which would otherwise give infinite site precision.
pub const MIN_VARIANCE: f64 = 1e-8;

/// True local factor of one component.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalDistribution {
    /// Point masses at `support` with unnormalized log-weights.
    DiscretePmf {
        support: Vec<ComplexScalar>,
        log_weights: Vec<f64>,
    },
    /// Mixture of Gaussian densities.
    GaussMix {
        weights: Vec<f64>,
        components: Vec<MomentGauss2>,
    },
    FixedGaussian(MomentGauss2),
}

impl LocalDistribution {
    /// `+1` with probability `p_plus`, `-1` otherwise.
    pub fn bpsk(p_plus: f64) -> Self {
        LocalDistribution::DiscretePmf {
            support: vec![ComplexScalar::new(1.0, 0.0), ComplexScalar::new(-1.0, 0.0)],
            log_weights: vec![p_plus.ln(), (1.0 - p_plus).ln()],
        }
    }

    /// `+1` or `-1` with log-likelihood ratio `llr = ln p(+1) - ln p(-1)`.
    pub fn bpsk_llr(llr: f64) -> Self {
        LocalDistribution::DiscretePmf {
            support: vec![ComplexScalar::new(1.0, 0.0), ComplexScalar::new(-1.0, 0.0)],
            log_weights: vec![0.5 * llr, -0.5 * llr],
        }
    }

    pub fn point_mass(z: ComplexScalar) -> Self {
        LocalDistribution::DiscretePmf {
            support: vec![z],
            log_weights: vec![0.0],
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    hi + v.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// Normalized weights from log-weights; `None` if nothing survives.
fn normalize(log_w: &[f64]) -> Option<Vec<f64>> {
    let z = log_sum_exp(log_w);
    if !z.is_finite() {
        return None;
    }
    Some(log_w.iter().map(|l| (l - z).exp()).collect())
}

fn mixture_moments(weights: &[f64], parts: &[MomentGauss2]) -> MomentGauss2 {
    let mean = parts
        .iter()
        .zip(weights)
        .fold(RealVec2::ZERO, |acc, (p, w)| acc + p.mean * *w);
    let cov = parts.iter().zip(weights).fold(Mat2::ZERO, |acc, (p, w)| {
        let d = p.mean - mean;
        acc + (p.cov + Mat2::outer(d, d)) * *w
    });
    MomentGauss2::new(mean, cov.symmetrize())
}

/// Mean and covariance of `local(x) * exp(cavity.info^T x - x^T cavity.prec x / 2)`.
///
/// The cavity may be improper for discrete locals. Mixture components must
/// fuse with the cavity into proper Gaussians.
pub fn tilted_moments(local: &LocalDistribution, cavity: &CanonGauss2) -> Result<MomentGauss2> {
    match local {
        LocalDistribution::DiscretePmf {
            support,
            log_weights,
        } => {
            if support.is_empty() || support.len() != log_weights.len() {
                return Err(Error::DegenerateTilt("malformed pmf"));
            }
            let points: Vec<RealVec2> =
                support.iter().map(|z| RealVec2::from_complex(*z)).collect();
            let log_w: Vec<f64> = points
                .iter()
                .zip(log_weights)
                .map(|(u, lw)| lw + cavity.info.dot(*u) - 0.5 * u.dot(cavity.prec * *u))
                .collect();
            let w = normalize(&log_w).ok_or(Error::DegenerateTilt("pmf weights underflow"))?;
            let parts: Vec<MomentGauss2> = points
                .iter()
                .map(|u| MomentGauss2::new(*u, Mat2::ZERO))
                .collect();
            Ok(mixture_moments(&w, &parts))
        }
        LocalDistribution::GaussMix {
            weights,
            components,
        } => {
            if components.is_empty() || components.len() != weights.len() {
                return Err(Error::DegenerateTilt("malformed mixture"));
            }
            let mut log_w = Vec::with_capacity(components.len());
            let mut parts = Vec::with_capacity(components.len());
            for (c, w) in components.iter().zip(weights) {
                let own = c
                    .to_canon()
                    .map_err(|_| Error::DegenerateTilt("mixture component not proper"))?;
                let fused = own + *cavity;
                if !is_positive_definite(fused.prec) {
                    return Err(Error::DegenerateTilt(
                        "mixture component fused with cavity is improper",
                    ));
                }
                let post = fused
                    .to_moment()
                    .map_err(|_| Error::DegenerateTilt("mixture fusion failed"))?;
                // log of w * integral N(x; m, S) exp(cavity) dx, up to constants
                // shared by all components.
                let ll = w.ln()
                    - 0.5 * c.cov.det().ln()
                    - 0.5 * own.info.dot(c.mean)
                    - 0.5 * fused.prec.det().ln()
                    + 0.5 * fused.info.dot(post.mean);
                log_w.push(ll);
                parts.push(post);
            }
            let r = normalize(&log_w)
                .ok_or(Error::DegenerateTilt("mixture responsibilities underflow"))?;
            Ok(mixture_moments(&r, &parts))
        }
        LocalDistribution::FixedGaussian(g) => {
            let own = g
                .to_canon()
                .map_err(|_| Error::DegenerateTilt("gaussian local not proper"))?;
            (own + *cavity)
                .to_moment()
                .map_err(|_| Error::DegenerateTilt("gaussian local fused with cavity is improper"))
        }
    }
}

/// One moment-matching update of a site.
///
/// Divides the old site out of the belief, matches moments of the tilted
/// distribution, and damps the new site towards the old one with weight
/// `beta`. A candidate whose precision is not positive definite is
/// discarded and the old site kept.
pub fn ep_site_update(
    local: &LocalDistribution,
    belief: &MomentGauss2,
    old: &SiteParams,
    beta: f64,
) -> Result<SiteParams> {
    ep_site_update_with_floor(local, belief, old, beta, MIN_VARIANCE)
}

/// [`ep_site_update`] with an explicit tilted-variance floor.
pub fn ep_site_update_with_floor(
    local: &LocalDistribution,
    belief: &MomentGauss2,
    old: &SiteParams,
    beta: f64,
    min_variance: f64,
) -> Result<SiteParams> {
    let b = belief.to_canon()?;
    let cavity = b - *old;
    let tilted = tilted_moments(local, &cavity)?;
    let tilted = MomentGauss2::new(tilted.mean, tilted.cov.with_eigen_floor(min_variance));
    let candidate = tilted.to_canon()? - cavity;
    let candidate = if is_positive_definite(candidate.prec) && candidate.is_finite() {
        candidate
    } else {
        *old
    };
    Ok(candidate.blend(beta, old, 1.0 - beta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpConfig {
    /// Number of EP rounds.
    pub iterations: usize,
    /// Damping weight of the new site, in `(0, 1]`. The first round is
    /// always undamped.
    pub beta: f64,
    pub schedule: Schedule,
    /// Keep GaBP messages between rounds.
    pub warm_start: bool,
    pub tau_conv: f64,
    pub max_layered_iters: usize,
    pub v_large: f64,
    pub min_variance: f64,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            iterations: 4,
            beta: 0.5,
            schedule: Schedule::Flooding,
            warm_start: true,
            tau_conv: TAU_CONV,
            max_layered_iters: 100,
            v_large: V_LARGE,
            min_variance: MIN_VARIANCE,
        }
    }
}

impl EpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.iterations == 0 {
            return bad("EP needs at least one round");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.tau_conv > 0.0) || self.max_layered_iters == 0 {
            return bad("convergence tolerance and iteration cap must be positive");
        }
        if !(self.v_large > 0.0) || !(self.min_variance > 0.0) {
            return bad("variance constants must be positive");
        }
        Ok(())
    }

    fn gabp(&self) -> GabpConfig {
        GabpConfig {
            schedule: self.schedule,
            max_layered_iters: self.max_layered_iters,
            tau_conv: self.tau_conv,
            v_large: self.v_large,
        }
    }
}

/// What happened in one EP round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundDiagnostics {
    /// GaBP report, when beliefs came from the FFT graph.
    pub gabp: Option<ConvergenceReport>,
    /// Sites whose update failed and kept their old parameters.
    pub skipped: Vec<(Domain, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpDiagnostics {
    pub rounds: Vec<RoundDiagnostics>,
}

impl EpDiagnostics {
    /// True if any GaBP run stopped at its iteration cap.
    pub fn hit_iteration_cap(&self) -> bool {
        self.rounds
            .iter()
            .any(|r| r.gabp.as_ref().is_some_and(|g| !g.converged))
    }
}

#[derive(Clone, Debug)]
pub struct EpOutput {
    pub time: Vec<MomentGauss2>,
    pub freq: Vec<MomentGauss2>,
    pub time_sites: Vec<SiteParams>,
    pub freq_sites: Vec<SiteParams>,
    pub diagnostics: EpDiagnostics,
}

/// Turns site sets into beliefs.
trait Propagator {
    fn propagate(
        &mut self,
        time: &DiagonalSiteSet,
        freq: &DiagonalSiteSet,
    ) -> Result<(
        Vec<MomentGauss2>,
        Vec<MomentGauss2>,
        Option<ConvergenceReport>,
    )>;
}

struct Dense;

impl Propagator for Dense {
    fn propagate(
        &mut self,
        time: &DiagonalSiteSet,
        freq: &DiagonalSiteSet,
    ) -> Result<(
        Vec<MomentGauss2>,
        Vec<MomentGauss2>,
        Option<ConvergenceReport>,
    )> {
        let m = posterior_marginals(time, freq)?;
        Ok((m.time, m.freq, None))
    }
}

struct Gabp {
    state: GabpState,
    cold: GabpState,
    cfg: GabpConfig,
    warm: bool,
}

impl Propagator for Gabp {
    fn propagate(
        &mut self,
        time: &DiagonalSiteSet,
        freq: &DiagonalSiteSet,
    ) -> Result<(
        Vec<MomentGauss2>,
        Vec<MomentGauss2>,
        Option<ConvergenceReport>,
    )> {
        if !self.warm {
            self.state = self.cold.clone();
        }
        self.state.set_sites(time, freq)?;
        let report = self.state.run(&self.cfg)?;
        let (t, f) = self.state.beliefs();
        Ok((t, f, Some(report)))
    }
}

fn update_sites(
    locals: &[LocalDistribution],
    beliefs: &[MomentGauss2],
    sites: &mut [SiteParams],
    beta: f64,
    min_variance: f64,
    domain: Domain,
    skipped: &mut Vec<(Domain, usize)>,
) {
    let new: Vec<Option<SiteParams>> = locals
        .iter()
        .zip(beliefs)
        .zip(sites.iter())
        .map(|((local, belief), old)| {
            ep_site_update_with_floor(local, belief, old, beta, min_variance).ok()
        })
        .collect();
    for (i, (site, upd)) in sites.iter_mut().zip(new).enumerate() {
        match upd {
            Some(s) => *site = s,
            None => skipped.push((domain, i)),
        }
    }
}

fn ep_loop<P: Propagator>(
    time_locals: &[LocalDistribution],
    freq_locals: &[LocalDistribution],
    cfg: &EpConfig,
    prop: &mut P,
) -> Result<EpOutput> {
    cfg.validate()?;
    let n = time_locals.len();
    if freq_locals.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: freq_locals.len(),
        });
    }
    let flat = MomentGauss2::flat(cfg.v_large);
    let mut time_beliefs = vec![flat; n];
    let mut freq_beliefs = vec![flat; n];
    let mut time_sites = vec![SiteParams::ZERO; n];
    let mut freq_sites = vec![SiteParams::ZERO; n];
    let mut diagnostics = EpDiagnostics::default();
    for round in 0..cfg.iterations {
        // Starting from flat beliefs, an undamped first round sets every
        // site to the Gaussian projection of its local factor alone.
        let beta = if round == 0 { 1.0 } else { cfg.beta };
        let mut diag = RoundDiagnostics::default();
        update_sites(
            time_locals,
            &time_beliefs,
            &mut time_sites,
            beta,
            cfg.min_variance,
            Domain::Time,
            &mut diag.skipped,
        );
        update_sites(
            freq_locals,
            &freq_beliefs,
            &mut freq_sites,
            beta,
            cfg.min_variance,
            Domain::Frequency,
            &mut diag.skipped,
        );
        let ts = DiagonalSiteSet::new(Domain::Time, time_sites.clone());
        let fs = DiagonalSiteSet::new(Domain::Frequency, freq_sites.clone());
        let (t, f, report) = prop.propagate(&ts, &fs)?;
        time_beliefs = t;
        freq_beliefs = f;
        diag.gabp = report;
        diagnostics.rounds.push(diag);
    }
    Ok(EpOutput {
        time: time_beliefs,
        freq: freq_beliefs,
        time_sites,
        freq_sites,
        diagnostics,
    })
}

/// EP with beliefs from GaBP on the FFT graph. `N` must be a power of two.
pub fn ep_fft(
    time_locals: &[LocalDistribution],
    freq_locals: &[LocalDistribution],
    cfg: &EpConfig,
) -> Result<EpOutput> {
    let graph = build_graph(time_locals.len())?;
    let state = GabpState::new(graph, cfg.v_large);
    let mut prop = Gabp {
        cold: state.clone(),
        state,
        cfg: cfg.gabp(),
        warm: cfg.warm_start,
    };
    ep_loop(time_locals, freq_locals, cfg, &mut prop)
}

/// EP with exact beliefs from the dense DFT posterior. Works for any `N`.
pub fn ep_dft(
    time_locals: &[LocalDistribution],
    freq_locals: &[LocalDistribution],
    cfg: &EpConfig,
) -> Result<EpOutput> {
    ep_loop(time_locals, freq_locals, cfg, &mut Dense)
}
