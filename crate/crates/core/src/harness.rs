//! Monte-Carlo drivers for the three experiments and their CSV output.
//!
//! Trial `t` of a sweep draws all of its randomness from its own substream
//! of the experiment seed. Trials may run in parallel; results are reduced
//! in trial order, so the output does not depend on the thread count.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::comms::isi::{self, IsiScenario};
use crate::comms::metrics::{mse, ser};
use crate::comms::radar::{self, ChannelPrior, RadarScenario};
use crate::comms::rng::SeededRng;
use crate::comms::trial::{sample_trial_pair_with, TrialNoise};
use crate::dft::{fft_deterministic, is_power_of_two, posterior_marginals, PosteriorMarginals};
use crate::ep::{ep_dft, ep_fft, EpConfig, EpOutput};
use crate::error::{Error, Result};
use crate::gaussian::MomentGauss2;
use crate::graph::{build_graph, FftGraph, GabpConfig, GabpState, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    GabpAnalysis,
    Isi,
    Radar,
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Experiment::GabpAnalysis => "gabp-analysis",
            Experiment::Isi => "isi",
            Experiment::Radar => "radar",
        })
    }
}

/// Which GaBP schedules the analysis sweep runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleChoice {
    Flooding,
    Layered,
    Both,
}

impl ScheduleChoice {
    pub fn schedules(self) -> Vec<Schedule> {
        match self {
            ScheduleChoice::Flooding => vec![Schedule::Flooding],
            ScheduleChoice::Layered => vec![Schedule::Layered],
            ScheduleChoice::Both => vec![Schedule::Layered, Schedule::Flooding],
        }
    }
}

impl std::fmt::Display for ScheduleChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleChoice::Flooding => "flooding",
            ScheduleChoice::Layered => "layered",
            ScheduleChoice::Both => "both",
        })
    }
}

/// Everything a sweep needs. Fields that do not apply to the chosen
/// experiment are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub trials: usize,
    pub seed: u64,
    /// EP and GaBP settings; `ep.schedule` is the EP-FFT schedule.
    pub ep: EpConfig,

    // GaBP analysis
    pub n_min: usize,
    pub n_max: usize,
    /// Largest size compared against the dense posterior.
    pub exact_max_n: usize,
    pub schedules: ScheduleChoice,
    pub trial_noise: TrialNoise,

    // Communication sweeps
    pub snr_db: Vec<f64>,
    /// ISI information block length.
    pub block: usize,
    /// Radar subcarrier count.
    pub radar_n: usize,
    pub sparsity: f64,
    pub c: f64,
}

impl ExperimentConfig {
    fn base(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            trials: 100,
            seed: 0,
            ep: EpConfig::default(),
            n_min: 8,
            n_max: 4096,
            exact_max_n: 1024,
            schedules: ScheduleChoice::Both,
            trial_noise: TrialNoise::default(),
            snr_db: Vec::new(),
            block: isi::STANDARD_BLOCK,
            radar_n: radar::STANDARD_SIZE,
            sparsity: radar::STANDARD_SPARSITY,
            c: radar::STANDARD_LLR_SCALE,
        }
    }

    pub fn gabp_analysis() -> Self {
        ExperimentConfig::base(Experiment::GabpAnalysis)
    }

    pub fn isi() -> Self {
        ExperimentConfig {
            snr_db: snr_grid(0.0, 1.0, 14.0).expect("valid grid"),
            ..ExperimentConfig::base(Experiment::Isi)
        }
    }

    pub fn radar() -> Self {
        ExperimentConfig {
            snr_db: snr_grid(-15.0, 1.0, 15.0).expect("valid grid"),
            ..ExperimentConfig::base(Experiment::Radar)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        self.ep.validate()?;
        match self.experiment {
            Experiment::GabpAnalysis => {
                for n in [self.n_min, self.n_max] {
                    if n < 2 || !is_power_of_two(n) {
                        return bad(format!("N = {n} must be a power of two, at least 2"));
                    }
                }
                if self.n_min > self.n_max {
                    return bad(format!("empty N range {}..{}", self.n_min, self.n_max));
                }
            }
            Experiment::Isi | Experiment::Radar => {
                if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
                    return bad("SNR grid must be non-empty and finite".into());
                }
                if self.experiment == Experiment::Isi && self.block == 0 {
                    return bad("block length must be positive".into());
                }
                if self.experiment == Experiment::Radar {
                    if self.radar_n < 2 || !is_power_of_two(self.radar_n) {
                        return bad(format!(
                            "N = {} must be a power of two, at least 2",
                            self.radar_n
                        ));
                    }
                    RadarScenario::new(self.radar_n, self.sparsity, 1.0, self.c)?;
                }
            }
        }
        Ok(())
    }

    /// Sizes of the analysis sweep.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::successors(Some(self.n_min), |n| Some(n * 2))
            .take_while(|&n| n <= self.n_max)
            .collect()
    }

    /// `key = value` lines echoed at the top of every CSV.
    pub fn describe(&self) -> Vec<String> {
        let mut out = vec![
            format!("experiment = {}", self.experiment),
            format!("seed = {}", self.seed),
            format!("rng = {} (one substream per trial)", SeededRng::ALGORITHM),
            format!("trials = {}", self.trials),
        ];
        let ep = &self.ep;
        match self.experiment {
            Experiment::GabpAnalysis => {
                out.push(format!(
                    "N = {}..{} (powers of two)",
                    self.n_min, self.n_max
                ));
                out.push(format!("schedule = {}", self.schedules));
                out.push(format!("trial_noise = {}", self.trial_noise));
                out.push(format!("exact_reference_max_N = {}", self.exact_max_n));
            }
            Experiment::Isi => {
                out.push(format!("schedule = {}", ep.schedule));
                out.push(format!("L = {}", ep.iterations));
                out.push(format!("beta = {}", ep.beta));
                out.push(format!("warm_start = {}", ep.warm_start));
                let taps: Vec<String> = isi::STANDARD_TAPS.iter().map(|t| t.to_string()).collect();
                out.push(format!("taps = {}", taps.join(" ")));
                let sc = IsiScenario::new(IsiScenario::standard(0.0).taps, 1.0, self.block)
                    .expect("validated");
                out.push(format!("K = {}", sc.k));
                out.push(format!("N = {}", sc.n));
                out.push("snr_definition = 10 log10(1 / sigma^2), sigma^2 = noise variance per real dimension, unit-energy BPSK".into());
                out.push("MAP = Viterbi sequence detector; LMMSE FIR = block linear MMSE with unit-variance symbols".into());
            }
            Experiment::Radar => {
                out.push(format!("schedule = {}", ep.schedule));
                out.push(format!("L = {}", ep.iterations));
                out.push(format!("beta = {}", ep.beta));
                out.push(format!("warm_start = {}", ep.warm_start));
                out.push(format!("N = {}", self.radar_n));
                out.push(format!("sparsity = {}", self.sparsity));
                out.push(format!("c = {}", self.c));
                out.push(format!(
                    "tap_prior = {} CN(0, {} per dim) + {} CN(0, {} per dim)",
                    self.sparsity,
                    radar::VAR_LARGE_TAP,
                    1.0 - self.sparsity,
                    radar::VAR_SMALL_TAP
                ));
                out.push(
                    "snr_definition = 10 log10(E|h_f|^2 / (2 sigma^2)), E|h_f|^2 = 2 N (s v_large + (1 - s) v_small), sigma^2 = noise variance per real dimension"
                        .into(),
                );
                out.push("MSE = mean |h_hat - h|^2 over the N time-domain taps".into());
            }
        }
        out.push(format!("tau_conv = {:e}", ep.tau_conv));
        out.push(format!("max_layered_iters = {}", ep.max_layered_iters));
        out.push(format!("V_large = {:e}", ep.v_large));
        out.push(format!("min_variance = {:e}", ep.min_variance));
        out
    }
}

/// `start:step:stop`, inclusive of `stop` up to rounding.
pub fn snr_grid(start: f64, step: f64, stop: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::InvalidConfig(format!(
            "bad grid {start}:{step}:{stop}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::InvalidConfig(format!(
            "grid {start}:{step}:{stop} has too many points"
        )));
    }
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Parse `start:step:stop` or a single value.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidConfig(format!("bad number '{s}' in grid '{text}'")))
    };
    match parts.as_slice() {
        [one] => snr_grid(num(one)?, 1.0, num(one)?),
        [a, b, c] => snr_grid(num(a)?, num(b)?, num(c)?),
        _ => Err(Error::InvalidConfig(format!(
            "grid '{text}' is not start:step:stop"
        ))),
    }
}

/// Mean and linearly interpolated quartiles of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Summary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> MeanSe {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return MeanSe { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanSe {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

/// Named columns with a comment block, written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    /// `None` cells are written empty.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for c in &self.comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let mut line = String::new();
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                if let Some(v) = cell {
                    format_cell(&mut line, *v);
                }
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// Values of a column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Shortest round-trip representation; scientific outside `[1e-4, 1e15)`.
fn format_cell(out: &mut String, v: f64) {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        write!(out, "{v}").expect("writing to a string");
    } else {
        write!(out, "{v:e}").expect("writing to a string");
    }
}

/// Progress sink; the CLI prints to stderr.
pub type Progress<'a> = &'a (dyn Fn(&str) + Sync);

/// Run `trials` closures (possibly in parallel) and return their results
/// in trial order. The first failing trial, by index, becomes the error.
fn run_trials<T: Send>(
    cfg: &ExperimentConfig,
    point: &str,
    stream_base: u64,
    f: impl Fn(&mut SeededRng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let stream = stream_base + t as u64;
            let mut rng = SeededRng::substream(cfg.seed, stream);
            f(&mut rng).map_err(|e| Error::Trial {
                trial: t,
                point: point.to_string(),
                seed: cfg.seed,
                stream,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

// ---------------------------------------------------------------------------
// GaBP analysis

/// Accuracy of one GaBP run against the dense posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeliefErrors {
    /// Mean over components of `||mu - mu_hat||_1`.
    pub mean_abs: f64,
    /// Largest per-component `||mu - mu_hat||_1`.
    pub max_abs: f64,
    /// Mean over components of `tr(|Sigma - Sigma_hat| ./ Sigma)`.
    pub var_rel: f64,
    /// Mean over components of `tr((Sigma_hat - Sigma) ./ Sigma)`.
    pub var_signed: f64,
}

pub fn belief_errors(approx: &[MomentGauss2], exact: &[MomentGauss2]) -> BeliefErrors {
    let mut e = BeliefErrors {
        mean_abs: 0.0,
        max_abs: 0.0,
        var_rel: 0.0,
        var_signed: 0.0,
    };
    for (a, x) in approx.iter().zip(exact) {
        let d = (a.mean - x.mean).norm_l1();
        e.mean_abs += d;
        e.max_abs = e.max_abs.max(d);
        for i in 0..2 {
            let r = (a.cov[(i, i)] - x.cov[(i, i)]) / x.cov[(i, i)];
            e.var_rel += r.abs();
            e.var_signed += r;
        }
    }
    let n = approx.len() as f64;
    e.mean_abs /= n;
    e.var_rel /= n;
    e.var_signed /= n;
    e
}

#[derive(Clone, Debug, PartialEq)]
pub struct GabpTrialResult {
    pub layered_iterations: f64,
    pub converged: bool,
    pub psd_violations: usize,
    pub errors: Option<BeliefErrors>,
}

/// Statistics of one schedule at one size.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleStats {
    pub schedule: Schedule,
    pub iters: Summary,
    pub mean_abs_err: Option<Summary>,
    pub max_abs_err: Option<f64>,
    pub var_rel_err: Option<Summary>,
    pub var_signed_err: Option<Summary>,
    pub unconverged: usize,
    pub psd_violations: usize,
    pub trials: Vec<GabpTrialResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GabpAnalysisRow {
    pub n: usize,
    pub stats: Vec<ScheduleStats>,
}

impl GabpAnalysisRow {
    pub fn schedule(&self, s: Schedule) -> Option<&ScheduleStats> {
        self.stats.iter().find(|x| x.schedule == s)
    }
}

fn gabp_trial(
    cfg: &ExperimentConfig,
    graph: &FftGraph,
    schedules: &[Schedule],
    rng: &mut SeededRng,
) -> Result<Vec<GabpTrialResult>> {
    let n = graph.size();
    let pair = sample_trial_pair_with(n, cfg.trial_noise, rng)?;
    let (time, freq) = pair.site_sets()?;
    let exact: Option<PosteriorMarginals> = if n <= cfg.exact_max_n {
        Some(posterior_marginals(&time, &freq)?)
    } else {
        None
    };
    schedules
        .iter()
        .map(|&schedule| {
            let gcfg = GabpConfig {
                schedule,
                max_layered_iters: cfg.ep.max_layered_iters,
                tau_conv: cfg.ep.tau_conv,
                v_large: cfg.ep.v_large,
            };
            let mut state = GabpState::new(graph.clone(), gcfg.v_large);
            state.set_sites(&time, &freq)?;
            let report = state.run(&gcfg)?;
            let (bt, bf) = state.beliefs();
            let errors = exact.as_ref().map(|ex| {
                let approx: Vec<_> = bt.iter().chain(&bf).copied().collect();
                let truth: Vec<_> = ex.time.iter().chain(&ex.freq).copied().collect();
                belief_errors(&approx, &truth)
            });
            Ok(GabpTrialResult {
                layered_iterations: report.layered_iterations,
                converged: report.converged,
                psd_violations: state.psd_violations(),
                errors,
            })
        })
        .collect()
}

/// Iteration counts and accuracy of GaBP on random trial pairs, per size.
pub fn run_gabp_analysis(
    cfg: &ExperimentConfig,
    progress: Progress,
) -> Result<Vec<GabpAnalysisRow>> {
    cfg.validate()?;
    let schedules = cfg.schedules.schedules();
    let mut rows = Vec::new();
    for n in cfg.sizes() {
        progress(&format!("gabp-analysis: N = {n}, {} trials", cfg.trials));
        let graph = build_graph(n)?;
        let log2n = n.trailing_zeros() as u64;
        let per_trial = run_trials(cfg, &format!("N={n}"), log2n << 32, |rng| {
            gabp_trial(cfg, &graph, &schedules, rng)
        })?;
        let stats = schedules
            .iter()
            .enumerate()
            .map(|(i, &schedule)| {
                let trials: Vec<GabpTrialResult> = per_trial.iter().map(|t| t[i].clone()).collect();
                let iters: Vec<f64> = trials.iter().map(|t| t.layered_iterations).collect();
                let errs: Option<Vec<BeliefErrors>> = trials.iter().map(|t| t.errors).collect();
                let pick = |f: fn(&BeliefErrors) -> f64| {
                    errs.as_ref()
                        .map(|e| Summary::of(&e.iter().map(f).collect::<Vec<_>>()))
                };
                ScheduleStats {
                    schedule,
                    iters: Summary::of(&iters),
                    mean_abs_err: pick(|e| e.mean_abs),
                    max_abs_err: errs
                        .as_ref()
                        .map(|e| e.iter().map(|x| x.max_abs).fold(0.0, f64::max)),
                    var_rel_err: pick(|e| e.var_rel),
                    var_signed_err: pick(|e| e.var_signed),
                    unconverged: trials.iter().filter(|t| !t.converged).count(),
                    psd_violations: trials.iter().map(|t| t.psd_violations).sum(),
                    trials,
                }
            })
            .collect();
        rows.push(GabpAnalysisRow { n, stats });
    }
    Ok(rows)
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::Flooding => "flooding",
        Schedule::Layered => "layered",
    }
}

pub fn gabp_analysis_table(cfg: &ExperimentConfig, rows: &[GabpAnalysisRow]) -> Table {
    let mut header = vec!["log2N".to_string(), "N".to_string()];
    let schedules = cfg.schedules.schedules();
    for s in &schedules {
        let s = schedule_name(*s);
        for col in [
            "mean_iters",
            "q25_iters",
            "q75_iters",
            "mean_mu_abs_err",
            "q25_mu_abs_err",
            "q75_mu_abs_err",
            "max_mu_abs_err",
            "mean_var_rel_err",
            "q25_var_rel_err",
            "q75_var_rel_err",
            "median_var_signed_err",
            "q25_var_signed_err",
            "q75_var_signed_err",
            "unconverged",
        ] {
            header.push(format!("{col}_{s}"));
        }
    }
    let body = rows
        .iter()
        .map(|row| {
            let mut r = vec![Some(row.n.trailing_zeros() as f64), Some(row.n as f64)];
            for s in &schedules {
                let st = row.schedule(*s).expect("every row holds every schedule");
                let e = st.mean_abs_err;
                let v = st.var_rel_err;
                let b = st.var_signed_err;
                r.extend([
                    Some(st.iters.mean),
                    Some(st.iters.q25),
                    Some(st.iters.q75),
                    e.map(|x| x.mean),
                    e.map(|x| x.q25),
                    e.map(|x| x.q75),
                    st.max_abs_err,
                    v.map(|x| x.mean),
                    v.map(|x| x.q25),
                    v.map(|x| x.q75),
                    b.map(|x| x.median),
                    b.map(|x| x.q25),
                    b.map(|x| x.q75),
                    Some(st.unconverged as f64),
                ]);
            }
            r
        })
        .collect();
    let mut comments = cfg.describe();
    comments.push("iters are in layered iterations (BP iterations / (2 log2 N - 1)); errors compare beliefs with the dense posterior over all 2N time and frequency components".into());
    Table {
        comments,
        header,
        rows: body,
    }
}

// ---------------------------------------------------------------------------
// ISI equalization

#[derive(Clone, Debug, PartialEq)]
pub struct IsiRow {
    pub snr_db: f64,
    pub zf: MeanSe,
    pub lmmse: MeanSe,
    pub ep_fft: MeanSe,
    pub ep_dft: MeanSe,
    pub map: MeanSe,
    /// EP-FFT rounds whose GaBP run hit the iteration cap.
    pub gabp_cap_hits: usize,
    /// EP site updates skipped, summed over trials and both schemes.
    pub skipped_sites: usize,
}

fn skipped(out: &EpOutput) -> usize {
    out.diagnostics.rounds.iter().map(|r| r.skipped.len()).sum()
}

fn cap_hits(out: &EpOutput) -> usize {
    out.diagnostics
        .rounds
        .iter()
        .filter(|r| r.gabp.as_ref().is_some_and(|g| !g.converged))
        .count()
}

struct IsiTrial {
    ser: [f64; 5],
    cap_hits: usize,
    skipped: usize,
}

fn isi_trial(cfg: &ExperimentConfig, sc: &IsiScenario, rng: &mut SeededRng) -> Result<IsiTrial> {
    let u = isi::random_bpsk(sc.k, rng);
    let y = isi::simulate_isi(&u, sc, rng)?;
    let y_f = fft_deterministic(&y)?;
    let h_f = sc.freq_response();
    let (tl, fl) = isi::isi_locals(sc, &y_f, &h_f)?;
    let fft = ep_fft(&tl, &fl, &cfg.ep)?;
    let dft = ep_dft(&tl, &fl, &cfg.ep)?;
    let decisions = [
        isi::zf_equalize(&y_f, &h_f, sc.k)?,
        isi::lmmse_equalize(&y_f, &h_f, sc.sigma2, sc.k)?,
        isi::decide(&fft.time, sc.k),
        isi::decide(&dft.time, sc.k),
        isi::viterbi_map_detect(&y, &sc.taps, sc.sigma2, sc.k)?,
    ];
    let mut ser_out = [0.0; 5];
    for (s, d) in ser_out.iter_mut().zip(&decisions) {
        *s = ser(d, &u)?;
    }
    Ok(IsiTrial {
        ser: ser_out,
        cap_hits: cap_hits(&fft),
        skipped: skipped(&fft) + skipped(&dft),
    })
}

/// Symbol error rates of all equalizers over the SNR grid. Every SNR point
/// reuses the same symbol and normalized noise draws per trial.
pub fn run_isi_experiment(cfg: &ExperimentConfig, progress: Progress) -> Result<Vec<IsiRow>> {
    cfg.validate()?;
    let taps = IsiScenario::standard(0.0).taps;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        progress(&format!("isi: SNR = {snr} dB, {} trials", cfg.trials));
        let sc = IsiScenario::new(taps.clone(), isi::sigma2_from_snr_db(snr), cfg.block)?;
        let trials = run_trials(cfg, &format!("SNR={snr} dB"), 0, |rng| {
            isi_trial(cfg, &sc, rng)
        })?;
        let col = |i: usize| MeanSe::of(&trials.iter().map(|t| t.ser[i]).collect::<Vec<_>>());
        rows.push(IsiRow {
            snr_db: snr,
            zf: col(0),
            lmmse: col(1),
            ep_fft: col(2),
            ep_dft: col(3),
            map: col(4),
            gabp_cap_hits: trials.iter().map(|t| t.cap_hits).sum(),
            skipped_sites: trials.iter().map(|t| t.skipped).sum(),
        });
    }
    Ok(rows)
}

pub fn isi_table(cfg: &ExperimentConfig, rows: &[IsiRow]) -> Table {
    let names = ["ZF", "LMMSE FIR", "FFTEP", "DFTEP", "MAP"];
    let mut header = vec!["SNR (dB)".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.extend(names.iter().map(|s| format!("{s} se")));
    header.push("FFTEP gabp cap hits".into());
    header.push("EP skipped sites".into());
    let body = rows
        .iter()
        .map(|r| {
            let cols = [r.zf, r.lmmse, r.ep_fft, r.ep_dft, r.map];
            let mut v = vec![Some(r.snr_db)];
            v.extend(cols.iter().map(|c| Some(c.mean)));
            v.extend(cols.iter().map(|c| Some(c.se)));
            v.push(Some(r.gabp_cap_hits as f64));
            v.push(Some(r.skipped_sites as f64));
            v
        })
        .collect();
    let mut comments = cfg.describe();
    comments.push("columns hold symbol error rates averaged over trials; 'se' columns are their standard errors".into());
    Table {
        comments,
        header,
        rows: body,
    }
}

// ---------------------------------------------------------------------------
// Radar channel estimation

#[derive(Clone, Debug, PartialEq)]
pub struct RadarRow {
    pub snr_db: f64,
    pub zf: MeanSe,
    pub lmmse: MeanSe,
    pub lmmse_prior: MeanSe,
    pub ep_dft: MeanSe,
    pub ep_fft: MeanSe,
    /// Symbol error rate of the hard LLR decisions.
    pub hard_ser: MeanSe,
    pub gabp_cap_hits: usize,
    pub skipped_sites: usize,
}

struct RadarTrial {
    mse: [f64; 5],
    hard_ser: f64,
    cap_hits: usize,
    skipped: usize,
}

fn radar_trial(
    cfg: &ExperimentConfig,
    sc: &RadarScenario,
    rng: &mut SeededRng,
) -> Result<RadarTrial> {
    let h = radar::sample_radar_channel(sc, rng);
    let u = isi::random_bpsk(sc.n, rng);
    let llr = radar::sample_llrs(&u, sc.c, rng)?;
    let y = radar::simulate_radar(&h, &u, sc.sigma2, rng)?;
    let (tl, fl) = radar::radar_locals(sc, &y, &llr)?;
    let fft = ep_fft(&tl, &fl, &cfg.ep)?;
    let dft = ep_dft(&tl, &fl, &cfg.ep)?;
    let means = |o: &EpOutput| {
        o.time
            .iter()
            .map(|m| m.mean.to_complex())
            .collect::<Vec<_>>()
    };
    let estimates = [
        radar::zf_channel_estimate(&y, &llr)?,
        radar::lmmse_channel_estimate(&y, &llr, sc.sigma2, ChannelPrior::None, sc.tap_variance())?,
        radar::lmmse_channel_estimate(
            &y,
            &llr,
            sc.sigma2,
            ChannelPrior::Gaussian,
            sc.tap_variance(),
        )?,
        means(&dft),
        means(&fft),
    ];
    let mut out = [0.0; 5];
    for (m, e) in out.iter_mut().zip(&estimates) {
        *m = mse(e, &h)?;
    }
    Ok(RadarTrial {
        mse: out,
        hard_ser: ser(&radar::hard_decisions(&llr), &u)?,
        cap_hits: cap_hits(&fft),
        skipped: skipped(&fft) + skipped(&dft),
    })
}

/// Channel estimation error of all estimators over the SNR grid, with the
/// same channel, symbol, LLR and normalized noise draws at every SNR.
pub fn run_radar_experiment(cfg: &ExperimentConfig, progress: Progress) -> Result<Vec<RadarRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        progress(&format!("radar: SNR = {snr} dB, {} trials", cfg.trials));
        let mut sc = RadarScenario::new(cfg.radar_n, cfg.sparsity, 1.0, cfg.c)?;
        sc.sigma2 = sc.sigma2_for_snr_db(snr);
        let trials = run_trials(cfg, &format!("SNR={snr} dB"), 0, |rng| {
            radar_trial(cfg, &sc, rng)
        })?;
        let col = |i: usize| MeanSe::of(&trials.iter().map(|t| t.mse[i]).collect::<Vec<_>>());
        rows.push(RadarRow {
            snr_db: snr,
            zf: col(0),
            lmmse: col(1),
            lmmse_prior: col(2),
            ep_dft: col(3),
            ep_fft: col(4),
            hard_ser: MeanSe::of(&trials.iter().map(|t| t.hard_ser).collect::<Vec<_>>()),
            gabp_cap_hits: trials.iter().map(|t| t.cap_hits).sum(),
            skipped_sites: trials.iter().map(|t| t.skipped).sum(),
        });
    }
    Ok(rows)
}

pub fn radar_table(cfg: &ExperimentConfig, rows: &[RadarRow]) -> Table {
    let l = cfg.ep.iterations;
    let names = [
        "c0 ZF".to_string(),
        "c0 LMMSE".to_string(),
        "c0 LMMSE Gauss".to_string(),
        format!("c0 DFTEP {l}"),
        format!("c0 FFTEP {l} BP{}", cfg.ep.schedule),
    ];
    let mut header = vec!["Sensing SNR (dB)".to_string()];
    header.extend(names.iter().cloned());
    header.extend(names.iter().map(|s| format!("{s} se")));
    header.push("hard SER".into());
    header.push("FFTEP gabp cap hits".into());
    header.push("EP skipped sites".into());
    let body = rows
        .iter()
        .map(|r| {
            let cols = [r.zf, r.lmmse, r.lmmse_prior, r.ep_dft, r.ep_fft];
            let mut v = vec![Some(r.snr_db)];
            v.extend(cols.iter().map(|c| Some(c.mean)));
            v.extend(cols.iter().map(|c| Some(c.se)));
            v.push(Some(r.hard_ser.mean));
            v.push(Some(r.gabp_cap_hits as f64));
            v.push(Some(r.skipped_sites as f64));
            v
        })
        .collect();
    let mut comments = cfg.describe();
    comments.push(
        "columns hold channel MSE averaged over trials; 'se' columns are their standard errors"
            .into(),
    );
    Table {
        comments,
        header,
        rows: body,
    }
}

/// Run the configured experiment and render its table.
pub fn run_experiment(cfg: &ExperimentConfig, progress: Progress) -> Result<Table> {
    match cfg.experiment {
        Experiment::GabpAnalysis => {
            Ok(gabp_analysis_table(cfg, &run_gabp_analysis(cfg, progress)?))
        }
        Experiment::Isi => Ok(isi_table(cfg, &run_isi_experiment(cfg, progress)?)),
        Experiment::Radar => Ok(radar_table(cfg, &run_radar_experiment(cfg, progress)?)),
    }
}

/// Least-squares fit `y = a + b x` with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    LineFit {
        a,
        b,
        r2: 1.0 - ss_res / ss_tot,
    }
}

/// SNR at which a decreasing curve first crosses `level`, interpolating
/// linearly in `log10(value)`. `None` if it never gets there.
pub fn crossing_snr(snr: &[f64], values: &[f64], level: f64) -> Option<f64> {
    for i in 1..snr.len() {
        let (a, b) = (values[i - 1], values[i]);
        if a > level && b <= level {
            if b <= 0.0 {
                return Some(snr[i - 1] + (snr[i] - snr[i - 1]) * (a - level) / (a - b));
            }
            let (la, lb, ll) = (a.log10(), b.log10(), level.log10());
            return Some(snr[i - 1] + (snr[i] - snr[i - 1]) * (la - ll) / (la - lb));
        }
    }
    None
}
