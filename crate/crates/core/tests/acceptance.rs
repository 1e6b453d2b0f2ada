//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (bypassing output capture) and then asserts.
//!
//! The Monte-Carlo criteria run the full default configurations; expect
//! this target to take a long time on few cores.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ufft::comms::isi::{
    brute_force_map, random_bpsk, simulate_isi, viterbi_map_detect, IsiScenario,
};
use ufft::comms::rng::SeededRng;
use ufft::comms::trial::sample_trial_pair;
use ufft::dft::{
    dft_matrix, exact_posterior, fft_deterministic, marginals_of, DiagonalSiteSet, Domain,
};
use ufft::ep::{ep_dft, EpConfig, LocalDistribution};
use ufft::gaussian::{
    gauss_product_canon, underline_mat, underline_vec, CanonGauss2, ComplexScalar, Mat2,
    MomentGauss2, RealVec2,
};
use ufft::graph::{
    build_graph, butterfly_backward, butterfly_forward, ButterflyNode, GabpConfig, GabpState,
    Schedule,
};
use ufft::harness::{
    crossing_snr, fit_line, gabp_analysis_table, run_gabp_analysis, run_isi_experiment,
    run_radar_experiment, ExperimentConfig, GabpAnalysisRow, MeanSe, ScheduleChoice,
};

const SEED: u64 = 20_240_601;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance criterion {id}: {verdict}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn quiet(_: &str) {}

fn analysis() -> &'static (ExperimentConfig, Vec<GabpAnalysisRow>, f64) {
    static CELL: OnceLock<(ExperimentConfig, Vec<GabpAnalysisRow>, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig {
            seed: SEED,
            ..ExperimentConfig::gabp_analysis()
        };
        let start = Instant::now();
        let rows = run_gabp_analysis(&cfg, &quiet).expect("analysis sweep runs");
        (cfg, rows, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_1_flooding_mean_exactness() {
    let (_, rows, secs) = analysis();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for row in rows.iter().filter(|r| r.n <= 1024) {
        let st = row.schedule(Schedule::Flooding).unwrap();
        let e = st.max_abs_err.unwrap();
        worst = worst.max(e);
        detail.push(format!("N={}:{e:.1e}", row.n));
    }
    let pass = worst <= 1e-8;
    // Diagnostic only: the same problems iterated to a much tighter tolerance.
    let tight = ExperimentConfig {
        seed: SEED,
        n_max: 1024,
        trials: 20,
        schedules: ScheduleChoice::Flooding,
        ep: EpConfig {
            tau_conv: 1e-12,
            max_layered_iters: 1000,
            ..EpConfig::default()
        },
        ..ExperimentConfig::gabp_analysis()
    };
    let tight_worst = run_gabp_analysis(&tight, &quiet)
        .expect("tight sweep runs")
        .iter()
        .map(|r| r.schedule(Schedule::Flooding).unwrap().max_abs_err.unwrap())
        .fold(0.0, f64::max);
    report(
        1,
        pass,
        &format!(
            "max per-component |mean error| over 100 trials at tau_conv 1e-5 = {worst:.2e} (bound 1e-8) [{}]; diagnostic: 20 trials at tau_conv 1e-12 give {tight_worst:.1e}; shared sweep {secs:.0}s (target 300s, informational)",
            detail.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_iteration_scaling() {
    let (_, rows, _) = analysis();
    let mut pass = true;
    let mut detail = Vec::new();
    for s in [Schedule::Flooding, Schedule::Layered] {
        let x: Vec<f64> = rows
            .iter()
            .map(|r| (r.n.trailing_zeros() as f64).ln())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.schedule(s).unwrap().iters.mean)
            .collect();
        let fit = fit_line(&x, &y);
        let in_range = y.iter().all(|v| (3.0..=10.0).contains(v));
        pass &= in_range && fit.b > 0.0 && fit.r2 > 0.8;
        let means: Vec<String> = y.iter().map(|v| format!("{v:.2}")).collect();
        detail.push(format!(
            "{s}: means [{}], fit {:.3} + {:.3} ln(log2 N), R2 {:.3}",
            means.join(" "),
            fit.a,
            fit.b,
            fit.r2
        ));
    }
    report(2, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_3_variance_quality() {
    let (_, rows, _) = analysis();
    let rows: Vec<_> = rows.iter().filter(|r| r.n <= 1024).collect();
    let means: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.schedule(Schedule::Flooding)
                .unwrap()
                .var_rel_err
                .unwrap()
                .mean
        })
        .collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let mut unbiased = true;
    let mut bias = Vec::new();
    for r in &rows {
        let s = r
            .schedule(Schedule::Flooding)
            .unwrap()
            .var_signed_err
            .unwrap();
        unbiased &= s.median.abs() < s.iqr();
        bias.push(format!(
            "N={}: median {:.1e} IQR {:.1e}",
            r.n,
            s.median,
            s.iqr()
        ));
    }
    let pass = monotone && unbiased;
    let from_16 = means.windows(2).skip(1).all(|w| w[1] <= w[0]);
    let m: Vec<String> = means.iter().map(|v| format!("{v:.2e}")).collect();
    report(
        3,
        pass,
        &format!(
            "mean relative variance error by N [{}] non-increasing={monotone} (from N=16: {from_16}); signed error unbiased={unbiased}: {}",
            m.join(" "),
            bias.join(", ")
        ),
    );
    assert!(pass);
}

fn within(a: &MeanSe, b: &MeanSe) -> f64 {
    2.0 * (a.se * a.se + b.se * b.se).sqrt()
}

#[test]
fn criterion_4_isi_equalization() {
    let cfg = ExperimentConfig {
        seed: SEED,
        ..ExperimentConfig::isi()
    };
    let start = Instant::now();
    let rows = run_isi_experiment(&cfg, &quiet).expect("ISI sweep runs");
    let secs = start.elapsed().as_secs_f64();
    let snr: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    let fft: Vec<f64> = rows.iter().map(|r| r.ep_fft.mean).collect();
    let lin: Vec<f64> = rows.iter().map(|r| r.lmmse.mean).collect();
    let gain = match (
        crossing_snr(&snr, &lin, 1e-3),
        crossing_snr(&snr, &fft, 1e-3),
    ) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let gain_ok = gain.is_some_and(|g| (1.5..=2.5).contains(&g));
    let agree = rows
        .iter()
        .all(|r| (r.ep_fft.mean - r.ep_dft.mean).abs() <= within(&r.ep_fft, &r.ep_dft));
    let out_of_order: Vec<String> = rows
        .iter()
        .filter(|r| {
            !(r.map.mean <= r.ep_fft.mean + within(&r.map, &r.ep_fft)
                && r.ep_fft.mean <= r.lmmse.mean + within(&r.ep_fft, &r.lmmse)
                && r.lmmse.mean <= r.zf.mean + within(&r.lmmse, &r.zf))
        })
        .map(|r| format!("{} dB", r.snr_db))
        .collect();
    let ordered = out_of_order.is_empty();
    let fast = secs < 1800.0;
    let pass = gain_ok && agree && ordered && fast;
    let curve: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{}dB ZF {:.1e} LMMSE {:.1e} FFTEP {:.1e} DFTEP {:.1e} MAP {:.1e}",
                r.snr_db, r.zf.mean, r.lmmse.mean, r.ep_fft.mean, r.ep_dft.mean, r.map.mean
            )
        })
        .collect();
    report(
        4,
        pass,
        &format!(
            "gain at SER 1e-3 = {} dB (target 2 +- 0.5); EP-FFT/EP-DFT agree={agree}; ordering={ordered} (violated at [{}]); runtime {secs:.0}s (limit 1800s, {} threads) | {}",
            gain.map_or("n/a".into(), |g| format!("{g:.2}")),
            out_of_order.join(", "),
            rayon::current_num_threads(),
            curve.join(" | ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_radar_estimation() {
    let cfg = ExperimentConfig {
        seed: SEED,
        ..ExperimentConfig::radar()
    };
    let start = Instant::now();
    let rows = run_radar_experiment(&cfg, &quiet).expect("radar sweep runs");
    let secs = start.elapsed().as_secs_f64();
    let snr: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    let fft: Vec<f64> = rows.iter().map(|r| r.ep_fft.mean).collect();
    let prior: Vec<f64> = rows.iter().map(|r| r.lmmse_prior.mean).collect();
    let gain = match (
        crossing_snr(&snr, &prior, 1e-2),
        crossing_snr(&snr, &fft, 1e-2),
    ) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let gain_ok = gain.is_some_and(|g| (4.0..=6.0).contains(&g));
    // Diagnostic only: the same curves read as error per real dimension,
    // i.e. the crossing of 2e-2 in per-complex-tap units.
    let per_dim = match (
        crossing_snr(&snr, &prior, 2e-2),
        crossing_snr(&snr, &fft, 2e-2),
    ) {
        (Some(a), Some(b)) => format!("{:.2} dB", a - b),
        _ => "n/a".into(),
    };
    let floor = prior.iter().copied().fold(f64::INFINITY, f64::min);
    let hard = rows.iter().map(|r| r.hard_ser.mean).sum::<f64>() / rows.len() as f64;
    let hard_ok = (hard - 0.10).abs() <= 0.01;
    let fast = secs < 1800.0;
    let pass = gain_ok && hard_ok && fast;
    let curve: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{}dB ZF {:.1e} LMMSE {:.1e} Gauss {:.1e} DFTEP {:.1e} FFTEP {:.1e}",
                r.snr_db, r.zf.mean, r.lmmse.mean, r.lmmse_prior.mean, r.ep_dft.mean, r.ep_fft.mean
            )
        })
        .collect();
    report(
        5,
        pass,
        &format!(
            "gain at MSE 1e-2 = {} dB (target 5 +- 1; lowest Gaussian-prior LMMSE MSE on the grid {floor:.2e}; diagnostic per-real-dimension reading {per_dim}); hard-decision SER {hard:.4} (target 0.10 +- 0.01); runtime {secs:.0}s (limit 1800s, {} threads) | {}",
            gain.map_or("n/a".into(), |g| format!("{g:.2}")),
            rayon::current_num_threads(),
            curve.join(" | ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Criterion 6: small-instance oracles

fn spd(rng: &mut ChaCha8Rng) -> Mat2 {
    let a: f64 = rng.random_range(0.2..3.0);
    let d: f64 = rng.random_range(0.2..3.0);
    let b = rng.random_range(-0.9..0.9) * (a * d).sqrt();
    Mat2::new(a, b, b, d)
}

fn message(rng: &mut ChaCha8Rng) -> MomentGauss2 {
    MomentGauss2::new(
        RealVec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
        spd(rng),
    )
}

fn na(m: Mat2) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
}

/// Rows of the real 2x4 map selecting a linear combination of `(x0, x1)`.
fn selector(a: ComplexScalar, b: ComplexScalar) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2, 4);
    for (k, z) in [a, b].iter().enumerate() {
        s[(0, 2 * k)] = z.re;
        s[(0, 2 * k + 1)] = -z.im;
        s[(1, 2 * k)] = z.im;
        s[(1, 2 * k + 1)] = z.re;
    }
    s
}

/// Marginal of `target x` under the product of Gaussian factors
/// `N(a_k x; m_k, C_k)`, in information form over `x = (x0, x1)`.
fn dense_marginal(
    factors: &[(DMatrix<f64>, &MomentGauss2)],
    target: &DMatrix<f64>,
) -> MomentGauss2 {
    let mut lam = DMatrix::zeros(4, 4);
    let mut eta = DVector::zeros(4);
    for (a, m) in factors {
        let ci = na(m.cov).try_inverse().unwrap();
        lam += a.transpose() * &ci * a;
        eta += a.transpose() * &ci * DVector::from_column_slice(&[m.mean[0], m.mean[1]]);
    }
    let cov = lam.try_inverse().unwrap();
    let mean = target * &cov * eta;
    let c = target * cov * target.transpose();
    MomentGauss2::new(
        RealVec2::new(mean[0], mean[1]),
        Mat2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]),
    )
}

fn close(a: &MomentGauss2, b: &MomentGauss2) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        worst = worst.max((a.mean[i] - b.mean[i]).abs() / (1.0 + b.mean[i].abs()));
        for j in 0..2 {
            worst = worst.max((a.cov[(i, j)] - b.cov[(i, j)]).abs() / (1.0 + b.cov[(i, j)].abs()));
        }
    }
    worst
}

fn node_error(node: &ButterflyNode, rng: &mut ChaCha8Rng) -> f64 {
    let (x0, x1, y0, y1) = (message(rng), message(rng), message(rng), message(rng));
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let w = node.omega;
    let (sx0, sx1) = (selector(one, zero), selector(zero, one));
    let (sy0, sy1) = (selector(one, w), selector(one, -w));
    let (f0, f1) = butterfly_forward(node, &x0, &x1, &y0, &y1).unwrap();
    let (b0, b1) = butterfly_backward(node, &x0, &x1, &y0, &y1).unwrap();
    let expect = [
        (
            f0,
            dense_marginal(
                &[(sx0.clone(), &x0), (sx1.clone(), &x1), (sy1.clone(), &y1)],
                &sy0,
            ),
        ),
        (
            f1,
            dense_marginal(
                &[(sx0.clone(), &x0), (sx1.clone(), &x1), (sy0.clone(), &y0)],
                &sy1,
            ),
        ),
        (
            b0,
            dense_marginal(
                &[(sx1.clone(), &x1), (sy0.clone(), &y0), (sy1.clone(), &y1)],
                &sx0,
            ),
        ),
        (
            b1,
            dense_marginal(&[(sx0.clone(), &x0), (sy0, &y0), (sy1, &y1)], &sx1),
        ),
    ];
    expect
        .iter()
        .map(|(got, want)| close(got, want))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_6_small_instance_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    // (a) every butterfly of N = 4, 8, 16 against dense marginalization.
    let mut worst_bf = 0.0f64;
    for n in [4usize, 8, 16] {
        let g = build_graph(n).unwrap();
        for node in g.nodes() {
            worst_bf = worst_bf.max(node_error(node, &mut rng));
        }
    }
    let a_ok = worst_bf <= 1e-8;

    // (b) one EP-DFT round with Gaussian locals reproduces the exact posterior.
    let mut worst_ep = 0.0f64;
    for n in [4usize, 8, 16] {
        let t: Vec<MomentGauss2> = (0..n).map(|_| message(&mut rng)).collect();
        let f: Vec<MomentGauss2> = (0..n)
            .map(|_| {
                let m = message(&mut rng);
                MomentGauss2::new(m.mean * (n as f64).sqrt(), m.cov * n as f64)
            })
            .collect();
        let tl: Vec<_> = t
            .iter()
            .map(|m| LocalDistribution::FixedGaussian(*m))
            .collect();
        let fl: Vec<_> = f
            .iter()
            .map(|m| LocalDistribution::FixedGaussian(*m))
            .collect();
        let out = ep_dft(
            &tl,
            &fl,
            &EpConfig {
                iterations: 1,
                ..EpConfig::default()
            },
        )
        .unwrap();
        let ts = DiagonalSiteSet::from_moments(Domain::Time, &t).unwrap();
        let fs = DiagonalSiteSet::from_moments(Domain::Frequency, &f).unwrap();
        let (pt, pf) = exact_posterior(&ts, &fs).unwrap();
        for (got, want) in out
            .time
            .iter()
            .zip(marginals_of(&pt))
            .chain(out.freq.iter().zip(marginals_of(&pf)))
        {
            worst_ep = worst_ep.max(close(got, &want));
        }
    }
    let b_ok = worst_ep <= 1e-8;

    // (c) Viterbi against exhaustive search.
    let mut disagreements = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=12usize);
        let taps: Vec<ComplexScalar> = (0..rng.random_range(1..=5usize))
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let sc = IsiScenario::new(taps, 0.4, k).unwrap();
        let mut srng = SeededRng::substream(SEED, rng.random());
        let u = random_bpsk(k, &mut srng);
        let y = simulate_isi(&u, &sc, &mut srng).unwrap();
        if viterbi_map_detect(&y, &sc.taps, sc.sigma2, k).unwrap()
            != brute_force_map(&y, &sc.taps, sc.sigma2, k).unwrap()
        {
            disagreements += 1;
        }
    }
    let c_ok = disagreements == 0;
    let pass = a_ok && b_ok && c_ok;
    report(
        6,
        pass,
        &format!(
            "(a) butterfly vs dense marginal max rel err {worst_bf:.1e}; (b) one EP-DFT round vs exact posterior {worst_ep:.1e}; (c) Viterbi vs brute force disagreements {disagreements}/100"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Criterion 7: property suite

fn cplx(rng: &mut ChaCha8Rng) -> ComplexScalar {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

#[test]
fn criterion_7_property_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let mut notes = Vec::new();

    // underline is a homomorphism.
    let mut hom = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=6usize);
        let a = faer::Mat::from_fn(n, n, |_, _| cplx(&mut rng));
        let b = faer::Mat::from_fn(n, n, |_, _| cplx(&mut rng));
        let x: Vec<_> = (0..n).map(|_| cplx(&mut rng)).collect();
        let ab = &a * &b;
        let lhs = underline_mat(ab.as_ref()).into_inner();
        let rhs = underline_mat(a.as_ref()).into_inner() * underline_mat(b.as_ref()).into_inner();
        hom = hom.max((&lhs - &rhs).norm_max());
        let ax: Vec<_> = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum::<ComplexScalar>())
            .collect();
        let lhs = underline_vec(&ax);
        let rhs = underline_mat(a.as_ref()).mul_vec(&underline_vec(&x));
        for (p, q) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            hom = hom.max((p - q).abs());
        }
    }
    let hom_ok = hom <= 1e-10;
    notes.push(format!("underline homomorphism {hom:.1e}"));

    // W conj(W) = N I and the FFT against the dense DFT.
    let mut wcw = 0.0f64;
    let mut fft_err = 0.0f64;
    for m in 0..=10 {
        let n = 1usize << m;
        let w = dft_matrix(n);
        if n <= 256 {
            let e = w.entries();
            for i in 0..n {
                for j in 0..n {
                    let s: ComplexScalar = (0..n).map(|k| e[(i, k)] * e[(k, j)].conj()).sum();
                    let want = if i == j { n as f64 } else { 0.0 };
                    wcw = wcw.max((s - want).norm() / n as f64);
                }
            }
        }
        let x: Vec<_> = (0..n).map(|_| cplx(&mut rng)).collect();
        let fast = fft_deterministic(&x).unwrap();
        let dense = w.apply(&x);
        let scale = dense.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (p, q) in fast.iter().zip(&dense) {
            fft_err = fft_err.max((p - q).norm() / scale);
        }
    }
    let dft_ok = wcw <= 1e-9 && fft_err <= 1e-9;
    notes.push(format!(
        "W conj(W) = N I {wcw:.1e}; FFT vs dense DFT {fft_err:.1e}"
    ));

    // Gaussian products: commutative, and associative on exactly representable parameters.
    let mut algebra_ok = true;
    let int = |rng: &mut ChaCha8Rng| rng.random_range(-64i32..64) as f64 / 8.0;
    for _ in 0..1000 {
        let mut g = || {
            let off = int(&mut rng);
            CanonGauss2::new(
                RealVec2::new(int(&mut rng), int(&mut rng)),
                Mat2::new(int(&mut rng), off, off, int(&mut rng)),
            )
        };
        let (a, b, c) = (g(), g(), g());
        algebra_ok &= gauss_product_canon(&a, &b) == gauss_product_canon(&b, &a);
        algebra_ok &= gauss_product_canon(&gauss_product_canon(&a, &b), &c)
            == gauss_product_canon(&a, &gauss_product_canon(&b, &c));
    }
    notes.push(format!("product commutative and associative: {algebra_ok}"));

    // PSD preservation and iteration accounting on random problems.
    let mut psd = 0usize;
    let mut accounting_ok = true;
    for m in 1..=9u32 {
        let n = 1usize << m;
        let g = build_graph(n).unwrap();
        for trial in 0..4u64 {
            let pair =
                sample_trial_pair(n, &mut SeededRng::substream(SEED, (m as u64) << 8 | trial))
                    .unwrap();
            let (ts, fs) = pair.site_sets().unwrap();
            for schedule in [Schedule::Flooding, Schedule::Layered] {
                let mut state = GabpState::new(g.clone(), 1e12);
                state.set_sites(&ts, &fs).unwrap();
                let rep = state
                    .run(&GabpConfig {
                        schedule,
                        ..GabpConfig::default()
                    })
                    .unwrap();
                psd += state.psd_violations();
                let per = 2 * m as usize - 1;
                accounting_ok &= g.bp_per_layered() == per;
                if schedule == Schedule::Layered {
                    accounting_ok &= rep.bp_iterations == rep.delta_trace.len() * per;
                } else {
                    accounting_ok &= rep.bp_iterations == rep.delta_trace.len();
                }
                accounting_ok &= rep.layered_iterations == rep.bp_iterations as f64 / per as f64;
            }
        }
    }
    notes.push(format!(
        "PSD violations {psd}; accounting exact: {accounting_ok}"
    ));

    // Byte-identical reruns.
    let cfg = ExperimentConfig {
        seed: SEED,
        n_min: 4,
        n_max: 64,
        trials: 8,
        ..ExperimentConfig::gabp_analysis()
    };
    let a = gabp_analysis_table(&cfg, &run_gabp_analysis(&cfg, &quiet).unwrap()).to_csv_string();
    let b = gabp_analysis_table(&cfg, &run_gabp_analysis(&cfg, &quiet).unwrap()).to_csv_string();
    let pair_a = format!(
        "{:?}",
        sample_trial_pair(32, &mut SeededRng::substream(SEED, 3)).unwrap()
    );
    let pair_b = format!(
        "{:?}",
        sample_trial_pair(32, &mut SeededRng::substream(SEED, 3)).unwrap()
    );
    let rerun_ok = a == b && pair_a == pair_b;
    notes.push(format!("byte-identical reruns: {rerun_ok}"));

    let pass = hom_ok && dft_ok && algebra_ok && psd == 0 && accounting_ok && rerun_ok;
    report(7, pass, &notes.join("; "));
    assert!(pass);
}
