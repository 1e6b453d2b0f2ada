use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ufft::comms::trial::TrialNoise;
use ufft::ep::EpConfig;
use ufft::graph::Schedule;
use ufft::harness::{parse_snr_grid, run_experiment, ExperimentConfig, ScheduleChoice};
use ufft::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Monte-Carlo experiments for GaBP and EP on the FFT factor graph.
#[derive(Parser, Debug)]
#[command(name = "ufft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// GaBP iteration counts and belief accuracy on random problems.
    GabpAnalysis(GabpArgs),
    /// BPSK equalization over a static ISI channel: SER per SNR.
    Isi(IsiArgs),
    /// Sparse channel estimation from soft symbols: MSE per SNR.
    Radar(RadarArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Monte-Carlo trials per grid point.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative convergence tolerance of GaBP.
    #[arg(long = "tau-conv", default_value_t = ufft::graph::TAU_CONV)]
    tau_conv: f64,
    /// GaBP budget in layered iterations.
    #[arg(long = "max-layered-iters", default_value_t = 100)]
    max_layered_iters: usize,
    /// Variance standing in for "no information".
    #[arg(long = "v-large", default_value_t = ufft::graph::V_LARGE)]
    v_large: f64,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    Flooding,
    Layered,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EpScheduleArg {
    Flooding,
    Layered,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    Frequency,
    Time,
}

#[derive(Args, Debug)]
struct GabpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "n-min", default_value_t = 8)]
    n_min: usize,
    #[arg(long = "n-max", default_value_t = 4096)]
    n_max: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Both)]
    schedule: ScheduleArg,
    /// Domain in which the trial means are perturbed.
    #[arg(long = "trial-noise", value_enum, default_value_t = NoiseArg::Frequency)]
    trial_noise: NoiseArg,
    /// Largest N compared against the dense posterior.
    #[arg(long = "exact-max-n", default_value_t = 1024)]
    exact_max_n: usize,
}

#[derive(Args, Debug)]
struct EpArgs {
    /// EP rounds.
    #[arg(long = "L", default_value_t = 4)]
    rounds: usize,
    /// Damping weight of new sites.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// GaBP schedule inside EP-FFT.
    #[arg(long, value_enum, default_value_t = EpScheduleArg::Flooding)]
    schedule: EpScheduleArg,
    /// Keep GaBP messages between EP rounds.
    #[arg(long = "warm-start", default_value_t = true, action = clap::ArgAction::Set)]
    warm_start: bool,
}

#[derive(Args, Debug)]
struct IsiArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ep: EpArgs,
    /// SNR grid in dB, start:step:stop.
    #[arg(long, default_value = "0:1:14", allow_hyphen_values = true)]
    snr: String,
    /// Information symbols per block.
    #[arg(long, default_value_t = 1000)]
    block: usize,
}

#[derive(Args, Debug)]
struct RadarArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ep: EpArgs,
    /// SNR grid in dB, start:step:stop.
    #[arg(long, default_value = "-15:1:15", allow_hyphen_values = true)]
    snr: String,
    /// LLR quality; hard decisions have error rate Q(sqrt(c / 2)).
    #[arg(long, default_value_t = 3.25)]
    c: f64,
    /// Subcarriers per OFDM symbol.
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Probability of a strong channel tap.
    #[arg(long, default_value_t = 0.01)]
    sparsity: f64,
}

fn ep_config(common: &Common, ep: Option<&EpArgs>) -> EpConfig {
    let mut cfg = EpConfig {
        tau_conv: common.tau_conv,
        max_layered_iters: common.max_layered_iters,
        v_large: common.v_large,
        ..EpConfig::default()
    };
    if let Some(ep) = ep {
        cfg.iterations = ep.rounds;
        cfg.beta = ep.beta;
        cfg.warm_start = ep.warm_start;
        cfg.schedule = match ep.schedule {
            EpScheduleArg::Flooding => Schedule::Flooding,
            EpScheduleArg::Layered => Schedule::Layered,
        };
    }
    cfg
}

fn build(command: &Command) -> Result<(ExperimentConfig, &Common), Error> {
    let (cfg, common) = match command {
        Command::GabpAnalysis(a) => (
            ExperimentConfig {
                trials: a.common.trials,
                seed: a.common.seed,
                ep: ep_config(&a.common, None),
                n_min: a.n_min,
                n_max: a.n_max,
                exact_max_n: a.exact_max_n,
                schedules: match a.schedule {
                    ScheduleArg::Flooding => ScheduleChoice::Flooding,
                    ScheduleArg::Layered => ScheduleChoice::Layered,
                    ScheduleArg::Both => ScheduleChoice::Both,
                },
                trial_noise: match a.trial_noise {
                    NoiseArg::Frequency => TrialNoise::Frequency,
                    NoiseArg::Time => TrialNoise::Time,
                },
                ..ExperimentConfig::gabp_analysis()
            },
            &a.common,
        ),
        Command::Isi(a) => (
            ExperimentConfig {
                trials: a.common.trials,
                seed: a.common.seed,
                ep: ep_config(&a.common, Some(&a.ep)),
                snr_db: parse_snr_grid(&a.snr)?,
                block: a.block,
                ..ExperimentConfig::isi()
            },
            &a.common,
        ),
        Command::Radar(a) => (
            ExperimentConfig {
                trials: a.common.trials,
                seed: a.common.seed,
                ep: ep_config(&a.common, Some(&a.ep)),
                snr_db: parse_snr_grid(&a.snr)?,
                c: a.c,
                radar_n: a.n,
                sparsity: a.sparsity,
                ..ExperimentConfig::radar()
            },
            &a.common,
        ),
    };
    cfg.validate()?;
    Ok((cfg, common))
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_)
            | Error::NotPowerOfTwo(_)
            | Error::StateSpaceTooLarge { .. }
            | Error::BlockTooLarge { .. }
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, common) = match build(&cli.command) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("ufft: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if common.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
        {
            eprintln!("ufft: cannot set up {} threads: {e}", common.threads);
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let progress = |msg: &str| eprintln!("{msg}");
    let table = match run_experiment(&cfg, &progress) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("ufft: {e}");
            if let Error::Trial {
                trial,
                seed,
                stream,
                ..
            } = &e
            {
                eprintln!("ufft: failing trial {trial}: --seed {seed}, rng stream {stream}");
                return ExitCode::from(EXIT_NUMERICAL);
            }
            let code = if is_config_error(&e) {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            };
            return ExitCode::from(code);
        }
    };
    let csv = table.to_csv_string();
    let written = match &common.out {
        Some(path) => fs::write(path, csv.as_bytes()),
        None => io::stdout().lock().write_all(csv.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("ufft: cannot write output: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    ExitCode::SUCCESS
}
