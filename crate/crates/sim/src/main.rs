use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumis_core::model::{modulate, sample_rayleigh};
use sumis_core::opcount::{measured_count, table_formula, Method as OpMethod};
use sumis_core::{make_constellation, Detector, DetectorKind, RealChannel, SumisConfig};
use sumis_sim::link::Link;
use sumis_sim::sweep::{run_sweep, sidecar_json, write_csv};
use sumis_sim::validate::quick_checks;
use sumis_sim::{SimConfig, SimError, SimResult};

#[derive(Parser)]
#[command(name = "sumis-sim", version, about = "Coded MIMO link simulation with soft detectors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the Eb/N0 sweep described by a TOML config.
    Sweep {
        config: PathBuf,
        /// CSV output; metadata goes next to it with a .json extension.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Override the configured worker count.
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Run the oracle and property checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print closed-form operation counts next to instrumented ones.
    Opcount {
        /// Real transmit (= receive) dimensions.
        #[arg(long, default_value_t = 12)]
        n_t: usize,
        #[arg(long, default_value_t = 3)]
        ns: usize,
        /// PAM order per real dimension.
        #[arg(long, default_value_t = 2)]
        m: usize,
    },
}

fn sweep(config: PathBuf, out: Option<PathBuf>, workers: Option<usize>) -> SimResult<()> {
    let mut cfg = SimConfig::load(&config)?;
    if let Some(w) = workers {
        cfg.sweep.workers = w;
    }
    let link = Link::new(&cfg)?;
    let result = run_sweep(&cfg)?;
    let io = |e: io::Error| SimError::Runtime(e.to_string());
    match out {
        Some(path) => {
            write_csv(BufWriter::new(File::create(&path).map_err(io)?), &cfg, &result)?;
            std::fs::write(path.with_extension("json"), sidecar_json(&link, &result)?).map_err(io)?;
        }
        None => write_csv(io::stdout().lock(), &cfg, &result)?,
    }
    Ok(())
}

fn validate(seed: u64) -> SimResult<bool> {
    let checks = quick_checks(seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn opcount(n_t: usize, ns: usize, m: usize) -> SimResult<()> {
    let c = make_constellation(m)?;
    if n_t % 2 != 0 {
        return Err(SimError::Config("n_t must be even (real dimensions of a complex system)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = sample_rayleigh(n_t / 2, n_t / 2, &mut rng).to_real();
    let ch = RealChannel::new(h, 0.5)?;
    let bits: Vec<u8> = (0..n_t * c.bits_per_symbol()).map(|_| rng.random_range(0..2)).collect();
    let y = ch.transmit(&modulate(&bits, &c, n_t)?, &mut rng);
    let enumerable = n_t * c.bits_per_symbol() <= 16;
    let rows: Vec<(OpMethod, usize, Option<DetectorKind>)> = vec![
        (OpMethod::Sumis, ns, Some(DetectorKind::Sumis(SumisConfig::new(ns)))),
        (OpMethod::Pm, ns, Some(DetectorKind::Pm { ns })),
        (OpMethod::SoftMmse, 1, Some(DetectorKind::SoftMmse)),
        (OpMethod::MaxLog, n_t, enumerable.then_some(DetectorKind::MaxLog)),
        (OpMethod::ExactLlr, n_t, enumerable.then_some(DetectorKind::ExactLlr)),
    ];
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "N_R = N_T = {n_t}, ns = {ns}, M = {m}");
    let _ = writeln!(out, "{:<10} {:>14} {:>14} {:>14} {:>14}", "method", "formula_indep", "formula_dep", "measured_indep", "measured_dep");
    for (method, s, kind) in rows {
        let f = table_formula(method, n_t, n_t, s, m)?;
        let (mi, md) = match kind {
            Some(k) => {
                let (oc, _) = measured_count(&Detector::new(k, c.clone()), &ch, &y)?;
                (oc.y_independent.to_string(), oc.y_dependent.to_string())
            }
            None => ("-".into(), "-".into()),
        };
        let _ = writeln!(out, "{:<10} {:>14} {:>14} {:>14} {:>14}", method.name(), f.y_independent, f.y_dependent, mi, md);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Sweep { config, out, workers } => sweep(config, out, workers).map(|_| true),
        Cmd::Validate { seed } => validate(seed),
        Cmd::Opcount { n_t, ns, m } => opcount(n_t, ns, m).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
