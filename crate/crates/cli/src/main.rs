use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cgst_cli::{sweeps, write_fit, write_sweep, DataSource, RunConfig, Variant};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cgst", version, about = "Filtered-noise gate set tomography benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[arg(long, global = true, value_enum)]
    variant: Option<Variant>,
    #[arg(long, global = true, value_enum)]
    data: Option<DataSource>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a design and data, fit once, report the distance to the truth.
    Fit,
    /// Distance against shots per circuit.
    SweepShots,
    /// Distance against maximum depth.
    SweepDepth,
    /// Distance against noise correlation time, per variant.
    SweepTauc,
    /// Distance against the number of circuits.
    SweepCircuits,
    /// Parametrized against general fits at equal total shots.
    CompareGeneral,
    /// Monte Carlo channels against the closed-form channels.
    McValidate,
    /// Redraw the SVG of an existing sweep CSV.
    Plot { csv: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.repeats {
        cfg.repeats = r;
    }
    if let Some(v) = cli.variant {
        cfg.design.variant = v;
    }
    if let Some(d) = cli.data {
        cfg.data = d;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.display().to_string();
    }
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out);
    let hash = cfg.hash();
    let v = cfg.design.variant;
    let sweep = match cli.cmd {
        Cmd::Fit => {
            let fit = sweeps::run_fit(&cfg, v)?;
            write_fit(&dir, &cfg, v, &fit)?;
            println!("{} distance {:.6e}", v.name(), fit.scored.distance);
            return Ok(());
        }
        Cmd::McValidate => {
            let entries = sweeps::mc_validate(&cfg)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("mc_validate.csv"), sweeps::mc_csv(&entries, &hash))?;
            let worst = entries.iter().map(|e| e.z).fold(0.0, f64::max);
            println!("max |z| {worst:.3} over {} entries", entries.len());
            return Ok(());
        }
        Cmd::Plot { csv } => return cgst_cli::replot(&csv),
        Cmd::SweepShots => sweeps::sweep_shots(&cfg, v)?,
        Cmd::SweepDepth => sweeps::sweep_depth(&cfg, v)?,
        Cmd::SweepTauc => sweeps::sweep_tauc(&cfg)?,
        Cmd::SweepCircuits => sweeps::sweep_circuits(&cfg, v)?,
        Cmd::CompareGeneral => sweeps::compare_general(&cfg, v)?,
    };
    write_sweep(&dir, &sweep, &hash)?;
    for s in &sweep.slopes {
        if let Some(sl) = s.slope {
            println!("{}: slope {:.3} over {} points", s.series, sl.slope, sl.n_points);
        }
    }
    for (name, k) in &sweep.drops {
        println!("{name}: largest drop at {k} circuits");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
