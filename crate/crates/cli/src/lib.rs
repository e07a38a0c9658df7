//! Command-line front end for filtered-noise gate set tomography: run
//! configuration, sweep orchestration and CSV/SVG/JSON artifacts.

pub mod config;
pub mod experiment;
pub mod output;
pub mod sweeps;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub use config::{DataSource, RunConfig, Variant};
pub use output::{fit_slope, parse_csv, svg_from_csv, to_csv, Row, Slope};
pub use sweeps::{SweepOutput, point_seed};

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write `<name>.csv`, `<name>.svg` (drawn from the CSV) and `<name>.json`.
pub fn write_sweep(dir: &Path, out: &SweepOutput, hash: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = to_csv(&out.var, &out.rows, hash);
    write(&dir.join(format!("{}.csv", out.name)), &csv)?;
    write(&dir.join(format!("{}.svg", out.name)), &svg_from_csv(&csv)?)?;
    write(&dir.join(format!("{}.json", out.name)), &serde_json::to_string_pretty(out)?)?;
    Ok(())
}

/// Redraw the SVG next to an existing sweep CSV.
pub fn replot(csv_path: &Path) -> Result<()> {
    let text = fs::read_to_string(csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    write(&csv_path.with_extension("svg"), &svg_from_csv(&text)?)
}

/// Write the single-fit artifacts: `fit.csv`, `fit.json`, `data.txt` and the config used.
pub fn write_fit(dir: &Path, cfg: &RunConfig, variant: Variant, fit: &sweeps::FitOutput) -> Result<()> {
    use cgst_core::design::{write_text, DataHeader};
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let hash = cfg.hash();
    write(&dir.join("fit.csv"), &to_csv("p_max", std::slice::from_ref(&fit.row), &hash))?;
    let summary = serde_json::json!({
        "variant": variant.name(),
        "distance": fit.scored.distance,
        "gauge_cost": fit.scored.gauge_cost,
        "fit": fit.scored.fit,
        "truth": fit.truth,
        "seed": fit.row.seed,
        "config_hash": hash,
    });
    write(&dir.join("fit.json"), &serde_json::to_string_pretty(&summary)?)?;
    let header = DataHeader {
        variant: variant.name().into(),
        omega_rabi: fit.truth.omega_rabi,
        t_pi: fit.truth.t_pi,
        t_half: fit.truth.t_half,
        seed: fit.row.seed,
        depth_schedule: fit.design.depth_schedule.clone(),
    };
    write(&dir.join("data.txt"), &write_text(&header, &fit.design, Some(&fit.data)))?;
    write(&dir.join("config.toml"), &cfg.to_toml())?;
    Ok(())
}
