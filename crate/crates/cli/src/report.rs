//! Summary of a finished simulation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Record {
    t: f64,
    #[serde(rename = "J")]
    dual: f64,
    #[serde(rename = "K")]
    primal: Option<f64>,
    m2: f64,
    gap: Option<f64>,
    mass: f64,
    support_radius: f64,
    w1_step: f64,
    boundary_residual: f64,
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reads `diagnostics.json` in `dir`, prints a summary and writes `summary.txt`
/// and the plot-ready `series.csv`.
pub fn summarize(dir: &Path) -> anyhow::Result<()> {
    let path = dir.join("diagnostics.json");
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let records: Vec<Record> = serde_json::from_reader(file).with_context(|| format!("parsing {}", path.display()))?;
    anyhow::ensure!(!records.is_empty(), "{} holds no steps", path.display());

    let mut series = File::create(dir.join("series.csv"))?;
    writeln!(series, "t,J,K,m2,gap,mass,support_radius,w1_step,boundary_residual")?;
    for r in &records {
        writeln!(
            series,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.dual,
            fmt(r.primal),
            r.m2,
            fmt(r.gap),
            r.mass,
            r.support_radius,
            r.w1_step,
            r.boundary_residual
        )?;
    }

    let last = records.last().expect("non-empty");
    let max_gap = records.iter().filter_map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    let max_w1 = records.iter().map(|r| r.w1_step).fold(0.0, f64::max);
    let max_res = records.iter().map(|r| r.boundary_residual).fold(0.0, f64::max);
    let mass_drift = records.iter().map(|r| (r.mass - 1.0).abs()).fold(0.0, f64::max);
    let text = format!(
        "steps            {}\n\
         final time       {}\n\
         support radius   {} -> {}\n\
         max duality gap  {:.3e}\n\
         max W1 per step  {:.6}\n\
         max |mass - 1|   {:.3e}\n\
         max boundary res {:.3e}\n",
        records.len(),
        last.t,
        records[0].support_radius,
        last.support_radius,
        max_gap,
        max_w1,
        mass_drift,
        max_res
    );
    print!("{text}");
    std::fs::write(dir.join("summary.txt"), text)?;
    Ok(())
}
