//! Band-structure table over the Brillouin zone.

use std::path::Path;

use rayon::prelude::*;
use wavepacket_core::bands::BandOracle;

use crate::config::ExperimentConfig;
use crate::geometry::{zone_grid, zone_samples};
use crate::output::{emit_report, num, OutputDir};
use crate::Result;

pub const BANDS_TABLE: &str = "bands.csv";

pub fn band_header(dim: usize, bands: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=dim).map(|k| format!("p{k}")).collect();
    h.extend((1..=bands).map(|n| format!("E_{n}")));
    h.push("gap".into());
    h.extend((1..=dim).map(|k| format!("A{k}")));
    for i in 0..dim {
        for j in i + 1..dim {
            h.push(format!("F{}{}", i + 1, j + 1));
        }
    }
    h
}

/// One row per zone sample; connection and curvature cells stay empty where the tracked band
/// cannot be evaluated in the configured gauge.
pub fn band_rows(config: &ExperimentConfig) -> Result<Vec<Vec<String>>> {
    let model = config.band_model()?;
    let d = config.dim;
    let bands = config.band + 1;
    let points = zone_grid(&model, zone_samples(d));
    let pairs = d * (d - 1) / 2;
    points
        .par_iter()
        .map(|p| {
            let mut row: Vec<String> = p.iter().map(|&x| num(x)).collect();
            let slice = model.slice(p)?;
            row.extend(slice.all_energies().iter().take(bands).map(|&e| num(e)));
            row.push(num(slice.gap()));
            match model.first_order(p) {
                Ok(pt) => {
                    row.extend(pt.connection.iter().map(|&a| num(a)));
                    row.extend(pt.curvature.upper().iter().map(|&f| num(f)));
                }
                Err(_) => row.extend(std::iter::repeat_n(String::new(), d + pairs)),
            }
            Ok(row)
        })
        .collect()
}

/// Writes `bands.csv` and a manifest into `dir`.
pub fn dump_bands(config: &ExperimentConfig, dir: &Path, command: &str) -> Result<()> {
    let mut out = OutputDir::create(dir)?;
    let rows = band_rows(config)?;
    out.csv(BANDS_TABLE, &band_header(config.dim, config.band + 1), &rows)?;
    let report = serde_json::json!({ "samples": rows.len(), "bands": config.band + 1 });
    emit_report(out, config, command, report, Vec::new())?;
    Ok(())
}
