//! Named experiment grids: each preset expands a base config into cells
//! that differ in exactly the dimensions under study, runs them in
//! parallel, and writes per-cell reports plus one comparison table.
//!
//! All cells of a preset share the base master seed, and because random
//! streams are keyed per client and per purpose, client i follows the same
//! trajectory in every cell; cross-cell differences come from the studied
//! dimension, not from resampled populations.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::scene::PatternKind;

use super::config::{ConfigError, DeviceMix, ServeMode, SimConfig};
use super::engine::{run_sim, SimOutput};
use super::metrics::METRICS;

/// One grid point: a name and the full config to run.
#[derive(Debug, Clone)]
pub struct ExpCell {
    pub name: String,
    pub config: SimConfig,
}

pub const PRESET_NAMES: [&str; 5] = [
    "exp1_pm_vs_static",
    "exp2_constrained",
    "exp3_cache",
    "exp4_patterns",
    "exp5_combined",
];

/// Expand a preset into its cells, derived from `base`.
pub fn preset(name: &str, base: &SimConfig) -> Result<Vec<ExpCell>, ConfigError> {
    let cell = |name: String, tweak: &dyn Fn(&mut SimConfig)| {
        let mut config = base.clone();
        tweak(&mut config);
        ExpCell { name, config }
    };
    let counts = [10u32, 20, 30, 40];
    let devices = [(DeviceMix::Type1, "type1"), (DeviceMix::Type2, "type2")];
    match name {
        // Serving discipline, all else equal: progressive levels against
        // one-shot blobs at half and full detail.
        "exp1_pm_vs_static" => Ok([
            ("progressive", ServeMode::Progressive),
            ("static_50", ServeMode::Static50),
            ("static_100", ServeMode::Static100),
        ]
        .into_iter()
        .map(|(label, mode)| {
            cell(label.to_string(), &|c| {
                c.server.mode = mode;
                c.clients.device_type = DeviceMix::Type1;
            })
        })
        .collect()),
        // Device capability clamping on and off for a weak-device crowd
        // with no cache, the configuration where clamping matters most.
        "exp2_constrained" => Ok([("constrained", true), ("unconstrained", false)]
            .into_iter()
            .map(|(label, constrained)| {
                cell(label.to_string(), &|c| {
                    c.clients.constrained = constrained;
                    c.clients.device_type = DeviceMix::Type2;
                    c.clients.cache_bytes = 0;
                })
            })
            .collect()),
        // Cache on and off.
        "exp3_cache" => Ok([("cache_2mb", 2 * 1024 * 1024u64), ("cache_0mb", 0)]
            .into_iter()
            .map(|(label, bytes)| {
                cell(label.to_string(), &|c| {
                    c.clients.cache_bytes = bytes;
                    c.clients.device_type = DeviceMix::Type2;
                })
            })
            .collect()),
        // Movement pattern x device type x population size.
        "exp4_patterns" => {
            let patterns = [
                (PatternKind::Cp, "cp"),
                (PatternKind::Ccp, "ccp"),
                (PatternKind::Rw, "rw"),
            ];
            let mut cells = Vec::new();
            for (pattern, pname) in patterns {
                for (device, dname) in devices {
                    for count in counts {
                        cells.push(cell(format!("{pname}_{dname}_c{count}"), &|c| {
                            c.scene.pattern = pattern;
                            c.clients.device_type = device;
                            c.clients.count = count;
                        }));
                    }
                }
            }
            Ok(cells)
        }
        // Population scaling per device type.
        "exp5_combined" => {
            let mut cells = Vec::new();
            for (device, dname) in devices {
                for count in counts {
                    cells.push(cell(format!("{dname}_c{count}"), &|c| {
                        c.clients.device_type = device;
                        c.clients.count = count;
                    }));
                }
            }
            Ok(cells)
        }
        _ => Err(ConfigError(format!(
            "unknown experiment {name:?}; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Run every cell (in parallel) and return outputs in cell order.
pub fn run_cells(cells: &[ExpCell]) -> Result<Vec<SimOutput>, ConfigError> {
    cells
        .par_iter()
        .map(|cell| run_sim(&cell.config))
        .collect()
}

/// Write per-cell metrics/summary files and the cross-cell comparison.
pub fn write_experiment(
    out_dir: &Path,
    cells: &[ExpCell],
    outputs: &[SimOutput],
) -> io::Result<()> {
    assert_eq!(cells.len(), outputs.len());
    fs::create_dir_all(out_dir)?;
    for (cell, output) in cells.iter().zip(outputs) {
        let dir = out_dir.join(&cell.name);
        fs::create_dir_all(&dir)?;
        let mut metrics = BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
        output.metrics.write_metrics_csv(&mut metrics)?;
        metrics.flush()?;
        let mut summary = BufWriter::new(fs::File::create(dir.join("summary.csv"))?);
        output.metrics.write_summary_csv(&mut summary)?;
        summary.flush()?;
    }
    let mut cmp = BufWriter::new(fs::File::create(out_dir.join("comparison.csv"))?);
    writeln!(cmp, "cell,metric,full_run_mean,post_warmup_mean")?;
    for (cell, output) in cells.iter().zip(outputs) {
        for metric in METRICS {
            let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                cmp,
                "{},{},{},{}",
                cell.name,
                metric.name(),
                fmt(output.metrics.full_mean(metric)),
                fmt(output.metrics.post_warmup_mean(metric))
            )?;
        }
    }
    cmp.flush()
}
