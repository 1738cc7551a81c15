use std::time::Instant;

use ppinf_core::forecast::{run_forecast, ForecastReport, RegionSeries};
use serde::Serialize;

use super::required;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, write_json, Meta, CONFIG_FILE};

pub const FORECAST_CSV: &str = "forecast.csv";
pub const SUMMARY_CSV: &str = "forecast_summary.csv";
pub const FORECAST_JSON: &str = "forecast.json";

/// Label carried by every forecast output: the region-to-graph mapping is
/// this tool's own construction.
pub const MAPPING: &str = "regions-as-nodes/growth-threshold-activation";

#[derive(Serialize)]
struct Document<'a> {
    mapping: &'static str,
    threshold: f64,
    max_horizon: usize,
    report: &'a ForecastReport,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let started = Instant::now();
    let series_path = required(&cfg.data.series, "data.series")?;
    if !series_path.is_file() {
        return Err(CliError::bad_input(format!("series file not found: {}", series_path.display())));
    }
    let series = RegionSeries::load(series_path, cfg.data.series_edges.as_deref())?;
    let h = cfg.forecast.horizon;
    let report = run_forecast(&series, h, &cfg.forecast.model, cfg.seed)?;

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.cutoff.clone(),
                r.target.clone(),
                r.window.to_string(),
                r.horizon.to_string(),
                r.regions_scored.to_string(),
                r.apme.to_string(),
                MAPPING.to_string(),
            ]
        })
        .collect();
    let out = &cfg.out_dir;
    write_csv(
        &out.join(FORECAST_CSV),
        &["cutoff", "target", "window", "horizon", "regions_scored", "apme", "mapping"],
        &rows,
    )?;
    let summary: Vec<Vec<String>> = report
        .mean_apme
        .iter()
        .enumerate()
        .map(|(i, m)| vec![(i + 1).to_string(), m.to_string(), MAPPING.to_string()])
        .collect();
    write_csv(&out.join(SUMMARY_CSV), &["horizon", "mean_apme", "mapping"], &summary)?;
    write_json(
        &out.join(FORECAST_JSON),
        &Document {
            mapping: MAPPING,
            threshold: cfg.forecast.model.threshold,
            max_horizon: h,
            report: &report,
        },
    )?;
    write_json(&out.join(CONFIG_FILE), cfg)?;
    Meta::new("forecast", started.elapsed().as_secs_f64()).write(out)?;
    let means: Vec<String> = report.mean_apme.iter().map(|m| format!("{m:.4}")).collect();
    println!(
        "{} cutoffs scored, mean APME by horizon [{}] -> {}",
        report.rows.len(),
        means.join(", "),
        out.join(FORECAST_CSV).display()
    );
    Ok(())
}
