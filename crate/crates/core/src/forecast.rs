//! Day-ahead count forecasting on region graphs.
//!
//! Regions are nodes. A region is active on day `d` when its daily growth
//! `(C_d - C_{d-1}) / C_{d-1}` exceeds a threshold. For a cutoff day `t` and
//! horizon `h`, a classifier is trained on snapshots `d <= t - h` (labels are
//! activation on `d + h <= t`), predicts activation on `t + h`, and the
//! probability is turned into a count by growth extrapolation.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::learner::{predict, train, TrainConfig};
use crate::metrics::apme;
use crate::propagation::PropagationConfig;
use crate::rng::derive_seed;
use crate::sampler::{build_instance, instance_feature_names, sample_ego, ClassBalance, EgoInstance, InstanceSet, Provenance, Split};

pub const DATE_FORMAT: &str = "%Y-%m-%d";
/// Shortest training window, in days, for a cutoff.
pub const MIN_WINDOW: usize = 7;
pub const MAX_HORIZON: usize = 6;

/// Cumulative case counts per region and day.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    dates: Vec<String>,
    /// `cases[d][r]`.
    cases: Vec<Vec<f64>>,
    graph: Graph,
}

#[derive(Debug, Deserialize, Serialize)]
struct SeriesRecord {
    date: String,
    region_id: String,
    cumulative_cases: f64,
}

impl RegionSeries {
    /// Validates dates, counts and monotonicity. Without `edges` the regions
    /// form a complete graph.
    pub fn new(
        dates: Vec<String>,
        regions: Vec<String>,
        cases: Vec<Vec<f64>>,
        edges: Option<&[(usize, usize)]>,
    ) -> Result<Self> {
        let r = regions.len();
        if r == 0 || dates.is_empty() {
            return Err(Error::InvalidParameter("region series is empty".into()));
        }
        let mut prev: Option<NaiveDate> = None;
        for d in &dates {
            let parsed = NaiveDate::parse_from_str(d, DATE_FORMAT)
                .map_err(|e| Error::InvalidParameter(format!("bad date {d:?}: {e}")))?;
            if prev.is_some_and(|p| parsed <= p) {
                return Err(Error::InvalidParameter(format!("dates are not strictly increasing at {d}")));
            }
            prev = Some(parsed);
        }
        if cases.len() != dates.len() || cases.iter().any(|row| row.len() != r) {
            return Err(Error::Dimension(format!(
                "case table must be {} days x {} regions",
                dates.len(),
                r
            )));
        }
        for (d, row) in cases.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "region {:?} has invalid count {c} on {}",
                        regions[k], dates[d]
                    )));
                }
                if d > 0 && c < cases[d - 1][k] {
                    return Err(Error::InvalidParameter(format!(
                        "cumulative cases of region {:?} decrease on {}",
                        regions[k], dates[d]
                    )));
                }
            }
        }
        let complete: Vec<(usize, usize)>;
        let edges = match edges {
            Some(e) => e,
            None => {
                complete = (0..r).flat_map(|u| (u + 1..r).map(move |v| (u, v))).collect();
                &complete
            }
        };
        let graph = Graph::with_ids(regions, edges)?;
        Ok(RegionSeries { dates, cases, graph })
    }

    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn regions(&self) -> usize {
        self.graph.node_count()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn region_ids(&self) -> &[String] {
        self.graph.ids()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn cases(&self, day: usize) -> &[f64] {
        &self.cases[day]
    }

    /// Daily relative growth; zero on the first day or from a zero count.
    pub fn growth(&self, day: usize, region: usize) -> f64 {
        if day == 0 {
            return 0.0;
        }
        let before = self.cases[day - 1][region];
        if before > 0.0 {
            (self.cases[day][region] - before) / before
        } else {
            0.0
        }
    }

    pub fn activation(&self, day: usize, threshold: f64) -> Vec<bool> {
        (0..self.regions()).map(|r| self.growth(day, r) > threshold).collect()
    }

    /// Copy with days after `day` removed.
    pub fn truncated(&self, day: usize) -> RegionSeries {
        RegionSeries {
            dates: self.dates[..=day].to_vec(),
            cases: self.cases[..=day].to_vec(),
            graph: self.graph.clone(),
        }
    }

    /// Reads `date,region_id,cumulative_cases` rows (header required) and an
    /// optional tab-separated region edge list.
    pub fn load(series_path: &Path, edges_path: Option<&Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(series_path).map_err(|e| csv_error(series_path, e))?;
        let mut dates: Vec<String> = Vec::new();
        let mut date_index: HashMap<String, usize> = HashMap::new();
        let mut regions: Vec<String> = Vec::new();
        let mut region_index: HashMap<String, usize> = HashMap::new();
        let mut rows: Vec<(usize, usize, f64, usize)> = Vec::new();
        for (k, rec) in reader.deserialize::<SeriesRecord>().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Parse {
                path: series_path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            let d = *date_index.entry(rec.date.clone()).or_insert_with(|| {
                dates.push(rec.date.clone());
                dates.len() - 1
            });
            let r = *region_index.entry(rec.region_id.clone()).or_insert_with(|| {
                regions.push(rec.region_id.clone());
                regions.len() - 1
            });
            rows.push((d, r, rec.cumulative_cases, line));
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput(series_path.to_path_buf()));
        }
        let mut sorted_dates = dates.clone();
        sorted_dates.sort();
        let mut sorted_regions = regions.clone();
        sorted_regions.sort();
        let day_of: HashMap<&str, usize> = sorted_dates.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let reg_of: HashMap<&str, usize> = sorted_regions.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let mut cases = vec![vec![f64::NAN; sorted_regions.len()]; sorted_dates.len()];
        for (d, r, c, line) in rows {
            let (dd, rr) = (day_of[dates[d].as_str()], reg_of[regions[r].as_str()]);
            if !cases[dd][rr].is_nan() {
                return Err(Error::Parse {
                    path: series_path.to_path_buf(),
                    line,
                    message: format!("duplicate row for {} on {}", regions[r], dates[d]),
                });
            }
            cases[dd][rr] = c;
        }
        for (d, row) in cases.iter().enumerate() {
            if let Some(r) = row.iter().position(|c| c.is_nan()) {
                return Err(Error::InvalidParameter(format!(
                    "{}: no count for region {:?} on {}",
                    series_path.display(),
                    sorted_regions[r],
                    sorted_dates[d]
                )));
            }
        }
        let edges = match edges_path {
            None => None,
            Some(p) => {
                let g = crate::graph::load_edge_list(p, false)?;
                let mut out = Vec::new();
                for (u, v) in g.edges() {
                    let map = |id: &str| reg_of.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()));
                    out.push((map(g.id(u))?, map(g.id(v))?));
                }
                Some(out)
            }
        };
        RegionSeries::new(sorted_dates, sorted_regions, cases, edges.as_deref())
    }

    /// Writes the series CSV (dates outer, regions inner) and, when given, the
    /// region edge list.
    pub fn write(&self, series_path: &Path, edges_path: Option<&Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(series_path).map_err(|e| csv_error(series_path, e))?;
        for (d, date) in self.dates.iter().enumerate() {
            for (r, id) in self.region_ids().iter().enumerate() {
                w.serialize(SeriesRecord {
                    date: date.clone(),
                    region_id: id.clone(),
                    cumulative_cases: self.cases[d][r],
                })
                .map_err(|e| csv_error(series_path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(series_path, e))?;
        if let Some(p) = edges_path {
            crate::graph::write_edge_list(&self.graph, p)?;
        }
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn dates_from(start: &str, days: usize) -> Vec<String> {
    let start = NaiveDate::parse_from_str(start, DATE_FORMAT).expect("valid start date");
    (0..days)
        .map(|d| (start + chrono::Days::new(d as u64)).format(DATE_FORMAT).to_string())
        .collect()
}

fn ring_edges(r: usize) -> Vec<(usize, usize)> {
    if r < 2 {
        return Vec::new();
    }
    (0..r).map(|u| (u, (u + 1) % r)).collect()
}

/// Every region grows by exactly `rate` per day from `start` cases.
pub fn geometric_series(regions: usize, days: usize, start: f64, rate: f64) -> Result<RegionSeries> {
    let ids = (0..regions).map(|r| format!("R{r:02}")).collect();
    let cases = (0..days).map(|d| vec![start * (1.0 + rate).powi(d as i32); regions]).collect();
    RegionSeries::new(dates_from("2020-01-21", days), ids, cases, Some(&ring_edges(regions)))
}

/// Discrete SIR epidemics on a ring of regions with neighbor coupling and
/// log-normal reporting noise on daily new cases.
pub fn noisy_sir_series(regions: usize, days: usize, noise: f64, seed: u64) -> Result<RegionSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = ring_edges(regions);
    let pop: Vec<f64> = (0..regions).map(|_| rng.gen_range(5e4..2e5)).collect();
    let beta: Vec<f64> = (0..regions).map(|_| rng.gen_range(0.3..0.45)).collect();
    let gamma = 0.1;
    let coupling = 0.02;
    let mut infected: Vec<f64> = (0..regions).map(|_| rng.gen_range(20.0f64..80.0).round()).collect();
    let mut susceptible: Vec<f64> = pop.iter().zip(&infected).map(|(n, i)| n - i).collect();
    let mut cumulative = infected.clone();
    let mut cases = Vec::with_capacity(days);
    for _ in 0..days {
        cases.push(cumulative.clone());
        let pressure: Vec<f64> = (0..regions)
            .map(|r| {
                let mut p = infected[r] / pop[r];
                for &(u, v) in &edges {
                    let other = if u == r { v } else if v == r { u } else { continue };
                    p += coupling * infected[other] / pop[other];
                }
                p
            })
            .collect();
        for r in 0..regions {
            let new = (beta[r] * susceptible[r] * pressure[r]).min(susceptible[r]);
            let z: f64 = rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0);
            let reported = (new * (noise * z).exp()).max(0.0);
            susceptible[r] -= new;
            infected[r] += new - gamma * infected[r];
            cumulative[r] += reported.round();
        }
    }
    let ids = (0..regions).map(|r| format!("R{r:02}")).collect();
    RegionSeries::new(dates_from("2020-01-21", days), ids, cases, Some(&edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// Mixes class-conditional mean growth by the predicted activation probability.
    #[default]
    Classifier,
    /// Extrapolates each region's last observed daily growth; exact on
    /// geometric series.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Daily growth above which a region counts as active.
    pub threshold: f64,
    pub growth_model: GrowthModel,
    /// Half-life in days of the weights on past growth in classifier mode.
    pub growth_half_life: f64,
    pub sample_size: usize,
    pub restart_prob: f64,
    pub propagation: PropagationConfig,
    pub train: TrainConfig,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            threshold: 0.025,
            growth_model: GrowthModel::Classifier,
            growth_half_life: 1.0,
            sample_size: 50,
            restart_prob: 0.15,
            propagation: PropagationConfig { alpha: 0.8, ..Default::default() },
            train: TrainConfig {
                epochs: 30,
                batch_size: 32,
                hidden: 16,
                dropout: 0.0,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub cutoff: String,
    pub target: String,
    /// Days of data available at the cutoff.
    pub window: usize,
    pub horizon: usize,
    pub regions_scored: usize,
    pub apme: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub growth_model: GrowthModel,
    pub rows: Vec<ForecastRow>,
    /// Mean APME per horizon (index 0 = one day ahead).
    pub mean_apme: Vec<f64>,
}

const FEATURE_NAMES: [&str; 3] = ["growth", "growth_prev", "log_cases"];

fn raw_features(series: &RegionSeries, day: usize) -> DMatrix<f64> {
    DMatrix::from_fn(series.regions(), FEATURE_NAMES.len(), |r, c| match c {
        0 => series.growth(day, r),
        1 => {
            if day > 0 {
                series.growth(day - 1, r)
            } else {
                0.0
            }
        }
        _ => series.cases(day)[r].ln_1p(),
    })
}

/// Column means and population deviations over the stacked `mats`.
fn fit_scaler(mats: &[DMatrix<f64>]) -> (Vec<f64>, Vec<f64>) {
    let c = FEATURE_NAMES.len();
    let n: usize = mats.iter().map(|m| m.nrows()).sum();
    let mut mean = vec![0.0; c];
    let mut std = vec![0.0; c];
    for k in 0..c {
        mean[k] = mats.iter().map(|m| m.column(k).sum()).sum::<f64>() / n as f64;
        let var = mats
            .iter()
            .map(|m| m.column(k).iter().map(|v| (v - mean[k]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        std[k] = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
    }
    (mean, std)
}

fn snapshot_instances(
    series: &RegionSeries,
    day: usize,
    labels: Option<&[bool]>,
    scaler: &(Vec<f64>, Vec<f64>),
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<Vec<EgoInstance>> {
    let mut raw = raw_features(series, day);
    for r in 0..raw.nrows() {
        for c in 0..raw.ncols() {
            raw[(r, c)] = (raw[(r, c)] - scaler.0[c]) / scaler.1[c];
        }
    }
    let feat = FeatureMatrix::new(raw, FEATURE_NAMES.iter().map(|s| s.to_string()).collect())?;
    let g = series.graph().with_activation(series.activation(day, cfg.threshold))?;
    let m = cfg.sample_size.min(series.regions()).max(1);
    (0..series.regions())
        .map(|r| {
            let sampled = sample_ego(&g, r, m, cfg.restart_prob, derive_seed(seed, day as u64))?;
            build_instance(&g, &sampled.nodes, r, labels.is_some_and(|l| l[r]), &feat)
        })
        .collect()
}

/// Predicted counts on day `t + h` from data up to day `t` only.
pub fn forecast_cutoff(
    series: &RegionSeries,
    t: usize,
    h: usize,
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if t >= series.days() || h == 0 {
        return Err(Error::InvalidParameter(format!("cutoff {t} / horizon {h} out of range")));
    }
    let series = series.truncated(t);
    let current = series.cases(t).to_vec();
    let growth: Vec<f64> = match cfg.growth_model {
        GrowthModel::Oracle => (0..series.regions()).map(|r| series.growth(t, r)).collect(),
        GrowthModel::Classifier => {
            let probs = classify(&series, t, h, cfg, seed)?;
            let levels = class_growth(&series, t, h, cfg);
            probs.iter().zip(&levels).map(|(p, (ga, gi))| p * ga + (1.0 - p) * gi).collect()
        }
    };
    Ok(current
        .iter()
        .zip(&growth)
        .map(|(c, g)| c * (1.0 + g).powi(h as i32))
        .collect())
}

/// Per region, recency-weighted mean growth over its active and inactive
/// targets `d + h <= t`. A region without samples of a class falls back to
/// that class's pooled mean, then to the pooled mean of everything.
fn class_growth(series: &RegionSeries, t: usize, h: usize, cfg: &ForecastConfig) -> Vec<(f64, f64)> {
    let regions = series.regions();
    let mut sums = vec![[(0.0, 0.0); 2]; regions];
    for target in h..=t {
        let w = 0.5f64.powf((t - target) as f64 / cfg.growth_half_life);
        for (r, acc) in sums.iter_mut().enumerate() {
            let g = series.growth(target, r);
            let class = usize::from(g > cfg.threshold);
            acc[class].0 += w * g;
            acc[class].1 += w;
        }
    }
    let total = |class: usize| sums.iter().fold((0.0, 0.0), |a, s| (a.0 + s[class].0, a.1 + s[class].1));
    let (t0, t1) = (total(0), total(1));
    let ratio = |(s, w): (f64, f64), fallback: f64| if w > 0.0 { s / w } else { fallback };
    let pooled = ratio((t0.0 + t1.0, t0.1 + t1.1), 0.0);
    let (pool_act, pool_inact) = (ratio(t1, pooled), ratio(t0, pooled));
    sums.iter().map(|s| (ratio(s[1], pool_act), ratio(s[0], pool_inact))).collect()
}

/// Probability that each region is active on `t + h`.
fn classify(series: &RegionSeries, t: usize, h: usize, cfg: &ForecastConfig, seed: u64) -> Result<Vec<f64>> {
    let train_days: Vec<usize> = if t >= h { (0..=t - h).collect() } else { Vec::new() };
    if train_days.is_empty() {
        return Ok(vec![0.5; series.regions()]);
    }
    let mut mats: Vec<DMatrix<f64>> = train_days.iter().map(|&d| raw_features(series, d)).collect();
    mats.push(raw_features(series, t));
    let scaler = fit_scaler(&mats);
    let mut instances = Vec::new();
    for &d in &train_days {
        let labels = series.activation(d + h, cfg.threshold);
        instances.extend(snapshot_instances(series, d, Some(&labels), &scaler, cfg, seed)?);
    }
    let feature_names = instance_feature_names(&FEATURE_NAMES.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let positives = instances.iter().filter(|i| i.label).count();
    let data = InstanceSet {
        splits: vec![Split::Train; instances.len()],
        provenance: Provenance {
            graph_hash: series.graph().fingerprint(),
            seed,
            sample_size: cfg.sample_size,
            restart_prob: cfg.restart_prob,
            balanced: false,
            feature_names,
            class_balance: vec![(
                Split::Train,
                ClassBalance {
                    positives,
                    negatives: instances.len() - positives,
                },
            )],
        },
        instances,
    };
    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let (params, _) = train(&data, &tcfg, &cfg.propagation)?;
    let query = snapshot_instances(series, t, None, &scaler, cfg, seed)?;
    let refs: Vec<&EgoInstance> = query.iter().collect();
    predict(&params, &refs, &cfg.propagation)
}

/// Rolling-origin evaluation for horizons `1..=max_horizon` over every
/// cutoff with at least [`MIN_WINDOW`] days of history.
pub fn run_forecast(series: &RegionSeries, max_horizon: usize, cfg: &ForecastConfig, seed: u64) -> Result<ForecastReport> {
    if !(cfg.growth_half_life > 0.0) {
        return Err(Error::InvalidParameter("growth_half_life must be > 0".into()));
    }
    if !(1..=MAX_HORIZON).contains(&max_horizon) {
        return Err(Error::InvalidParameter(format!("horizon {max_horizon} not in 1..={MAX_HORIZON}")));
    }
    if series.days() < MIN_WINDOW + max_horizon {
        return Err(Error::InvalidParameter(format!(
            "series has {} days, needs at least {} for horizon {max_horizon}",
            series.days(),
            MIN_WINDOW + max_horizon
        )));
    }
    let mut rows = Vec::new();
    for h in 1..=max_horizon {
        for t in MIN_WINDOW - 1..series.days() - h {
            let cell_seed = derive_seed(derive_seed(seed, t as u64), h as u64);
            let predicted = forecast_cutoff(series, t, h, cfg, cell_seed)?;
            let actual = series.cases(t + h);
            let (p, a): (Vec<f64>, Vec<f64>) = predicted
                .iter()
                .zip(actual)
                .filter(|(_, &a)| a > 0.0)
                .map(|(&p, &a)| (p, a))
                .unzip();
            if a.is_empty() {
                continue;
            }
            rows.push(ForecastRow {
                cutoff: series.dates()[t].clone(),
                target: series.dates()[t + h].clone(),
                window: t + 1,
                horizon: h,
                regions_scored: a.len(),
                apme: apme(&p, &a)?,
            });
        }
    }
    let mean_apme = (1..=max_horizon)
        .map(|h| {
            let v: Vec<f64> = rows.iter().filter(|r| r.horizon == h).map(|r| r.apme).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect();
    Ok(ForecastReport {
        growth_model: cfg.growth_model,
        rows,
        mean_apme,
    })
}
