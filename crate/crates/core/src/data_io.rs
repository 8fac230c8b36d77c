//! Instance files, synthetic generation and region sampling.
//!
//! An instance on disk is three files:
//!
//! * `cells.csv`: header `x,y,traffic,weak`, one row per populated cell
//!   (`int,int,decimal,0|1`);
//! * `stations.csv`: header `x,y`, one row per existing station;
//! * `params.json`: grid size, radio parameters (`d_h,d_d,C_h,C_d,D_min,theta_cp`)
//!   and, for generated instances, the generator settings. Unknown keys are rejected.
//!
//! Deployments use `x,y,kind` with `kind` in `{macro, micro}`. Decimals are
//! written in shortest round-trip form, so `load(save(x)) == x` exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Deployment, GridCell, ModelError, PlacedStation, ProblemInstance, RadioParams, Site, StationKind,
};

pub const CELLS_FILE: &str = "cells.csv";
pub const STATIONS_FILE: &str = "stations.csv";
pub const PARAMS_FILE: &str = "params.json";

const CELLS_HEADER: &str = "x,y,traffic,weak";
const STATIONS_HEADER: &str = "x,y";
const DEPLOYMENT_HEADER: &str = "x,y,kind";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {reason}")]
    Parse { path: PathBuf, line: u64, column: usize, reason: String },
    #[error("{path}:{line}: duplicate coordinate {site}")]
    Duplicate { path: PathBuf, line: u64, site: Site },
    #[error("{path}:{line}: coordinate {site} outside the {width}x{height} grid")]
    OutOfRange { path: PathBuf, line: u64, site: Site, width: i64, height: i64 },
    #[error("{path}: {reason}")]
    Json { path: PathBuf, reason: String },
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("invalid region request: {0}")]
    Region(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Grid size and radio parameters; the non-generator part of `params.json`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceMeta {
    pub width: i64,
    pub height: i64,
    pub params: RadioParams,
}

impl InstanceMeta {
    pub fn of(instance: &ProblemInstance) -> Self {
        InstanceMeta { width: instance.width(), height: instance.height(), params: *instance.params() }
    }
}

/// Synthetic-instance settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub width: i64,
    pub height: i64,
    pub hotspots: usize,
    pub peak_min: f64,
    pub peak_max: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub existing_stations: usize,
    pub seed: u64,
    pub params: RadioParams,
}

impl GeneratorConfig {
    /// Defaults scaled to the grid area: one hotspot per 2,500 cells and one
    /// existing station per 20,000 cells (at least one of each).
    pub fn for_area(width: i64, height: i64, seed: u64) -> Self {
        let area = (width.max(0) * height.max(0)) as usize;
        GeneratorConfig {
            width,
            height,
            hotspots: (area / 2500).max(1),
            peak_min: 1.0,
            peak_max: 10.0,
            radius_min: 4.0,
            radius_max: 14.0,
            existing_stations: (area / 20_000).max(1),
            seed,
            params: RadioParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Generation(m));
        if self.width <= 0 || self.height <= 0 {
            return bad(format!("grid must be positive, got {}x{}", self.width, self.height));
        }
        if !(self.peak_min > 0.0 && self.peak_min <= self.peak_max && self.peak_max.is_finite()) {
            return bad(format!("need 0 < peak_min <= peak_max, got {}..{}", self.peak_min, self.peak_max));
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max && self.radius_max.is_finite()) {
            return bad(format!(
                "need 0 < radius_min <= radius_max, got {}..{}",
                self.radius_min, self.radius_max
            ));
        }
        self.params.validate()?;
        Ok(())
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::for_area(100, 100, 0)
    }
}

/// On-disk form of `params.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDocument {
    pub width: i64,
    pub height: i64,
    pub d_h: f64,
    pub d_d: f64,
    #[serde(rename = "C_h")]
    pub c_h: f64,
    #[serde(rename = "C_d")]
    pub c_d: f64,
    #[serde(rename = "D_min")]
    pub d_min: f64,
    pub theta_cp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hotspots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_stations: Option<usize>,
}

impl ParamsDocument {
    pub fn from_meta(meta: &InstanceMeta) -> Self {
        let p = meta.params;
        ParamsDocument {
            width: meta.width,
            height: meta.height,
            d_h: p.d_h,
            d_d: p.d_d,
            c_h: p.c_h,
            c_d: p.c_d,
            d_min: p.d_min,
            theta_cp: p.theta_cp,
            seed: None,
            hotspots: None,
            peak_min: None,
            peak_max: None,
            radius_min: None,
            radius_max: None,
            existing_stations: None,
        }
    }

    pub fn from_generator(config: &GeneratorConfig) -> Self {
        let mut doc = Self::from_meta(&InstanceMeta {
            width: config.width,
            height: config.height,
            params: config.params,
        });
        doc.seed = Some(config.seed);
        doc.hotspots = Some(config.hotspots);
        doc.peak_min = Some(config.peak_min);
        doc.peak_max = Some(config.peak_max);
        doc.radius_min = Some(config.radius_min);
        doc.radius_max = Some(config.radius_max);
        doc.existing_stations = Some(config.existing_stations);
        doc
    }

    pub fn meta(&self) -> InstanceMeta {
        InstanceMeta {
            width: self.width,
            height: self.height,
            params: RadioParams {
                d_h: self.d_h,
                d_d: self.d_d,
                c_h: self.c_h,
                c_d: self.c_d,
                d_min: self.d_min,
                theta_cp: self.theta_cp,
            },
        }
    }

    /// Generator settings, with unspecified fields taken from [`GeneratorConfig::for_area`].
    pub fn generator(&self) -> GeneratorConfig {
        let base = GeneratorConfig::for_area(self.width, self.height, self.seed.unwrap_or(0));
        GeneratorConfig {
            hotspots: self.hotspots.unwrap_or(base.hotspots),
            peak_min: self.peak_min.unwrap_or(base.peak_min),
            peak_max: self.peak_max.unwrap_or(base.peak_max),
            radius_min: self.radius_min.unwrap_or(base.radius_min),
            radius_max: self.radius_max.unwrap_or(base.radius_max),
            existing_stations: self.existing_stations.unwrap_or(base.existing_stations),
            params: self.meta().params,
            ..base
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("params serialize");
        s.push('\n');
        s
    }
}

pub fn read_params(path: &Path) -> Result<ParamsDocument, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| DataError::Json { path: path.to_path_buf(), reason: e.to_string() })
}

pub fn write_params(path: &Path, doc: &ParamsDocument) -> Result<(), DataError> {
    fs::write(path, doc.to_json()).map_err(io_err(path))
}

fn open_csv(path: &Path, header: &str) -> Result<csv::Reader<fs::File>, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            reason: format!("expected header `{header}`, found `{found}`"),
        });
    }
    Ok(reader)
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    DataError::Parse { path: path.to_path_buf(), line, column: 0, reason: e.to_string() }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    line: u64,
    column: usize,
    what: &str,
) -> Result<T, DataError>
where
    T::Err: std::fmt::Display,
{
    let raw = record.get(column).unwrap_or("").trim();
    raw.parse::<T>().map_err(|e| DataError::Parse {
        path: path.to_path_buf(),
        line,
        column: column + 1,
        reason: format!("invalid {what} `{raw}`: {e}"),
    })
}

fn read_sites(path: &Path, meta: &InstanceMeta) -> Result<Vec<Site>, DataError> {
    let mut reader = open_csv(path, STATIONS_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let site = Site::new(field(path, &record, line, 0, "x")?, field(path, &record, line, 1, "y")?);
        check_range(path, line, site, meta)?;
        if !seen.insert(site) {
            return Err(DataError::Duplicate { path: path.to_path_buf(), line, site });
        }
        out.push(site);
    }
    Ok(out)
}

fn check_range(path: &Path, line: u64, site: Site, meta: &InstanceMeta) -> Result<(), DataError> {
    if site.x < 0 || site.y < 0 || site.x >= meta.width || site.y >= meta.height {
        return Err(DataError::OutOfRange {
            path: path.to_path_buf(),
            line,
            site,
            width: meta.width,
            height: meta.height,
        });
    }
    Ok(())
}

fn read_cells(path: &Path, meta: &InstanceMeta) -> Result<Vec<GridCell>, DataError> {
    let mut reader = open_csv(path, CELLS_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let x: i64 = field(path, &record, line, 0, "x")?;
        let y: i64 = field(path, &record, line, 1, "y")?;
        let traffic: f64 = field(path, &record, line, 2, "traffic")?;
        if !(traffic.is_finite() && traffic >= 0.0) {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line,
                column: 3,
                reason: format!("traffic must be a non-negative number, got {traffic}"),
            });
        }
        let weak = match record.get(3).unwrap_or("").trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: 4,
                    reason: format!("weak flag must be 0 or 1, got `{other}`"),
                })
            }
        };
        let site = Site::new(x, y);
        check_range(path, line, site, meta)?;
        if !seen.insert(site) {
            return Err(DataError::Duplicate { path: path.to_path_buf(), line, site });
        }
        out.push(GridCell::new(x, y, traffic, weak));
    }
    Ok(out)
}

/// Reads an instance from a cells file and a stations file.
pub fn load_instance(
    cells_path: &Path,
    stations_path: &Path,
    meta: &InstanceMeta,
) -> Result<ProblemInstance, DataError> {
    let cells = read_cells(cells_path, meta)?;
    let stations = read_sites(stations_path, meta)?;
    Ok(ProblemInstance::new(meta.width, meta.height, cells, stations, meta.params)?)
}

pub fn cells_csv(instance: &ProblemInstance) -> String {
    let mut out = String::with_capacity(16 * instance.cells().len() + 32);
    out.push_str(CELLS_HEADER);
    out.push('\n');
    for c in instance.cells() {
        let _ = writeln!(out, "{},{},{},{}", c.x, c.y, c.traffic, u8::from(c.weak));
    }
    out
}

pub fn stations_csv(instance: &ProblemInstance) -> String {
    let mut out = String::from(STATIONS_HEADER);
    out.push('\n');
    for s in instance.existing_stations() {
        let _ = writeln!(out, "{},{}", s.x, s.y);
    }
    out
}

/// Writes the cells and stations files.
pub fn save_instance(
    instance: &ProblemInstance,
    cells_path: &Path,
    stations_path: &Path,
) -> Result<(), DataError> {
    fs::write(cells_path, cells_csv(instance)).map_err(io_err(cells_path))?;
    fs::write(stations_path, stations_csv(instance)).map_err(io_err(stations_path))?;
    Ok(())
}

/// Writes `cells.csv`, `stations.csv` and `params.json` into `dir`.
pub fn save_instance_dir(
    instance: &ProblemInstance,
    dir: &Path,
    params_doc: Option<&ParamsDocument>,
) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    save_instance(instance, &dir.join(CELLS_FILE), &dir.join(STATIONS_FILE))?;
    let doc = params_doc.cloned().unwrap_or_else(|| ParamsDocument::from_meta(&InstanceMeta::of(instance)));
    write_params(&dir.join(PARAMS_FILE), &doc)
}

pub fn load_instance_dir(dir: &Path) -> Result<ProblemInstance, DataError> {
    let doc = read_params(&dir.join(PARAMS_FILE))?;
    load_instance(&dir.join(CELLS_FILE), &dir.join(STATIONS_FILE), &doc.meta())
}

pub fn deployment_csv(deployment: &Deployment) -> String {
    let mut out = String::from(DEPLOYMENT_HEADER);
    out.push('\n');
    for s in &deployment.stations {
        let _ = writeln!(out, "{},{},{}", s.x, s.y, s.kind);
    }
    out
}

pub fn save_deployment(deployment: &Deployment, path: &Path) -> Result<(), DataError> {
    fs::write(path, deployment_csv(deployment)).map_err(io_err(path))
}

/// Reads a deployment file. Duplicates and out-of-range stations are kept:
/// the constraint checker reports them.
pub fn load_deployment(path: &Path) -> Result<Deployment, DataError> {
    let mut reader = open_csv(path, DEPLOYMENT_HEADER)?;
    let mut stations = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let x = field(path, &record, line, 0, "x")?;
        let y = field(path, &record, line, 1, "y")?;
        let kind: StationKind = field(path, &record, line, 2, "kind")?;
        stations.push(PlacedStation::new(x, y, kind));
    }
    Ok(Deployment::new(stations))
}

/// Builds a synthetic instance.
///
/// Traffic is a sum of hotspots, each with a peak that decays linearly to
/// zero at the hotspot radius. Existing stations are placed by rejection
/// sampling at least `D_min` apart. A cell is weak when it carries traffic
/// and no existing station lies within the macro radius.
pub fn generate_instance(config: &GeneratorConfig) -> Result<ProblemInstance, DataError> {
    config.validate()?;
    let (w, h) = (config.width, config.height);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut traffic = vec![0.0f64; (w * h) as usize];
    for _ in 0..config.hotspots {
        let cx = rng.gen_range(0..w);
        let cy = rng.gen_range(0..h);
        let peak = rng.gen_range(config.peak_min..=config.peak_max);
        let radius = rng.gen_range(config.radius_min..=config.radius_max);
        let r = radius.ceil() as i64;
        let center = Site::new(cx, cy);
        for y in (cy - r).max(0)..=(cy + r).min(h - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(w - 1) {
                let falloff = 1.0 - center.distance(Site::new(x, y)) / radius;
                if falloff > 0.0 {
                    traffic[(y * w + x) as usize] += peak * falloff;
                }
            }
        }
    }

    let d_min_sq = config.params.d_min * config.params.d_min;
    let max_attempts = 1000 * config.existing_stations.max(1);
    let mut stations: Vec<Site> = Vec::with_capacity(config.existing_stations);
    let mut attempts = 0;
    while stations.len() < config.existing_stations {
        if attempts >= max_attempts {
            return Err(DataError::Generation(format!(
                "placed only {} of {} existing stations {} apart after {attempts} attempts; use fewer stations",
                stations.len(),
                config.existing_stations,
                config.params.d_min
            )));
        }
        attempts += 1;
        let s = Site::new(rng.gen_range(0..w), rng.gen_range(0..h));
        if stations.iter().all(|&o| (o.distance_sq(s) as f64) >= d_min_sq) {
            stations.push(s);
        }
    }

    let bucket = config.params.d_h.ceil().max(1.0) as i64;
    let bw = w / bucket + 1;
    let bh = h / bucket + 1;
    let mut buckets: Vec<Vec<Site>> = vec![Vec::new(); (bw * bh) as usize];
    for &s in &stations {
        buckets[((s.y / bucket) * bw + s.x / bucket) as usize].push(s);
    }
    let served = |site: Site| {
        let (bx, by) = (site.x / bucket, site.y / bucket);
        (by - 1..=by + 1).filter(|&y| y >= 0 && y < bh).any(|y| {
            (bx - 1..=bx + 1).filter(|&x| x >= 0 && x < bw).any(|x| {
                buckets[(y * bw + x) as usize].iter().any(|&e| e.within(site, config.params.d_h))
            })
        })
    };

    let mut cells = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let t = traffic[(y * w + x) as usize];
            if t > 0.0 {
                let site = Site::new(x, y);
                cells.push(GridCell::new(x, y, t, !served(site)));
            }
        }
    }
    Ok(ProblemInstance::new(w, h, cells, stations, config.params)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub origin: Site,
    pub width: i64,
    pub height: i64,
}

impl RegionSpec {
    pub fn contains(&self, site: Site) -> bool {
        site.x >= self.origin.x
            && site.y >= self.origin.y
            && site.x < self.origin.x + self.width
            && site.y < self.origin.y + self.height
    }
}

/// Cuts `region` out of `instance`, re-basing coordinates to the region origin.
pub fn extract_region(instance: &ProblemInstance, region: &RegionSpec) -> Result<ProblemInstance, DataError> {
    let o = region.origin;
    if region.width <= 0
        || region.height <= 0
        || o.x < 0
        || o.y < 0
        || o.x + region.width > instance.width()
        || o.y + region.height > instance.height()
    {
        return Err(DataError::Region(format!(
            "{}x{} region at {} does not fit inside the {}x{} instance",
            region.width,
            region.height,
            o,
            instance.width(),
            instance.height()
        )));
    }
    let cells = instance
        .cells_in_rect(o.x, o.y, o.x + region.width, o.y + region.height)
        .into_iter()
        .map(|c| GridCell::new(c.x - o.x, c.y - o.y, c.traffic, c.weak))
        .collect();
    let stations = instance
        .existing_stations()
        .iter()
        .filter(|&&s| region.contains(s))
        .map(|s| Site::new(s.x - o.x, s.y - o.y))
        .collect();
    Ok(ProblemInstance::new(region.width, region.height, cells, stations, *instance.params())?)
}

/// Samples `count` distinct region origins uniformly without replacement.
pub fn sample_regions(
    instance: &ProblemInstance,
    count: usize,
    width: i64,
    height: i64,
    seed: u64,
) -> Result<Vec<(RegionSpec, ProblemInstance)>, DataError> {
    if count == 0 {
        return Err(DataError::Region("region count must be positive".into()));
    }
    if width <= 0 || height <= 0 || width > instance.width() || height > instance.height() {
        return Err(DataError::Region(format!(
            "{width}x{height} regions do not fit inside the {}x{} instance",
            instance.width(),
            instance.height()
        )));
    }
    let cols = (instance.width() - width + 1) as usize;
    let rows = (instance.height() - height + 1) as usize;
    let available = cols * rows;
    if count > available {
        return Err(DataError::Region(format!(
            "requested {count} distinct regions but only {available} origins exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, available, count)
        .into_iter()
        .map(|i| {
            let spec = RegionSpec {
                origin: Site::new((i % cols) as i64, (i / cols) as i64),
                width,
                height,
            };
            extract_region(instance, &spec).map(|sub| (spec, sub))
        })
        .collect()
}

/// Seed of the 2500x2500 parent instance behind the standard regions.
pub const STANDARD_PARENT_SEED: u64 = 2024;
/// Seed used to sample the 25 standard regions.
pub const STANDARD_SAMPLE_SEED: u64 = 7;
pub const STANDARD_REGION_COUNT: usize = 25;
pub const STANDARD_REGION_SIZE: i64 = 100;

/// The generated 2500x2500 parent instance.
pub fn standard_parent() -> Result<ProblemInstance, DataError> {
    generate_instance(&GeneratorConfig::for_area(2500, 2500, STANDARD_PARENT_SEED))
}

/// 25 distinct 100x100 regions sampled from [`standard_parent`].
pub fn standard_regions() -> Result<Vec<(RegionSpec, ProblemInstance)>, DataError> {
    sample_regions(
        &standard_parent()?,
        STANDARD_REGION_COUNT,
        STANDARD_REGION_SIZE,
        STANDARD_REGION_SIZE,
        STANDARD_SAMPLE_SEED,
    )
}

/// The standard region used by single-region fixtures, one of [`standard_regions`].
pub fn standard_region() -> Result<ProblemInstance, DataError> {
    let spec = RegionSpec { origin: Site::new(1158, 648), width: STANDARD_REGION_SIZE, height: STANDARD_REGION_SIZE };
    extract_region(&standard_parent()?, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::is_covered;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn meta(w: i64, h: i64) -> InstanceMeta {
        InstanceMeta { width: w, height: h, params: RadioParams::default() }
    }

    #[test]
    fn loads_small_files() {
        let dir = tempfile::tempdir().unwrap();
        let cells = write(dir.path(), "c.csv", "x,y,traffic,weak\n0,0,1.5,1\n3,4,2,0\n9,9,0.25,1\n");
        let st = write(dir.path(), "s.csv", "x,y\n5,5\n");
        let inst = load_instance(&cells, &st, &meta(10, 10)).unwrap();
        assert_eq!(inst.cells().len(), 3);
        assert_eq!(inst.existing_stations(), &[Site::new(5, 5)]);
        assert_eq!(inst.total_weak_traffic(), 1.75);
    }

    #[test]
    fn negative_traffic_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let cells = write(dir.path(), "c.csv", "x,y,traffic,weak\n0,0,1,1\n1,1,-2,1\n");
        let st = write(dir.path(), "s.csv", "x,y\n");
        match load_instance(&cells, &st, &meta(10, 10)) {
            Err(DataError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_range_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let st = write(dir.path(), "s.csv", "x,y\n");
        let dup = write(dir.path(), "d.csv", "x,y,traffic,weak\n1,1,1,1\n1,1,2,0\n");
        assert!(matches!(load_instance(&dup, &st, &meta(5, 5)), Err(DataError::Duplicate { line: 3, .. })));
        let oor = write(dir.path(), "o.csv", "x,y,traffic,weak\n5,1,1,1\n");
        assert!(matches!(load_instance(&oor, &st, &meta(5, 5)), Err(DataError::OutOfRange { line: 2, .. })));
        let hdr = write(dir.path(), "h.csv", "x,y,t,weak\n");
        assert!(matches!(load_instance(&hdr, &st, &meta(5, 5)), Err(DataError::Parse { line: 1, .. })));
        let flag = write(dir.path(), "f.csv", "x,y,traffic,weak\n1,1,1,yes\n");
        assert!(matches!(load_instance(&flag, &st, &meta(5, 5)), Err(DataError::Parse { column: 4, .. })));
    }

    #[test]
    fn empty_instance_writes_header_only() {
        let inst = ProblemInstance::new(4, 4, vec![], vec![], RadioParams::default()).unwrap();
        assert_eq!(cells_csv(&inst), "x,y,traffic,weak\n");
        assert_eq!(stations_csv(&inst), "x,y\n");
        let one = ProblemInstance::new(4, 4, vec![GridCell::new(1, 2, 0.1, true)], vec![], RadioParams::default())
            .unwrap();
        assert_eq!(cells_csv(&one), "x,y,traffic,weak\n1,2,0.1,1\n");
    }

    #[test]
    fn params_document_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.json",
            r#"{"width":5,"height":5,"d_h":30,"d_d":10,"C_h":10,"C_d":1,"D_min":10,"theta_cp":0.9,"colour":1}"#,
        );
        assert!(matches!(read_params(&p), Err(DataError::Json { .. })));
        let ok = write(
            dir.path(),
            "q.json",
            r#"{"width":5,"height":5,"d_h":30,"d_d":10,"C_h":10,"C_d":1,"D_min":10,"theta_cp":0.9,"seed":4}"#,
        );
        let doc = read_params(&ok).unwrap();
        assert_eq!(doc.meta().params, RadioParams::default());
        assert_eq!(doc.generator().seed, 4);
    }

    #[test]
    fn deployment_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let d = Deployment::new(vec![PlacedStation::macro_at(3, 4), PlacedStation::micro_at(0, 9)]);
        let p = dir.path().join("dep.csv");
        save_deployment(&d, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x,y,kind\n3,4,macro\n0,9,micro\n");
        assert_eq!(load_deployment(&p).unwrap(), d);
    }

    #[test]
    fn zero_hotspots_mean_no_traffic() {
        let cfg = GeneratorConfig { hotspots: 0, ..GeneratorConfig::for_area(50, 50, 1) };
        let inst = generate_instance(&cfg).unwrap();
        assert!(inst.cells().is_empty());
        assert_eq!(inst.weak_cells().count(), 0);
    }

    #[test]
    fn far_hotspot_is_entirely_weak() {
        // One hotspot, one station; keep seeds where the two end up far apart.
        let mut checked = 0;
        for seed in 0..50 {
            let cfg = GeneratorConfig {
                hotspots: 1,
                existing_stations: 1,
                radius_min: 5.0,
                radius_max: 5.0,
                ..GeneratorConfig::for_area(200, 200, seed)
            };
            let inst = generate_instance(&cfg).unwrap();
            let station = inst.existing_stations()[0];
            let far = inst.cells().iter().all(|c| c.site().distance(station) > cfg.params.d_h);
            if far {
                assert!(inst.cells().iter().all(|c| c.weak));
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn generation_is_deterministic_and_consistent() {
        let cfg = GeneratorConfig::for_area(300, 200, 11);
        let a = generate_instance(&cfg).unwrap();
        let b = generate_instance(&cfg).unwrap();
        assert_eq!(a, b);
        let st = a.existing_stations();
        for (i, s) in st.iter().enumerate() {
            for t in &st[i + 1..] {
                assert!(s.distance(*t) >= cfg.params.d_min);
            }
        }
        for c in a.weak_cells() {
            assert!(st.iter().all(|&s| !is_covered(c.site(), &PlacedStation::macro_at(s.x, s.y), &cfg.params)));
        }
        for c in a.cells().iter().filter(|c| !c.weak) {
            assert!(st.iter().any(|s| s.within(c.site(), cfg.params.d_h)));
        }
    }

    #[test]
    fn station_placement_can_fail() {
        let cfg = GeneratorConfig { existing_stations: 50, ..GeneratorConfig::for_area(10, 10, 0) };
        assert!(matches!(generate_instance(&cfg), Err(DataError::Generation(_))));
    }

    #[test]
    fn region_sampling() {
        let inst = generate_instance(&GeneratorConfig::for_area(120, 110, 3)).unwrap();
        let regions = sample_regions(&inst, 25, 100, 100, 9).unwrap();
        assert_eq!(regions.len(), 25);
        let origins: HashSet<Site> = regions.iter().map(|(r, _)| r.origin).collect();
        assert_eq!(origins.len(), 25);
        assert_eq!(
            regions.iter().map(|(r, _)| *r).collect::<Vec<_>>(),
            sample_regions(&inst, 25, 100, 100, 9).unwrap().iter().map(|(r, _)| *r).collect::<Vec<_>>()
        );
        let exact = ProblemInstance::new(100, 100, vec![], vec![], RadioParams::default()).unwrap();
        let one = sample_regions(&exact, 1, 100, 100, 0).unwrap();
        assert_eq!(one[0].0.origin, Site::new(0, 0));
        assert!(sample_regions(&exact, 2, 100, 100, 0).is_err());
        assert!(sample_regions(&exact, 1, 101, 100, 0).is_err());
    }

    #[test]
    fn regions_rebase_cells_and_stations() {
        let inst = generate_instance(&GeneratorConfig::for_area(150, 150, 8)).unwrap();
        let spec = RegionSpec { origin: Site::new(20, 35), width: 100, height: 100 };
        let sub = extract_region(&inst, &spec).unwrap();
        for c in sub.cells() {
            let parent = inst.cell(Site::new(c.x + 20, c.y + 35)).unwrap();
            assert_eq!((parent.traffic, parent.weak), (c.traffic, c.weak));
        }
        let inside = inst.cells().iter().filter(|c| spec.contains(c.site())).count();
        assert_eq!(inside, sub.cells().len());
        let st_inside = inst.existing_stations().iter().filter(|s| spec.contains(**s)).count();
        assert_eq!(st_inside, sub.existing_stations().len());
    }
}
