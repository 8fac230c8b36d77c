//! Problem geometry, radio parameters and decision variables.
//!
//! An instance is a `width × height` grid of cells. Populated cells carry a
//! traffic volume and a weak-coverage flag; coordinates that are not listed
//! have zero traffic and are not weak. New stations are placed on grid
//! coordinates and come in two kinds: large-radius, expensive macro stations
//! and small-radius, cheap micro stations.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer grid coordinate. Distances between sites are Euclidean, in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i64,
    pub y: i64,
}

impl Site {
    pub const fn new(x: i64, y: i64) -> Self {
        Site { x, y }
    }

    /// Squared distance; exact in integers.
    pub fn distance_sq(self, other: Site) -> i64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Site) -> f64 {
        (self.distance_sq(other) as f64).sqrt()
    }

    /// `true` if `other` is at most `radius` away (boundary inclusive).
    pub fn within(self, other: Site, radius: f64) -> bool {
        (self.distance_sq(other) as f64) <= radius * radius
    }

    /// Row-major ordering key.
    pub fn row_major_key(self) -> (i64, i64) {
        (self.y, self.x)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<(i64, i64)> for Site {
    fn from((x, y): (i64, i64)) -> Self {
        Site { x, y }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid radio parameters: {0}")]
    InvalidParams(String),
    #[error("grid dimensions must be positive, got {width}x{height}")]
    InvalidDimensions { width: i64, height: i64 },
    #[error("cell {site} lies outside the {width}x{height} grid")]
    CellOutOfBounds { site: Site, width: i64, height: i64 },
    #[error("duplicate cell at {0}")]
    DuplicateCell(Site),
    #[error("cell {site} has invalid traffic {traffic}")]
    InvalidTraffic { site: Site, traffic: f64 },
    #[error("existing station {site} lies outside the {width}x{height} grid")]
    StationOutOfBounds { site: Site, width: i64, height: i64 },
    #[error("duplicate existing station at {0}")]
    DuplicateStation(Site),
    #[error("candidate {site} lies outside the {width}x{height} grid")]
    CandidateOutOfBounds { site: Site, width: i64, height: i64 },
}

/// One populated grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: i64,
    pub y: i64,
    /// Traffic volume, non-negative.
    pub traffic: f64,
    /// Whether the cell lies in a weak-coverage area.
    pub weak: bool,
}

impl GridCell {
    pub fn new(x: i64, y: i64, traffic: f64, weak: bool) -> Self {
        GridCell { x, y, traffic, weak }
    }

    pub fn site(&self) -> Site {
        Site::new(self.x, self.y)
    }
}

/// Coverage radii, setup costs, spacing and the coverage threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Macro coverage radius.
    pub d_h: f64,
    /// Micro coverage radius.
    pub d_d: f64,
    /// Macro setup cost.
    #[serde(rename = "C_h")]
    pub c_h: f64,
    /// Micro setup cost.
    #[serde(rename = "C_d")]
    pub c_d: f64,
    /// Minimum distance between any two stations.
    #[serde(rename = "D_min")]
    pub d_min: f64,
    /// Fraction of weak-area traffic that must be covered.
    pub theta_cp: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            d_h: 30.0,
            d_d: 10.0,
            c_h: 10.0,
            c_d: 1.0,
            d_min: 10.0,
            theta_cp: 0.9,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d_h", self.d_h),
            ("d_d", self.d_d),
            ("C_h", self.c_h),
            ("C_d", self.c_d),
            ("D_min", self.d_min),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be a positive finite number, got {value}"
                )));
            }
        }
        if self.d_h <= self.d_d {
            return Err(ModelError::InvalidParams(format!(
                "macro radius d_h ({}) must exceed micro radius d_d ({})",
                self.d_h, self.d_d
            )));
        }
        if self.c_h <= self.c_d {
            return Err(ModelError::InvalidParams(format!(
                "macro cost C_h ({}) must exceed micro cost C_d ({})",
                self.c_h, self.c_d
            )));
        }
        if !(self.theta_cp > 0.0 && self.theta_cp <= 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "theta_cp must lie in (0, 1], got {}",
                self.theta_cp
            )));
        }
        Ok(())
    }

    pub fn radius(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Macro => self.d_h,
            StationKind::Micro => self.d_d,
        }
    }

    pub fn cost(&self, kind: StationKind) -> f64 {
        match kind {
            StationKind::Macro => self.c_h,
            StationKind::Micro => self.c_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationKind {
    Macro,
    Micro,
}

impl StationKind {
    pub const ALL: [StationKind; 2] = [StationKind::Macro, StationKind::Micro];

    pub fn as_str(self) -> &'static str {
        match self {
            StationKind::Macro => "macro",
            StationKind::Micro => "micro",
        }
    }

    pub fn toggled(self) -> Self {
        match self {
            StationKind::Macro => StationKind::Micro,
            StationKind::Micro => StationKind::Macro,
        }
    }
}

impl fmt::Display for StationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "macro" => Ok(StationKind::Macro),
            "micro" => Ok(StationKind::Micro),
            other => Err(format!("unknown station kind `{other}` (expected macro or micro)")),
        }
    }
}

/// A newly placed station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacedStation {
    pub x: i64,
    pub y: i64,
    pub kind: StationKind,
}

impl PlacedStation {
    pub fn new(x: i64, y: i64, kind: StationKind) -> Self {
        PlacedStation { x, y, kind }
    }

    pub fn macro_at(x: i64, y: i64) -> Self {
        Self::new(x, y, StationKind::Macro)
    }

    pub fn micro_at(x: i64, y: i64) -> Self {
        Self::new(x, y, StationKind::Micro)
    }

    pub fn site(&self) -> Site {
        Site::new(self.x, self.y)
    }
}

/// The set of newly placed stations.
///
/// The type does not reject duplicate or out-of-bounds stations: those are
/// reported as violations by the constraint checker so that externally
/// produced deployments can be diagnosed rather than refused.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub stations: Vec<PlacedStation>,
}

impl Deployment {
    pub fn new(stations: Vec<PlacedStation>) -> Self {
        Deployment { stations }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn push(&mut self, station: PlacedStation) {
        self.stations.push(station);
    }

    pub fn count(&self, kind: StationKind) -> usize {
        self.stations.iter().filter(|s| s.kind == kind).count()
    }

    /// Stations sorted row-major; used for canonical output.
    pub fn sorted(&self) -> Deployment {
        let mut stations = self.stations.clone();
        stations.sort_by_key(|s| (s.y, s.x, s.kind));
        Deployment { stations }
    }

    /// `true` if no two stations share a coordinate and all lie inside `instance`.
    pub fn is_valid_for(&self, instance: &ProblemInstance) -> bool {
        let mut seen = HashSet::with_capacity(self.stations.len());
        self.stations
            .iter()
            .all(|s| instance.contains(s.site()) && seen.insert(s.site()))
    }
}

/// Sum of setup costs over all stations.
pub fn deployment_cost(deployment: &Deployment, params: &RadioParams) -> f64 {
    deployment.stations.iter().map(|s| params.cost(s.kind)).fold(0.0, |a, b| a + b)
}

/// Which coordinates are eligible for new stations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateFilter {
    #[default]
    WeakCellsOnly,
    AllCells,
    ExplicitList(Vec<Site>),
}

impl CandidateFilter {
    /// Wire form: `weak_cells_only`, `all_cells` or `explicit:x,y;x,y;...`.
    pub fn to_wire(&self) -> String {
        match self {
            CandidateFilter::WeakCellsOnly => "weak_cells_only".to_string(),
            CandidateFilter::AllCells => "all_cells".to_string(),
            CandidateFilter::ExplicitList(sites) => {
                let parts: Vec<String> = sites.iter().map(|s| format!("{},{}", s.x, s.y)).collect();
                format!("explicit:{}", parts.join(";"))
            }
        }
    }

    pub fn parse_wire(text: &str) -> Result<Self, String> {
        let text = text.trim();
        match text {
            "weak_cells_only" | "weak" => return Ok(CandidateFilter::WeakCellsOnly),
            "all_cells" | "all" => return Ok(CandidateFilter::AllCells),
            _ => {}
        }
        let Some(list) = text.strip_prefix("explicit:") else {
            return Err(format!("unknown candidate filter `{text}`"));
        };
        let mut sites = Vec::new();
        for part in list.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (x, y) = part
                .split_once(',')
                .ok_or_else(|| format!("bad coordinate `{part}` in candidate list"))?;
            let x = x.trim().parse::<i64>().map_err(|e| format!("bad x in `{part}`: {e}"))?;
            let y = y.trim().parse::<i64>().map_err(|e| format!("bad y in `{part}`: {e}"))?;
            sites.push(Site::new(x, y));
        }
        Ok(CandidateFilter::ExplicitList(sites))
    }
}

/// A siting problem: grid, populated cells, existing stations and parameters.
///
/// Cells are kept sorted row-major; construction validates every invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    width: i64,
    height: i64,
    cells: Vec<GridCell>,
    existing_stations: Vec<Site>,
    params: RadioParams,
}

impl ProblemInstance {
    pub fn new(
        width: i64,
        height: i64,
        mut cells: Vec<GridCell>,
        existing_stations: Vec<Site>,
        params: RadioParams,
    ) -> Result<Self, ModelError> {
        if width <= 0 || height <= 0 {
            return Err(ModelError::InvalidDimensions { width, height });
        }
        params.validate()?;
        let inside = |s: Site| s.x >= 0 && s.y >= 0 && s.x < width && s.y < height;
        for cell in &cells {
            if !inside(cell.site()) {
                return Err(ModelError::CellOutOfBounds { site: cell.site(), width, height });
            }
            if !(cell.traffic.is_finite() && cell.traffic >= 0.0) {
                return Err(ModelError::InvalidTraffic { site: cell.site(), traffic: cell.traffic });
            }
        }
        cells.sort_by_key(|c| c.site().row_major_key());
        if let Some(pair) = cells.windows(2).find(|w| w[0].site() == w[1].site()) {
            return Err(ModelError::DuplicateCell(pair[0].site()));
        }
        if let Some(&site) = existing_stations.iter().find(|&&s| !inside(s)) {
            return Err(ModelError::StationOutOfBounds { site, width, height });
        }
        let mut seen = std::collections::HashSet::with_capacity(existing_stations.len());
        if let Some(&site) = existing_stations.iter().find(|&&s| !seen.insert(s)) {
            return Err(ModelError::DuplicateStation(site));
        }
        Ok(ProblemInstance { width, height, cells, existing_stations, params })
    }

    pub fn width(&self) -> i64 {
        self.width
    }

    pub fn height(&self) -> i64 {
        self.height
    }

    /// Populated cells in row-major order.
    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn existing_stations(&self) -> &[Site] {
        &self.existing_stations
    }

    pub fn params(&self) -> &RadioParams {
        &self.params
    }

    /// Same instance with different parameters.
    pub fn with_params(&self, params: RadioParams) -> Result<Self, ModelError> {
        params.validate()?;
        let mut out = self.clone();
        out.params = params;
        Ok(out)
    }

    pub fn contains(&self, site: Site) -> bool {
        site.x >= 0 && site.y >= 0 && site.x < self.width && site.y < self.height
    }

    /// Weak cells in row-major order.
    pub fn weak_cells(&self) -> impl Iterator<Item = &GridCell> + '_ {
        self.cells.iter().filter(|c| c.weak)
    }

    pub fn total_weak_traffic(&self) -> f64 {
        self.weak_cells().map(|c| c.traffic).fold(0.0, |a, b| a + b)
    }

    /// Cell at `site`, if populated.
    pub fn cell(&self, site: Site) -> Option<&GridCell> {
        self.cells
            .binary_search_by_key(&site.row_major_key(), |c| c.site().row_major_key())
            .ok()
            .map(|i| &self.cells[i])
    }

    /// Cells whose row lies in `y_range` and column in `x_range`, row-major.
    pub fn cells_in_rect(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<&GridCell> {
        let mut out = Vec::new();
        for y in y0.max(0)..y1.min(self.height) {
            let start = self.cells.partition_point(|c| (c.y, c.x) < (y, x0));
            for cell in &self.cells[start..] {
                if cell.y != y || cell.x >= x1 {
                    break;
                }
                out.push(cell);
            }
        }
        out
    }

    /// Eligible coordinates for new stations, row-major and de-duplicated.
    pub fn candidate_sites(&self, filter: &CandidateFilter) -> Result<Vec<Site>, ModelError> {
        match filter {
            CandidateFilter::WeakCellsOnly => Ok(self.weak_cells().map(GridCell::site).collect()),
            CandidateFilter::AllCells => {
                let mut out = Vec::with_capacity((self.width * self.height) as usize);
                for y in 0..self.height {
                    for x in 0..self.width {
                        out.push(Site::new(x, y));
                    }
                }
                Ok(out)
            }
            CandidateFilter::ExplicitList(sites) => {
                if let Some(&site) = sites.iter().find(|&&s| !self.contains(s)) {
                    return Err(ModelError::CandidateOutOfBounds {
                        site,
                        width: self.width,
                        height: self.height,
                    });
                }
                let mut out = sites.clone();
                out.sort_by_key(|s| s.row_major_key());
                out.dedup();
                Ok(out)
            }
        }
    }
}

/// Free-function form of [`ProblemInstance::candidate_sites`].
pub fn candidate_sites(
    instance: &ProblemInstance,
    filter: &CandidateFilter,
) -> Result<Vec<Site>, ModelError> {
    instance.candidate_sites(filter)
}
