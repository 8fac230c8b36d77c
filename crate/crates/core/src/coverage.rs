//! Disk-coverage evaluation and constraint checking.
//!
//! Coverage indicators are deterministic: a point is covered by a station iff
//! its Euclidean distance to the station is at most the station's radius.
//! Only newly placed stations cover weak cells; existing stations take part
//! in the minimum-distance checks only.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{deployment_cost, Deployment, PlacedStation, ProblemInstance, RadioParams, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    CoverageShortfall,
    NewNewDistance,
    NewExistingDistance,
    DuplicateSite,
    OutOfBounds,
}

impl ViolationKind {
    pub fn is_distance(self) -> bool {
        matches!(self, ViolationKind::NewNewDistance | ViolationKind::NewExistingDistance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::CoverageShortfall => "coverage_shortfall",
            ViolationKind::NewNewDistance => "new_new_distance",
            ViolationKind::NewExistingDistance => "new_existing_distance",
            ViolationKind::DuplicateSite => "duplicate_site",
            ViolationKind::OutOfBounds => "out_of_bounds",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub kind: ViolationKind,
    pub detail: String,
    /// Shortfall amount or missing distance; always positive.
    pub measure: f64,
    pub subjects: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub coverage_ratio: f64,
    pub covered_traffic: f64,
    pub total_weak_traffic: f64,
    pub cost: f64,
    pub violations: Vec<ConstraintViolation>,
    pub feasible: bool,
}

impl EvaluationReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.count(kind) > 0
    }

    /// Sum of distance-violation measures.
    pub fn distance_violation_total(&self) -> f64 {
        self.violations.iter().filter(|v| v.kind.is_distance()).map(|v| v.measure).fold(0.0, |a, b| a + b)
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "coverage {:.4} ({} / {}), cost {}, {}",
            self.coverage_ratio,
            self.covered_traffic,
            self.total_weak_traffic,
            self.cost,
            if self.feasible { "feasible" } else { "infeasible" }
        )?;
        for v in &self.violations {
            writeln!(f, "  {}: {} (measure {:.6})", v.kind, v.detail, v.measure)?;
        }
        Ok(())
    }
}

pub fn is_covered(point: Site, station: &PlacedStation, params: &RadioParams) -> bool {
    station.site().within(point, params.radius(station.kind))
}

fn ratio(covered: f64, total: f64) -> f64 {
    if total > 0.0 {
        (covered / total).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Weak traffic covered by at least one new station, summed cell by cell.
pub fn covered_weak_traffic(instance: &ProblemInstance, deployment: &Deployment) -> f64 {
    let params = instance.params();
    instance
        .weak_cells()
        .filter(|c| deployment.stations.iter().any(|s| is_covered(c.site(), s, params)))
        .map(|c| c.traffic)
        .fold(0.0, |a, b| a + b)
}

/// Fraction of weak-cell traffic covered by new stations; 1.0 when there is no weak traffic.
pub fn coverage_ratio(instance: &ProblemInstance, deployment: &Deployment) -> f64 {
    ratio(covered_weak_traffic(instance, deployment), instance.total_weak_traffic())
}

/// Per-cell coverage grid: `true` for weak cells covered by at least one new station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    width: i64,
    height: i64,
    covered: Vec<bool>,
}

impl CoverageMap {
    pub fn width(&self) -> i64 {
        self.width
    }

    pub fn height(&self) -> i64 {
        self.height
    }

    pub fn get(&self, site: Site) -> bool {
        if site.x < 0 || site.y < 0 || site.x >= self.width || site.y >= self.height {
            return false;
        }
        self.covered[(site.y * self.width + site.x) as usize]
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    /// Coverage ratio recomputed from the map.
    pub fn ratio(&self, instance: &ProblemInstance) -> f64 {
        let covered: f64 =
            instance.weak_cells().filter(|c| self.get(c.site())).map(|c| c.traffic).fold(0.0, |a, b| a + b);
        ratio(covered, instance.total_weak_traffic())
    }
}

/// Rasterizes every station's disk over the weak cells it touches.
pub fn coverage_map(instance: &ProblemInstance, deployment: &Deployment) -> CoverageMap {
    let (width, height) = (instance.width(), instance.height());
    let mut covered = vec![false; (width * height) as usize];
    let params = instance.params();
    for station in &deployment.stations {
        let r = params.radius(station.kind).floor() as i64;
        let cells = instance.cells_in_rect(
            station.x - r,
            station.y - r,
            station.x + r + 1,
            station.y + r + 1,
        );
        for cell in cells.into_iter().filter(|c| c.weak) {
            if is_covered(cell.site(), station, params) {
                covered[(cell.y * width + cell.x) as usize] = true;
            }
        }
    }
    CoverageMap { width, height, covered }
}

fn distance_violation(
    kind: ViolationKind,
    a: Site,
    b: Site,
    d_min: f64,
) -> Option<ConstraintViolation> {
    if (a.distance_sq(b) as f64) >= d_min * d_min {
        return None;
    }
    let dist = a.distance(b);
    let what = match kind {
        ViolationKind::NewNewDistance => "new stations",
        _ => "new and existing station",
    };
    Some(ConstraintViolation {
        kind,
        detail: format!("{what} {a} and {b} are {dist:.4} apart, below the minimum {d_min}"),
        measure: d_min - dist,
        subjects: vec![a, b],
    })
}

/// Evaluates a deployment against every constraint and reports all violations.
pub fn check_constraints(instance: &ProblemInstance, deployment: &Deployment) -> EvaluationReport {
    let params = instance.params();
    let mut violations = Vec::new();

    for s in &deployment.stations {
        if !instance.contains(s.site()) {
            violations.push(ConstraintViolation {
                kind: ViolationKind::OutOfBounds,
                detail: format!(
                    "{} station at {} lies outside the {}x{} grid",
                    s.kind,
                    s.site(),
                    instance.width(),
                    instance.height()
                ),
                measure: 1.0,
                subjects: vec![s.site()],
            });
        }
    }

    let mut by_site: HashMap<Site, usize> = HashMap::new();
    for s in &deployment.stations {
        *by_site.entry(s.site()).or_default() += 1;
    }
    let mut dups: Vec<(Site, usize)> = by_site.into_iter().filter(|&(_, n)| n > 1).collect();
    dups.sort_by_key(|(s, _)| s.row_major_key());
    for (site, n) in dups {
        violations.push(ConstraintViolation {
            kind: ViolationKind::DuplicateSite,
            detail: format!("{n} stations share site {site}"),
            measure: (n - 1) as f64,
            subjects: vec![site],
        });
    }

    let stations = &deployment.stations;
    for (i, a) in stations.iter().enumerate() {
        for b in &stations[i + 1..] {
            // Co-located pairs are reported as duplicates above.
            if a.site() == b.site() {
                continue;
            }
            violations.extend(distance_violation(
                ViolationKind::NewNewDistance,
                a.site(),
                b.site(),
                params.d_min,
            ));
        }
    }
    for s in stations {
        for &e in instance.existing_stations() {
            violations.extend(distance_violation(
                ViolationKind::NewExistingDistance,
                s.site(),
                e,
                params.d_min,
            ));
        }
    }

    let covered = covered_weak_traffic(instance, deployment);
    let total = instance.total_weak_traffic();
    let coverage = ratio(covered, total);
    if coverage < params.theta_cp {
        violations.push(ConstraintViolation {
            kind: ViolationKind::CoverageShortfall,
            detail: format!(
                "covers {:.4} of weak-area traffic, threshold is {}",
                coverage, params.theta_cp
            ),
            measure: params.theta_cp - coverage,
            subjects: Vec::new(),
        });
    }

    EvaluationReport {
        coverage_ratio: coverage,
        covered_traffic: covered,
        total_weak_traffic: total,
        cost: deployment_cost(deployment, params),
        feasible: violations.is_empty(),
        violations,
    }
}
