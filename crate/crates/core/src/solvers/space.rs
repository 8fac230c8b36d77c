//! Precomputed search space shared by the solvers.
//!
//! Candidates that sit closer than `D_min` to an existing station can never
//! host a station, so they are dropped up front. For every remaining
//! candidate and station kind we store the weak cells the station would
//! cover, and for every candidate the other candidates it conflicts with.

use crate::model::{CandidateFilter, ModelError, PlacedStation, ProblemInstance, Site, StationKind};

pub(crate) const NONE: u32 = u32::MAX;

pub(crate) fn kind_slot(kind: StationKind) -> usize {
    match kind {
        StationKind::Macro => 0,
        StationKind::Micro => 1,
    }
}

pub(crate) struct SearchSpace<'a> {
    pub instance: &'a ProblemInstance,
    /// Weak cells, row-major.
    pub weak_sites: Vec<Site>,
    pub weak_traffic: Vec<f64>,
    pub total_weak: f64,
    /// Candidate count before dropping sites blocked by existing stations.
    pub raw_candidates: usize,
    pub sites: Vec<Site>,
    /// `cover[s][slot]`: weak-cell indices covered by a station of that kind at site `s`.
    pub cover: Vec<[Vec<u32>; 2]>,
    /// Traffic covered by a lone station of each kind.
    pub solo_traffic: Vec<[f64; 2]>,
    /// Candidates strictly closer than `D_min`, including the site itself.
    pub conflicts: Vec<Vec<u32>>,
    site_index: Vec<u32>,
}

impl<'a> SearchSpace<'a> {
    pub fn new(instance: &'a ProblemInstance, filter: &CandidateFilter) -> Result<Self, ModelError> {
        let params = instance.params();
        let (w, h) = (instance.width(), instance.height());
        let raw = instance.candidate_sites(filter)?;
        let raw_candidates = raw.len();
        let d_min_sq = params.d_min * params.d_min;
        let sites: Vec<Site> = raw
            .into_iter()
            .filter(|s| {
                instance
                    .existing_stations()
                    .iter()
                    .all(|&e| (s.distance_sq(e) as f64) >= d_min_sq)
            })
            .collect();

        let mut weak_index = vec![NONE; (w * h) as usize];
        let mut weak_sites = Vec::new();
        let mut weak_traffic = Vec::new();
        for cell in instance.weak_cells() {
            weak_index[(cell.y * w + cell.x) as usize] = weak_sites.len() as u32;
            weak_sites.push(cell.site());
            weak_traffic.push(cell.traffic);
        }
        let total_weak = instance.total_weak_traffic();

        let mut site_index = vec![NONE; (w * h) as usize];
        for (i, s) in sites.iter().enumerate() {
            site_index[(s.y * w + s.x) as usize] = i as u32;
        }

        let disk = |center: Site, radius: f64, grid: &[u32]| -> Vec<u32> {
            let r = radius.floor() as i64;
            let r_sq = radius * radius;
            let mut out = Vec::new();
            for y in (center.y - r).max(0)..=(center.y + r).min(h - 1) {
                for x in (center.x - r).max(0)..=(center.x + r).min(w - 1) {
                    let idx = grid[(y * w + x) as usize];
                    if idx != NONE && (center.distance_sq(Site::new(x, y)) as f64) <= r_sq {
                        out.push(idx);
                    }
                }
            }
            out
        };

        let mut cover = Vec::with_capacity(sites.len());
        let mut solo_traffic = Vec::with_capacity(sites.len());
        let mut conflicts = Vec::with_capacity(sites.len());
        for &s in &sites {
            let macro_cells = disk(s, params.d_h, &weak_index);
            let micro_cells = disk(s, params.d_d, &weak_index);
            let sum = |cells: &[u32]| cells.iter().map(|&c| weak_traffic[c as usize]).sum::<f64>();
            solo_traffic.push([sum(&macro_cells), sum(&micro_cells)]);
            cover.push([macro_cells, micro_cells]);

            // Strictly-closer-than test: distance_sq < D_min^2.
            let r = params.d_min.ceil() as i64;
            let mut near = Vec::new();
            for y in (s.y - r).max(0)..=(s.y + r).min(h - 1) {
                for x in (s.x - r).max(0)..=(s.x + r).min(w - 1) {
                    let idx = site_index[(y * w + x) as usize];
                    if idx != NONE && (s.distance_sq(Site::new(x, y)) as f64) < d_min_sq {
                        near.push(idx);
                    }
                }
            }
            conflicts.push(near);
        }

        Ok(SearchSpace {
            instance,
            weak_sites,
            weak_traffic,
            total_weak,
            raw_candidates,
            sites,
            cover,
            solo_traffic,
            conflicts,
            site_index,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn index_of(&self, site: Site) -> Option<usize> {
        if !self.instance.contains(site) {
            return None;
        }
        let idx = self.site_index[(site.y * self.instance.width() + site.x) as usize];
        (idx != NONE).then_some(idx as usize)
    }

    pub fn cells(&self, site: usize, kind: StationKind) -> &[u32] {
        &self.cover[site][kind_slot(kind)]
    }

    pub fn cost(&self, kind: StationKind) -> f64 {
        self.instance.params().cost(kind)
    }

    pub fn station(&self, site: usize, kind: StationKind) -> PlacedStation {
        let s = self.sites[site];
        PlacedStation::new(s.x, s.y, kind)
    }

    /// Covered weak traffic summed in row-major cell order, matching the
    /// constraint checker bit for bit.
    pub fn exact_covered(&self, counts: &[u32]) -> f64 {
        self.weak_traffic
            .iter()
            .zip(counts)
            .filter(|(_, &c)| c > 0)
            .map(|(t, _)| *t)
            .sum()
    }

    pub fn ratio(&self, covered: f64) -> f64 {
        if self.total_weak > 0.0 {
            (covered / self.total_weak).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

/// Mutable placement state with incremental coverage and admissibility bookkeeping.
#[derive(Clone)]
pub(crate) struct Placement {
    pub kind_at: Vec<Option<StationKind>>,
    /// Occupied site indices, in insertion order.
    pub occupied: Vec<usize>,
    position: Vec<u32>,
    /// Per site: how many placed stations lie strictly closer than `D_min`.
    pub blocked: Vec<u32>,
    /// Per weak cell: how many placed stations cover it.
    pub counts: Vec<u32>,
    pub cost: f64,
}

impl Placement {
    pub fn new(space: &SearchSpace<'_>) -> Self {
        Placement {
            kind_at: vec![None; space.len()],
            occupied: Vec::new(),
            position: vec![NONE; space.len()],
            blocked: vec![0; space.len()],
            counts: vec![0; space.weak_sites.len()],
            cost: 0.0,
        }
    }

    pub fn admissible(&self, site: usize) -> bool {
        self.blocked[site] == 0
    }

    /// Admissible once the station at `ignoring` is taken away.
    pub fn admissible_ignoring(&self, space: &SearchSpace<'_>, site: usize, ignoring: usize) -> bool {
        let own = u32::from(space.conflicts[ignoring].contains(&(site as u32)));
        self.blocked[site] == own
    }

    /// Traffic newly covered by adding a station.
    pub fn gain(&self, space: &SearchSpace<'_>, site: usize, kind: StationKind) -> f64 {
        space
            .cells(site, kind)
            .iter()
            .filter(|&&c| self.counts[c as usize] == 0)
            .map(|&c| space.weak_traffic[c as usize])
            .sum()
    }

    /// Traffic that would become uncovered if the station at `site` were removed.
    pub fn loss(&self, space: &SearchSpace<'_>, site: usize) -> f64 {
        let kind = self.kind_at[site].expect("occupied site");
        space
            .cells(site, kind)
            .iter()
            .filter(|&&c| self.counts[c as usize] == 1)
            .map(|&c| space.weak_traffic[c as usize])
            .sum()
    }

    pub fn add(&mut self, space: &SearchSpace<'_>, site: usize, kind: StationKind) {
        debug_assert!(self.kind_at[site].is_none());
        self.kind_at[site] = Some(kind);
        self.position[site] = self.occupied.len() as u32;
        self.occupied.push(site);
        for &n in &space.conflicts[site] {
            self.blocked[n as usize] += 1;
        }
        for &c in space.cells(site, kind) {
            self.counts[c as usize] += 1;
        }
        self.cost += space.cost(kind);
    }

    pub fn remove(&mut self, space: &SearchSpace<'_>, site: usize) -> StationKind {
        let kind = self.kind_at[site].take().expect("occupied site");
        let pos = self.position[site] as usize;
        self.occupied.swap_remove(pos);
        if let Some(&moved) = self.occupied.get(pos) {
            self.position[moved] = pos as u32;
        }
        self.position[site] = NONE;
        for &n in &space.conflicts[site] {
            self.blocked[n as usize] -= 1;
        }
        for &c in space.cells(site, kind) {
            self.counts[c as usize] -= 1;
        }
        self.cost -= space.cost(kind);
        kind
    }

    /// Stations in row-major order of their sites.
    pub fn stations(&self, space: &SearchSpace<'_>) -> Vec<PlacedStation> {
        self.kind_at
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.map(|k| space.station(i, k)))
            .collect()
    }
}
