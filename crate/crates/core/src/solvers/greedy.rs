use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::space::{kind_slot, Placement, SearchSpace};
use super::{energy_from_parts, ObjectiveMode, SolveError, SolveResult, SolverConfig, TracePoint};
use crate::coverage::check_constraints;
use crate::model::{Deployment, ProblemInstance, StationKind};

struct Entry {
    ratio: f64,
    cost: f64,
    site: usize,
    kind: StationKind,
    version: usize,
}

impl Entry {
    // Higher ratio wins, then lower cost, then earlier row-major site.
    fn priority_cmp(&self, other: &Self) -> Ordering {
        self.ratio
            .total_cmp(&other.ratio)
            .then_with(|| other.cost.total_cmp(&self.cost))
            .then_with(|| other.site.cmp(&self.site))
            .then_with(|| kind_slot(other.kind).cmp(&kind_slot(self.kind)))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.priority_cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority_cmp(other)
    }
}

/// Repeatedly adds the admissible `(site, kind)` pair with the most newly
/// covered weak traffic per unit cost.
///
/// Stops once the coverage threshold is met (cost-first mode), when no
/// admissible pair adds coverage, or when the evaluation budget runs out.
/// Gains only shrink as stations are added, so stale heap entries are upper
/// bounds and are re-evaluated lazily; the selection sequence is the same as
/// a full rescan with the same tie-breaking.
pub fn solve_greedy(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let space = SearchSpace::new(instance, &config.candidates)?;
    let params = instance.params();
    let theta = params.theta_cp;
    let mut state = Placement::new(&space);
    let mut evaluations = 0usize;
    let mut covered = 0.0;
    let mut additions = 0usize;

    let energy = |cost: f64, covered: f64| {
        energy_from_parts(
            ObjectiveMode::CostFirst,
            config.penalty_weight,
            theta,
            cost,
            covered,
            space.total_weak,
            0.0,
        )
    };
    let mut trace = vec![TracePoint {
        iteration: 0,
        best_energy: energy(0.0, 0.0),
        coverage_ratio: space.ratio(0.0),
    }];

    let done = |covered: f64| {
        config.objective_mode == ObjectiveMode::CostFirst && space.ratio(covered) >= theta
    };

    let mut heap = BinaryHeap::new();
    if !done(covered) {
        'init: for site in 0..space.len() {
            for kind in StationKind::ALL {
                if evaluations >= config.max_evaluations {
                    break 'init;
                }
                evaluations += 1;
                let cost = space.cost(kind);
                let gain = space.solo_traffic[site][kind_slot(kind)];
                heap.push(Entry { ratio: gain / cost, cost, site, kind, version: 0 });
            }
        }
    }

    while !done(covered) {
        let Some(top) = heap.pop() else { break };
        if !state.admissible(top.site) {
            continue;
        }
        if top.version != additions {
            if evaluations >= config.max_evaluations {
                break;
            }
            evaluations += 1;
            let gain = state.gain(&space, top.site, top.kind);
            let fresh = Entry { ratio: gain / top.cost, version: additions, ..top };
            if heap.peek().is_some_and(|next| fresh < *next) {
                heap.push(fresh);
                continue;
            }
            if !(gain > 0.0) {
                break;
            }
            state.add(&space, fresh.site, fresh.kind);
        } else {
            if !(top.ratio > 0.0) {
                break;
            }
            state.add(&space, top.site, top.kind);
        }
        additions += 1;
        covered = space.exact_covered(&state.counts);
        trace.push(TracePoint {
            iteration: additions,
            best_energy: energy(state.cost, covered),
            coverage_ratio: space.ratio(covered),
        });
    }

    let deployment = Deployment::new(state.stations(&space));
    let report = check_constraints(instance, &deployment);
    Ok(SolveResult {
        deployment,
        report,
        evaluations_used: evaluations,
        wall_time: start.elapsed(),
        trace: Some(trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GridCell, RadioParams, Site};
    use crate::solvers::Algorithm;

    fn cluster(cx: i64, cy: i64, r: i64) -> Vec<GridCell> {
        let mut out = Vec::new();
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if Site::new(x, y).within(Site::new(cx, cy), r as f64) {
                    out.push(GridCell::new(x, y, 1.0 + ((x + y) % 3) as f64, true));
                }
            }
        }
        out
    }

    #[test]
    fn single_cluster_needs_one_micro() {
        let inst =
            ProblemInstance::new(40, 40, cluster(20, 20, 4), vec![], RadioParams::default()).unwrap();
        let res = solve_greedy(&inst, &SolverConfig::new(Algorithm::Greedy)).unwrap();
        assert_eq!(res.deployment.len(), 1);
        assert_eq!(res.report.cost, 1.0);
        assert_eq!(res.report.coverage_ratio, 1.0);
        assert!(res.report.feasible);
    }

    #[test]
    fn zero_weak_traffic_gives_empty_deployment() {
        let cells = vec![GridCell::new(3, 3, 4.0, false)];
        let inst = ProblemInstance::new(10, 10, cells, vec![], RadioParams::default()).unwrap();
        let res = solve_greedy(&inst, &SolverConfig::default()).unwrap();
        assert!(res.deployment.is_empty());
        assert_eq!(res.report.coverage_ratio, 1.0);
        assert!(res.report.feasible);
    }

    #[test]
    fn two_far_clusters_need_two_micros() {
        let mut cells = cluster(4, 4, 3);
        cells.extend(cluster(15, 15, 3));
        let params = RadioParams { d_h: 30.0, ..RadioParams::default() };
        let inst = ProblemInstance::new(20, 20, cells, vec![], params).unwrap();
        let res = solve_greedy(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(res.report.cost, 2.0);
        assert_eq!(res.deployment.count(StationKind::Micro), 2);
        assert!(res.report.feasible);
    }

    #[test]
    fn trace_coverage_never_decreases() {
        let mut cells = cluster(10, 10, 6);
        cells.extend(cluster(40, 12, 5));
        cells.extend(cluster(25, 40, 7));
        let inst = ProblemInstance::new(60, 60, cells, vec![Site::new(55, 55)], RadioParams::default())
            .unwrap();
        let cfg = SolverConfig::default().with_objective(ObjectiveMode::CoverageFirst);
        let res = solve_greedy(&inst, &cfg).unwrap();
        let trace = res.trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1].coverage_ratio >= w[0].coverage_ratio));
        assert_eq!(res.report.coverage_ratio, 1.0);
        assert!(res.report.violations.iter().all(|v| !v.kind.is_distance()));
    }

    #[test]
    fn lazy_selection_matches_full_rescan() {
        let mut cells = cluster(12, 9, 8);
        cells.extend(cluster(30, 30, 9));
        cells.extend(cluster(45, 10, 4));
        let params = RadioParams { d_h: 14.0, d_d: 6.0, c_h: 5.0, ..RadioParams::default() };
        let inst = ProblemInstance::new(60, 50, cells, vec![Site::new(0, 49)], params).unwrap();
        let cfg = SolverConfig::default().with_objective(ObjectiveMode::CoverageFirst);
        let lazy = solve_greedy(&inst, &cfg).unwrap();

        // Straight rescan of every admissible pair each round.
        let space = SearchSpace::new(&inst, &cfg.candidates).unwrap();
        let mut state = Placement::new(&space);
        let mut picks = Vec::new();
        loop {
            let mut best: Option<Entry> = None;
            for site in 0..space.len() {
                if !state.admissible(site) {
                    continue;
                }
                for kind in StationKind::ALL {
                    let cost = space.cost(kind);
                    let e = Entry { ratio: state.gain(&space, site, kind) / cost, cost, site, kind, version: 0 };
                    if best.as_ref().map_or(true, |b| e > *b) {
                        best = Some(e);
                    }
                }
            }
            match best {
                Some(b) if b.ratio > 0.0 => {
                    state.add(&space, b.site, b.kind);
                    picks.push(space.station(b.site, b.kind));
                }
                _ => break,
            }
        }
        let mut expected = Deployment::new(picks).sorted();
        expected.stations.sort_by_key(|s| (s.y, s.x));
        assert_eq!(lazy.deployment.sorted(), expected);
    }
}
