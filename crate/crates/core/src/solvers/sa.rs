use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::space::{Placement, SearchSpace};
use super::{energy_from_parts, SolveError, SolveResult, SolverConfig, TracePoint};
use crate::coverage::check_constraints;
use crate::model::{Deployment, ProblemInstance, Site, StationKind};

/// Half-width of the square searched for a neighboring candidate when moving a station.
const MOVE_RADIUS: i64 = 3;

#[derive(Debug, Clone, Copy)]
enum Move {
    Add(usize, StationKind),
    Remove(usize),
    Relocate { from: usize, to: usize },
    Toggle(usize),
}

fn random_kind(rng: &mut ChaCha8Rng) -> StationKind {
    if rng.gen_bool(0.5) {
        StationKind::Macro
    } else {
        StationKind::Micro
    }
}

fn neighbor(space: &SearchSpace<'_>, site: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    let s = space.sites[site];
    let mut near = Vec::new();
    for dy in -MOVE_RADIUS..=MOVE_RADIUS {
        for dx in -MOVE_RADIUS..=MOVE_RADIUS {
            if (dx, dy) == (0, 0) {
                continue;
            }
            if let Some(i) = space.index_of(Site::new(s.x + dx, s.y + dy)) {
                near.push(i);
            }
        }
    }
    (!near.is_empty()).then(|| near[rng.gen_range(0..near.len())])
}

/// Draws a move that keeps the placement admissible, or `None` if the draw was rejected.
fn propose(space: &SearchSpace<'_>, state: &Placement, rng: &mut ChaCha8Rng) -> Option<Move> {
    let kind_of_move = if state.occupied.is_empty() { 0 } else { rng.gen_range(0..4) };
    match kind_of_move {
        0 => {
            let site = rng.gen_range(0..space.len());
            let kind = random_kind(rng);
            state.admissible(site).then_some(Move::Add(site, kind))
        }
        1 => Some(Move::Remove(state.occupied[rng.gen_range(0..state.occupied.len())])),
        2 => {
            let from = state.occupied[rng.gen_range(0..state.occupied.len())];
            let to = neighbor(space, from, rng)?;
            (state.kind_at[to].is_none() && state.admissible_ignoring(space, to, from))
                .then_some(Move::Relocate { from, to })
        }
        _ => Some(Move::Toggle(state.occupied[rng.gen_range(0..state.occupied.len())])),
    }
}

/// Change in covered traffic and cost if `mv` were applied.
fn delta(space: &SearchSpace<'_>, state: &mut Placement, mv: Move) -> (f64, f64) {
    match mv {
        Move::Add(site, kind) => (state.gain(space, site, kind), space.cost(kind)),
        Move::Remove(site) => {
            let kind = state.kind_at[site].expect("occupied");
            (-state.loss(space, site), -space.cost(kind))
        }
        Move::Relocate { from, to } => {
            let kind = state.remove(space, from);
            let lost = state.gain(space, from, kind);
            let gained = state.gain(space, to, kind);
            state.add(space, from, kind);
            (gained - lost, 0.0)
        }
        Move::Toggle(site) => {
            let kind = state.remove(space, site);
            let lost = state.gain(space, site, kind);
            let gained = state.gain(space, site, kind.toggled());
            state.add(space, site, kind);
            (gained - lost, space.cost(kind.toggled()) - space.cost(kind))
        }
    }
}

fn apply(space: &SearchSpace<'_>, state: &mut Placement, mv: Move) {
    match mv {
        Move::Add(site, kind) => state.add(space, site, kind),
        Move::Remove(site) => {
            state.remove(space, site);
        }
        Move::Relocate { from, to } => {
            let kind = state.remove(space, from);
            state.add(space, to, kind);
        }
        Move::Toggle(site) => {
            let kind = state.remove(space, site);
            state.add(space, site, kind.toggled());
        }
    }
}

/// Simulated annealing over admissible placements.
///
/// Starts from the empty deployment. Each evaluation draws one of four moves
/// (add, remove, relocate to a nearby candidate, toggle kind); moves that
/// would break the minimum-distance or one-per-site rules are rejected
/// outright. Worse moves are accepted with probability `exp(−ΔE/T)` and the
/// temperature is multiplied by `alpha` every `moves_per_temp` evaluations.
/// Returns the lowest-energy placement seen.
pub fn solve_sa(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let space = SearchSpace::new(instance, &config.candidates)?;
    let theta = instance.params().theta_cp;
    let energy = |cost: f64, covered: f64| {
        energy_from_parts(
            config.objective_mode,
            config.penalty_weight,
            theta,
            cost,
            covered,
            space.total_weak,
            0.0,
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = Placement::new(&space);
    let mut covered = 0.0;
    let mut current = energy(0.0, 0.0);
    let mut best_energy = current;
    let mut best = state.stations(&space);
    let mut best_ratio = space.ratio(0.0);
    let mut trace = Vec::new();

    let mut temperature = config.sa.t0;
    let mut evaluations = 0usize;
    let mut step = 0usize;
    while evaluations < config.max_evaluations && space.len() > 0 {
        for _ in 0..config.sa.moves_per_temp {
            if evaluations >= config.max_evaluations {
                break;
            }
            evaluations += 1;
            let Some(mv) = propose(&space, &state, &mut rng) else { continue };
            let (d_cov, d_cost) = delta(&space, &mut state, mv);
            let proposed = energy(state.cost + d_cost, covered + d_cov);
            let d_e = proposed - current;
            let accept = d_e <= 0.0 || rng.gen::<f64>() < (-d_e / temperature).exp();
            if !accept {
                continue;
            }
            apply(&space, &mut state, mv);
            covered += d_cov;
            current = proposed;
            if current < best_energy {
                // Resynchronize against drift before recording a new best.
                covered = space.exact_covered(&state.counts);
                current = energy(state.cost, covered);
                if current < best_energy {
                    best_energy = current;
                    best = state.stations(&space);
                    best_ratio = space.ratio(covered);
                }
            }
        }
        trace.push(TracePoint { iteration: step, best_energy, coverage_ratio: best_ratio });
        temperature *= config.sa.alpha;
        step += 1;
    }

    let deployment = Deployment::new(best);
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
    use crate::model::{GridCell, RadioParams};
    use crate::solvers::{energy, Algorithm, ObjectiveMode};

    fn blob(cx: i64, cy: i64, r: i64) -> Vec<GridCell> {
        let mut out = Vec::new();
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if Site::new(x, y).within(Site::new(cx, cy), r as f64) {
                    out.push(GridCell::new(x, y, 2.0, true));
                }
            }
        }
        out
    }

    fn two_blobs() -> ProblemInstance {
        let mut cells = blob(8, 8, 3);
        cells.extend(blob(30, 30, 3));
        ProblemInstance::new(40, 40, cells, vec![Site::new(38, 2)], RadioParams::default()).unwrap()
    }

    #[test]
    fn finds_cheap_feasible_deployment() {
        let inst = two_blobs();
        let cfg = SolverConfig::new(Algorithm::Sa).with_max_evaluations(5000);
        let mut best = f64::INFINITY;
        for seed in 0..10 {
            let res = solve_sa(&inst, &cfg.clone().with_seed(seed)).unwrap();
            assert!(res.report.violations.iter().all(|v| v.kind == crate::coverage::ViolationKind::CoverageShortfall));
            if res.report.feasible {
                best = best.min(res.report.cost);
            }
        }
        assert!(best <= 3.0, "best feasible cost {best}");
    }

    #[test]
    fn zero_weak_traffic_stays_empty() {
        let inst = ProblemInstance::new(20, 20, vec![GridCell::new(1, 1, 3.0, false)], vec![], RadioParams::default())
            .unwrap();
        let res = solve_sa(&inst, &SolverConfig::new(Algorithm::Sa).with_candidates(crate::model::CandidateFilter::AllCells))
            .unwrap();
        assert!(res.deployment.is_empty());
        assert_eq!(energy(&inst, &res.deployment, ObjectiveMode::CostFirst, 1000.0), 0.0);
    }

    #[test]
    fn deterministic_per_seed_and_trace_monotone() {
        let inst = two_blobs();
        let cfg = SolverConfig::new(Algorithm::Sa).with_seed(42).with_max_evaluations(3000);
        let a = solve_sa(&inst, &cfg).unwrap();
        let b = solve_sa(&inst, &cfg).unwrap();
        assert_eq!(a.deployment, b.deployment);
        assert_eq!(a.trace, b.trace);
        let trace = a.trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1].best_energy <= w[0].best_energy));
        let e = energy(&inst, &a.deployment, ObjectiveMode::CostFirst, cfg.penalty_weight);
        assert!((e - trace.last().unwrap().best_energy).abs() < 1e-6);
        assert_eq!(a.evaluations_used, 3000);
    }
}
