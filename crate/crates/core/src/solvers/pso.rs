use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::space::SearchSpace;
use super::{energy_from_parts, SolveError, SolveResult, SolverConfig, TracePoint};
use crate::coverage::check_constraints;
use crate::model::{Deployment, ProblemInstance, StationKind};

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

struct Particle {
    rng: ChaCha8Rng,
    /// Two bits per site: `2s` macro, `2s + 1` micro.
    position: Vec<bool>,
    velocity: Vec<f64>,
    best_position: Vec<bool>,
    best_fitness: f64,
    fitness: f64,
    coverage: f64,
    blocked: Vec<u32>,
    counts: Vec<u32>,
}

struct Evaluation {
    fitness: f64,
    coverage: f64,
}

/// Decodes a bit vector into stations, repairing it in place.
///
/// A site with both bits set keeps the macro. Conflicting stations are
/// resolved by keeping stations in descending order of the weak traffic they
/// cover alone, so of any violating pair the one covering less is dropped.
fn decode(space: &SearchSpace<'_>, bits: &mut [bool], blocked: &mut [u32]) -> Vec<(usize, StationKind)> {
    let mut selected = Vec::new();
    for site in 0..space.len() {
        if bits[2 * site] {
            bits[2 * site + 1] = false;
            selected.push((site, StationKind::Macro));
        } else if bits[2 * site + 1] {
            selected.push((site, StationKind::Micro));
        }
    }
    let slot = |k: StationKind| super::space::kind_slot(k);
    selected.sort_by(|a, b| {
        space.solo_traffic[b.0][slot(b.1)]
            .total_cmp(&space.solo_traffic[a.0][slot(a.1)])
            .then(a.0.cmp(&b.0))
    });
    let mut kept = Vec::with_capacity(selected.len());
    for (site, kind) in selected {
        if blocked[site] == 0 {
            for &n in &space.conflicts[site] {
                blocked[n as usize] += 1;
            }
            kept.push((site, kind));
        } else {
            bits[2 * site] = false;
            bits[2 * site + 1] = false;
        }
    }
    for &(site, _) in &kept {
        for &n in &space.conflicts[site] {
            blocked[n as usize] -= 1;
        }
    }
    kept.sort_unstable_by_key(|&(s, _)| s);
    kept
}

fn evaluate(space: &SearchSpace<'_>, config: &SolverConfig, p: &mut Particle) -> Evaluation {
    let kept = decode(space, &mut p.position, &mut p.blocked);
    let mut cost = 0.0;
    for &(site, kind) in &kept {
        cost += space.cost(kind);
        for &c in space.cells(site, kind) {
            p.counts[c as usize] += 1;
        }
    }
    let covered = space.exact_covered(&p.counts);
    for &(site, kind) in &kept {
        for &c in space.cells(site, kind) {
            p.counts[c as usize] -= 1;
        }
    }
    let fitness = energy_from_parts(
        config.objective_mode,
        config.penalty_weight,
        space.instance.params().theta_cp,
        cost,
        covered,
        space.total_weak,
        0.0,
    );
    Evaluation { fitness, coverage: space.ratio(covered) }
}

/// Binary particle-swarm optimization over macro/micro bits per candidate site.
///
/// Velocities follow `v ← w·v + c1·r1·(pbest − x) + c2·r2·(gbest − x)`,
/// clamped to `±v_max`; each bit is then set with probability `sigmoid(v)`.
/// Each particle draws from its own stream of the seeded generator and the
/// swarm is updated synchronously, so parallel evaluation stays deterministic.
pub fn solve_pso(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let space = SearchSpace::new(instance, &config.candidates)?;
    if space.raw_candidates == 0 && space.total_weak > 0.0 {
        return Err(SolveError::NoCandidates);
    }
    let finish = |deployment: Deployment, evaluations: usize, trace: Vec<TracePoint>| {
        let report = check_constraints(instance, &deployment);
        SolveResult {
            deployment,
            report,
            evaluations_used: evaluations,
            wall_time: start.elapsed(),
            trace: Some(trace),
        }
    };
    if space.total_weak <= 0.0 || space.len() == 0 {
        return Ok(finish(Deployment::empty(), 0, Vec::new()));
    }

    let pso = config.pso;
    let dim = 2 * space.len();
    let mut swarm: Vec<Particle> = (0..pso.swarm_size)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            let velocity: Vec<f64> = (0..dim).map(|_| rng.gen_range(-pso.v_max..=pso.v_max)).collect();
            let position: Vec<bool> = velocity.iter().map(|&v| rng.gen::<f64>() < sigmoid(v)).collect();
            Particle {
                rng,
                best_position: position.clone(),
                position,
                velocity,
                best_fitness: f64::INFINITY,
                fitness: f64::INFINITY,
                coverage: 0.0,
                blocked: vec![0; space.len()],
                counts: vec![0; space.weak_sites.len()],
            }
        })
        .collect();

    let mut global_best: Vec<bool> = vec![false; dim];
    let mut global_fitness = f64::INFINITY;
    let mut global_coverage = 0.0;
    let mut evaluations = 0usize;
    let mut trace = Vec::new();
    let mut iteration = 0usize;

    while evaluations < config.max_evaluations {
        let active = pso.swarm_size.min(config.max_evaluations - evaluations);
        let gbest = &global_best;
        let first = iteration == 0;
        swarm[..active].par_iter_mut().for_each(|p| {
            if !first {
                for d in 0..dim {
                    let x = f64::from(u8::from(p.position[d]));
                    let pb = f64::from(u8::from(p.best_position[d]));
                    let gb = f64::from(u8::from(gbest[d]));
                    let r1: f64 = p.rng.gen();
                    let r2: f64 = p.rng.gen();
                    let v = pso.inertia * p.velocity[d] + pso.c1 * r1 * (pb - x) + pso.c2 * r2 * (gb - x);
                    p.velocity[d] = v.clamp(-pso.v_max, pso.v_max);
                    p.position[d] = p.rng.gen::<f64>() < sigmoid(p.velocity[d]);
                }
            }
            let eval = evaluate(&space, config, p);
            p.fitness = eval.fitness;
            p.coverage = eval.coverage;
        });
        evaluations += active;
        for p in &mut swarm[..active] {
            if p.fitness < p.best_fitness {
                p.best_fitness = p.fitness;
                p.best_position.clone_from(&p.position);
            }
            if p.fitness < global_fitness {
                global_fitness = p.fitness;
                global_coverage = p.coverage;
                global_best.clone_from(&p.position);
            }
        }
        trace.push(TracePoint { iteration, best_energy: global_fitness, coverage_ratio: global_coverage });
        iteration += 1;
    }

    let stations = (0..space.len())
        .filter_map(|s| {
            if global_best[2 * s] {
                Some(space.station(s, StationKind::Macro))
            } else if global_best[2 * s + 1] {
                Some(space.station(s, StationKind::Micro))
            } else {
                None
            }
        })
        .collect();
    Ok(finish(Deployment::new(stations), evaluations, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::ViolationKind;
    use crate::model::{CandidateFilter, GridCell, RadioParams, Site};
    use crate::solvers::{Algorithm, ObjectiveMode};

    fn blob(cx: i64, cy: i64, r: i64, t: f64) -> Vec<GridCell> {
        let mut out = Vec::new();
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if Site::new(x, y).within(Site::new(cx, cy), r as f64) {
                    out.push(GridCell::new(x, y, t, true));
                }
            }
        }
        out
    }

    #[test]
    fn zero_weak_traffic_is_empty() {
        let inst = ProblemInstance::new(10, 10, vec![], vec![], RadioParams::default()).unwrap();
        let res = solve_pso(&inst, &SolverConfig::new(Algorithm::Pso)).unwrap();
        assert!(res.deployment.is_empty());
        assert!(res.report.feasible);
    }

    #[test]
    fn no_candidates_with_weak_traffic_is_an_error() {
        let inst = ProblemInstance::new(10, 10, blob(5, 5, 1, 1.0), vec![], RadioParams::default()).unwrap();
        let cfg = SolverConfig::new(Algorithm::Pso).with_candidates(CandidateFilter::ExplicitList(vec![]));
        assert_eq!(solve_pso(&inst, &cfg).unwrap_err(), SolveError::NoCandidates);
    }

    #[test]
    fn single_cluster_is_cheap_over_seeds() {
        let inst = ProblemInstance::new(30, 30, blob(15, 15, 2, 1.0), vec![], RadioParams::default()).unwrap();
        let cfg = SolverConfig::new(Algorithm::Pso).with_max_evaluations(2000);
        let mut best = f64::INFINITY;
        for seed in 0..10 {
            let res = solve_pso(&inst, &cfg.clone().with_seed(seed)).unwrap();
            assert!(res.report.violations.iter().all(|v| v.kind == ViolationKind::CoverageShortfall));
            if res.report.feasible {
                best = best.min(res.report.cost);
            }
        }
        assert!(best <= 2.0, "best {best}");
    }

    #[test]
    fn repair_and_determinism() {
        let mut cells = blob(10, 10, 5, 1.0);
        cells.extend(blob(28, 24, 6, 3.0));
        let inst = ProblemInstance::new(40, 40, cells, vec![Site::new(0, 39)], RadioParams::default()).unwrap();
        let cfg = SolverConfig::new(Algorithm::Pso).with_seed(5).with_max_evaluations(800);
        let a = solve_pso(&inst, &cfg).unwrap();
        let b = solve_pso(&inst, &cfg).unwrap();
        assert_eq!(a.deployment, b.deployment);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.evaluations_used, 800);
        assert!(a.report.violations.iter().all(|v| v.kind == ViolationKind::CoverageShortfall));
        let trace = a.trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1].best_energy <= w[0].best_energy));
    }

    #[test]
    fn coverage_first_covers_more_and_costs_more() {
        let mut cells = blob(10, 10, 6, 1.0);
        cells.extend(blob(30, 12, 4, 2.0));
        cells.extend(blob(22, 32, 5, 0.5));
        let inst = ProblemInstance::new(45, 45, cells, vec![], RadioParams::default()).unwrap();
        let (mut cov_c, mut cov_f, mut cost_c, mut cost_f) = (0.0, 0.0, 0.0, 0.0);
        for seed in 0..10 {
            let base = SolverConfig::new(Algorithm::Pso).with_seed(seed).with_max_evaluations(1200);
            let cf = solve_pso(&inst, &base.clone().with_objective(ObjectiveMode::CostFirst)).unwrap();
            let vf = solve_pso(&inst, &base.with_objective(ObjectiveMode::CoverageFirst)).unwrap();
            cov_c += cf.report.coverage_ratio;
            cost_c += cf.report.cost;
            cov_f += vf.report.coverage_ratio;
            cost_f += vf.report.cost;
        }
        assert!(cov_f >= cov_c, "coverage {cov_f} vs {cov_c}");
        assert!(cost_f >= cost_c, "cost {cost_f} vs {cost_c}");
    }
}
