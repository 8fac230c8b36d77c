//! Run greedy, annealing and both swarm objectives on the standard 100x100 region.

use bss::data_io::standard_region;
use bss::solvers::{solve, Algorithm, ObjectiveMode, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = standard_region()?;
    println!(
        "{} weak cells, weak traffic {:.1}, {} existing stations",
        instance.weak_cells().count(),
        instance.total_weak_traffic(),
        instance.existing_stations().len()
    );
    let runs = [
        ("greedy", SolverConfig::new(Algorithm::Greedy)),
        ("sa", SolverConfig::new(Algorithm::Sa)),
        ("pso", SolverConfig::new(Algorithm::Pso)),
        ("pso coverage-first", SolverConfig::new(Algorithm::Pso).with_objective(ObjectiveMode::CoverageFirst)),
    ];
    println!("{:<20} {:>9} {:>6} {:>9} {:>8}", "solver", "coverage", "cost", "feasible", "evals");
    for (label, config) in runs {
        let res = solve(&instance, &config.with_seed(1))?;
        println!(
            "{:<20} {:>9.4} {:>6} {:>9} {:>8}",
            label, res.report.coverage_ratio, res.report.cost, res.report.feasible, res.evaluations_used
        );
    }
    Ok(())
}
