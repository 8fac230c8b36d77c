//! Single-proposer feedback loop: the budget-doubling script starts with a tiny
//! annealing budget and doubles it after each coverage shortfall.

use bss::agent::{run_laba, AgentOptions, Event, ScriptedProposer};
use bss::data_io::standard_region;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = standard_region()?;
    let mut proposer = ScriptedProposer::budget_doubling();
    let result = run_laba(&instance, &mut proposer, &AgentOptions::with_cap(10))?;

    for entry in &result.transcript {
        if let Event::Execution { plan, .. } = &entry.event {
            println!("iteration {}: {} with budget {:?}", entry.iteration, plan.algorithm, plan.max_evaluations());
        }
        if let Event::Test { passed, report, .. } = &entry.event {
            println!("  coverage {:.4}, cost {}, passed {passed}", report.coverage_ratio, report.cost);
        }
    }
    println!("success {} after {} iteration(s)", result.success, result.iterations_used);
    Ok(())
}
