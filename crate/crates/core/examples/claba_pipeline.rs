//! Four-role pipeline. The repair script first asks for an algorithm the
//! executor does not know, gets the error back and switches to greedy. The
//! tester adds a stricter coverage floor on top of the hard constraints.

use bss::agent::{
    run_claba, AgentOptions, ClabaRoles, ConstraintTester, EngineExecutor, Role, ScriptedProposer, TestPredicate,
};
use bss::data_io::standard_region;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = standard_region()?;
    let mut modeler = ScriptedProposer::repair();
    let mut planner = ScriptedProposer::repair();
    let mut executor = EngineExecutor;
    let mut tester = ConstraintTester::new(vec![TestPredicate::MinCoverage(0.92)]);
    let roles = ClabaRoles { modeler: &mut modeler, planner: &mut planner, executor: &mut executor, tester: &mut tester };

    let result = run_claba(&instance, roles, &AgentOptions::default())?;
    println!(
        "modeler exchanges {}, planner exchanges {}",
        result.exchanges(Role::Agent1),
        result.exchanges(Role::Agent2)
    );
    let mut jsonl = Vec::new();
    result.write_transcript(&mut jsonl)?;
    print!("{}", String::from_utf8(jsonl)?);
    println!("success {} after {} iteration(s)", result.success, result.iterations_used);
    print!("{}", result.report);
    Ok(())
}
