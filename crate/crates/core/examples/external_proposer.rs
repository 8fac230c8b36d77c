//! Drive the loop through the wire protocol: a scripted proposer is served on a
//! local TCP port and the agent talks to it as it would to any remote model.

use std::io::BufReader;
use std::net::TcpListener;
use std::time::Duration;

use bss::agent::{run_laba, serve_proposer, AgentOptions, ExternalProposer, ScriptedProposer};
use bss::data_io::standard_region;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    std::thread::spawn(move || {
        if let Ok((stream, _)) = listener.accept() {
            let reader = BufReader::new(stream.try_clone().expect("clone socket"));
            let _ = serve_proposer(&mut ScriptedProposer::budget_doubling(), reader, stream);
        }
    });

    let mut remote = ExternalProposer::connect(&format!("tcp://{addr}"), Duration::from_secs(10))?;
    let result = run_laba(&standard_region()?, &mut remote, &AgentOptions::default())?;
    println!("success {} after {} iteration(s) over tcp://{addr}", result.success, result.iterations_used);
    Ok(())
}
