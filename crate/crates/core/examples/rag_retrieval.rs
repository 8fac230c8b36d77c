//! Index the bundled knowledge base, retrieve for the siting task and show that
//! the gated script only succeeds when retrieval is switched on.

use bss::agent::{run_laba, sample_knowledge_base, summarize_problem, AgentOptions, RagContext, ScriptedProposer};
use bss::data_io::standard_region;
use bss::rag::{augment_prompt, HashEmbedder, VectorStore, DEFAULT_DIMENSION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = VectorStore::with_documents(Box::new(HashEmbedder::new(DEFAULT_DIMENSION)), sample_knowledge_base())?;
    let instance = standard_region()?;
    let query = summarize_problem(&instance).task;

    let hits = store.retrieve(&query, 3)?;
    for hit in &hits {
        println!("{:.4} {}", hit.score, hit.document.id);
    }
    println!("\n{}\n", augment_prompt(&query, &hits));

    let plain = run_laba(&instance, &mut ScriptedProposer::rag_gated(), &AgentOptions::with_cap(3))?;
    let options = AgentOptions::with_cap(3).with_rag(RagContext::new(&store, 3));
    let gated = run_laba(&instance, &mut ScriptedProposer::rag_gated(), &options)?;
    println!("without retrieval: success {}", plain.success);
    println!("with retrieval:    success {} in {} iteration(s)", gated.success, gated.iterations_used);
    Ok(())
}
