//! Compare every method over sampled regions of a generated grid and write the CSV report.

use bss::data_io::{generate_instance, GeneratorConfig};
use bss::experiment::{run_experiment, ExperimentConfig, Method};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parent = generate_instance(&GeneratorConfig::for_area(1000, 1000, 5))?;
    let config = ExperimentConfig {
        regions: 6,
        methods: vec![Method::Greedy, Method::Sa, Method::Pso, Method::PsoCov, Method::Laba, Method::Claba],
        max_evaluations: 4000,
        jobs: 3,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&parent, &config, None)?;
    print!("{}", report.table());

    let path = std::env::temp_dir().join("bss-experiment.csv");
    std::fs::write(&path, report.to_csv())?;
    println!("per-region rows in {}", path.display());
    Ok(())
}
