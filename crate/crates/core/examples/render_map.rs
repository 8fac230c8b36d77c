//! Solve the standard region and draw it as SVG and PPM.
//!
//! Usage: `cargo run --example render_map [OUT_DIR]`

use std::path::PathBuf;

use bss::data_io::standard_region;
use bss::render::{render_ppm, render_svg};
use bss::solvers::{solve, Algorithm, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;
    let instance = standard_region()?;
    let res = solve(&instance, &SolverConfig::new(Algorithm::Sa).with_seed(3))?;

    let svg = out.join("standard-region.svg");
    let ppm = out.join("standard-region.ppm");
    std::fs::write(&svg, render_svg(&instance, Some(&res.deployment), 6))?;
    std::fs::write(&ppm, render_ppm(&instance, Some(&res.deployment), 6))?;
    println!("{} stations drawn to {} and {}", res.deployment.len(), svg.display(), ppm.display());
    Ok(())
}
