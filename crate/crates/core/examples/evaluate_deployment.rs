//! Score hand-placed deployments on a tiny grid and print every violation.

use bss::coverage::check_constraints;
use bss::model::{Deployment, GridCell, PlacedStation, ProblemInstance, RadioParams, Site};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two weak clusters 40 cells apart and one existing tower between them.
    let mut cells = Vec::new();
    for (cx, cy, traffic) in [(10, 10, 5.0), (50, 10, 3.0)] {
        for dx in -2..=2 {
            for dy in -2..=2 {
                cells.push(GridCell::new(cx + dx, cy + dy, traffic, true));
            }
        }
    }
    let instance = ProblemInstance::new(64, 24, cells, vec![Site::new(30, 10)], RadioParams::default())?;

    let candidates = [
        ("one micro per cluster", Deployment::new(vec![PlacedStation::micro_at(10, 10), PlacedStation::micro_at(50, 10)])),
        ("one macro at the tower", Deployment::new(vec![PlacedStation::macro_at(30, 10)])),
        ("left cluster only", Deployment::new(vec![PlacedStation::micro_at(10, 10)])),
        ("crowded pair", Deployment::new(vec![PlacedStation::micro_at(10, 10), PlacedStation::micro_at(14, 10)])),
    ];
    for (label, deployment) in &candidates {
        println!("== {label}");
        print!("{}", check_constraints(&instance, deployment));
    }
    Ok(())
}
