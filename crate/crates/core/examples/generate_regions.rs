//! Generate a parent grid, cut sub-regions out of it and round-trip one through disk.

use bss::data_io::{
    generate_instance, load_instance_dir, sample_regions, save_instance_dir, GeneratorConfig, ParamsDocument,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GeneratorConfig::for_area(600, 400, 11);
    let parent = generate_instance(&config)?;
    println!(
        "parent {}x{}: {} populated cells, {} weak, {} existing stations",
        parent.width(),
        parent.height(),
        parent.cells().len(),
        parent.weak_cells().count(),
        parent.existing_stations().len()
    );

    for (spec, region) in sample_regions(&parent, 4, 100, 100, 3)? {
        println!(
            "region at ({}, {}): {} weak cells, weak traffic {:.1}",
            spec.origin.x,
            spec.origin.y,
            region.weak_cells().count(),
            region.total_weak_traffic()
        );
    }

    let dir = std::env::temp_dir().join("bss-generate-regions");
    save_instance_dir(&parent, &dir, Some(&ParamsDocument::from_generator(&config)))?;
    let back = load_instance_dir(&dir)?;
    println!("saved to {} and reloaded identically: {}", dir.display(), back == parent);
    Ok(())
}
