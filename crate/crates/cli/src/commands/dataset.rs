use std::path::Path;

use shiftfield_io::Manifest;
use shiftfield_simgen::{generate_phantoms, simulate_fields};

use crate::commands::{configure_jobs, open_dataset};
use crate::{Config, Result};

/// `phantom`: generates the synthetic cases and the initial manifest.
pub fn phantom(config: &Config, out_dir: &Path, dump_slices: bool) -> Result<Manifest> {
    configure_jobs(config.jobs);
    let grid = config.grid()?;
    let manifest = generate_phantoms(config.n_cases, &grid, &config.sim, out_dir)?;
    if dump_slices {
        let slices = out_dir.join("slices");
        std::fs::create_dir_all(&slices).map_err(|e| crate::CliError::fs(&slices, e))?;
        for case in &manifest.cases {
            let img = shiftfield_io::read_volume(out_dir.join(&case.image))?;
            crate::pgm::dump_mid_slice(&img, &slices.join(format!("case_{:03}.pgm", case.id)))?;
        }
    }
    config.echo(out_dir, "phantom")?;
    println!(
        "phantom: wrote {} cases at {:?} to {}",
        manifest.cases.len(),
        config.dims,
        out_dir.display()
    );
    Ok(manifest)
}

/// `simulate`: adds gravity variants and certified ground-truth fields to an
/// existing manifest.
pub fn simulate(config: &Config, manifest_path: &Path) -> Result<Manifest> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    let updated = simulate_fields(&manifest, &root, &config.sim)?;
    config.echo(&root, "simulate")?;
    let fields: usize = updated.cases.iter().map(|c| c.variants.len()).sum();
    println!(
        "simulate: wrote {fields} ground-truth fields ({} variants per case)",
        config.sim.k_variants
    );
    Ok(updated)
}
