use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shiftfield_core::GridSpec;
use shiftfield_io::{CaseEntry, Manifest, Split, VariantEntry};

use crate::gravity::estimate_gravity;
use crate::{case_seed, make_phantom, perturb_gravity, simulate_deformation, Phantom};
use crate::{Result, SimParams};

/// Generates phantoms only, writing images and labels plus a manifest with
/// empty variant lists. Cases are processed in parallel; all randomness
/// derives from `(params.seed, case index)` so outputs are byte-stable.
pub fn generate_phantoms(
    n_cases: usize,
    grid: &GridSpec,
    params: &SimParams,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    params.validate()?;
    if n_cases == 0 {
        return Err(crate::SimError::BadParams("n_cases must be >= 1".into()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| shiftfield_io::IoError::io(out_dir, e))?;
    let splits = Split::assign(n_cases);
    let cases: Vec<CaseEntry> = (0..n_cases)
        .into_par_iter()
        .map(|j| -> Result<CaseEntry> {
            let seed = case_seed(params.seed, j);
            let phantom = make_phantom(grid, seed)?;
            let dir = out_dir.join(format!("case_{j:03}"));
            std::fs::create_dir_all(&dir)
                .map_err(|e| shiftfield_io::IoError::io(&dir, e))?;
            let image_rel = format!("case_{j:03}/image.sfv");
            let labels_rel = format!("case_{j:03}/labels.sfv");
            shiftfield_io::write_volume(out_dir.join(&image_rel), &phantom.image)?;
            shiftfield_io::write_labels(out_dir.join(&labels_rel), &phantom.labels)?;
            Ok(CaseEntry {
                id: j,
                seed,
                image: image_rel.into(),
                labels: labels_rel.into(),
                tumor_center: phantom.tumor_center,
                base_gravity: None,
                variants: Vec::new(),
                split: splits[j],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        seed: params.seed,
        grid: grid.clone(),
        sim_params: serde_json::to_value(params).expect("params serialize"),
        cases,
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Simulates `K` gravity variants and ground-truth fields for every case in
/// the manifest, writing the fields and the updated manifest.
pub fn simulate_fields(
    manifest: &Manifest,
    root: impl AsRef<Path>,
    params: &SimParams,
) -> Result<Manifest> {
    params.validate()?;
    let root = root.as_ref();
    let cases: Vec<CaseEntry> = manifest
        .cases
        .par_iter()
        .map(|case| -> Result<CaseEntry> {
            let phantom = load_phantom(manifest, case, root)?;
            let base = estimate_gravity(&phantom)?;
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed(params.seed, case.id));
            rng.set_stream(1); // phantom generation used the default stream
            let mut variants = Vec::with_capacity(params.k_variants);
            for k in 0..params.k_variants {
                let gravity = perturb_gravity(base, params.max_perturb_deg, &mut rng);
                let field = simulate_deformation(&phantom, gravity, params)?;
                let rel = format!("case_{:03}/field_{k}.sff", case.id);
                shiftfield_io::write_field(root.join(&rel), &field)?;
                variants.push(VariantEntry {
                    gravity,
                    field: rel.into(),
                });
            }
            let mut updated = case.clone();
            updated.base_gravity = Some(base);
            updated.variants = variants;
            Ok(updated)
        })
        .collect::<Result<Vec<_>>>()?;
    let updated = Manifest {
        seed: manifest.seed,
        grid: manifest.grid.clone(),
        sim_params: serde_json::to_value(params).expect("params serialize"),
        cases,
    };
    updated.save(root.join("manifest.json"))?;
    Ok(updated)
}

/// Phantom + K-variant dataset in one call.
pub fn generate_dataset(
    n_cases: usize,
    grid: &GridSpec,
    params: &SimParams,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let manifest = generate_phantoms(n_cases, grid, params, out_dir.as_ref())?;
    simulate_fields(&manifest, out_dir, params)
}

/// Loads a case's phantom back from its manifest entry.
pub fn load_phantom(manifest: &Manifest, case: &CaseEntry, root: impl AsRef<Path>) -> Result<Phantom> {
    let _ = manifest;
    let root = root.as_ref();
    Ok(Phantom {
        image: shiftfield_io::read_volume(root.join(&case.image))?,
        labels: shiftfield_io::read_labels(root.join(&case.labels))?,
        tumor_center: case.tumor_center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::check_phantom;

    fn tmp_dir(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("shiftfield-simgen-tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn dataset_counts_match_manifest() {
        let grid = GridSpec::isotropic([32, 32, 32]).unwrap();
        let params = SimParams {
            k_variants: 3,
            seed: 5,
            ..SimParams::default()
        };
        let dir = tmp_dir("counts");
        let manifest = generate_dataset(2, &grid, &params, &dir).unwrap();
        assert_eq!(manifest.cases.len(), 2);
        let fields: usize = manifest.cases.iter().map(|c| c.variants.len()).sum();
        assert_eq!(fields, 6);
        // every artifact loads back and passes its invariants
        let loaded = Manifest::load(dir.join("manifest.json")).unwrap();
        for case in &loaded.cases {
            let phantom = load_phantom(&loaded, case, &dir).unwrap();
            check_phantom(&phantom).unwrap();
            for variant in &case.variants {
                let f = shiftfield_io::read_field(dir.join(&variant.field)).unwrap();
                assert_eq!(f.grid(), &grid);
            }
        }
    }

    #[test]
    fn identical_seeds_produce_identical_bytes() {
        let grid = GridSpec::isotropic([32, 32, 32]).unwrap();
        let params = SimParams {
            k_variants: 2,
            seed: 9,
            ..SimParams::default()
        };
        let dir_a = tmp_dir("bytes_a");
        let dir_b = tmp_dir("bytes_b");
        generate_dataset(2, &grid, &params, &dir_a).unwrap();
        generate_dataset(2, &grid, &params, &dir_b).unwrap();
        for rel in [
            "manifest.json",
            "case_000/image.sfv",
            "case_000/labels.sfv",
            "case_000/field_0.sff",
            "case_001/field_1.sff",
        ] {
            let a = std::fs::read(dir_a.join(rel)).unwrap();
            let b = std::fs::read(dir_b.join(rel)).unwrap();
            assert_eq!(a, b, "{rel} differs between runs");
        }
    }
}
