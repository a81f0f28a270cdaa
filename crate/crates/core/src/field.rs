use crate::volume::trilinear_setup;
use crate::{FieldError, GridSpec, Result};

/// Dense displacement field: one world-axis-aligned 3-vector (mm) per voxel.
///
/// The deformation it represents is `x ↦ x + φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    grid: GridSpec,
    vectors: Vec<[f64; 3]>,
}

impl DisplacementField {
    pub fn new(grid: GridSpec, vectors: Vec<[f64; 3]>) -> Result<Self> {
        if vectors.len() != grid.voxel_count() {
            return Err(FieldError::DataLength {
                got: vectors.len(),
                want: grid.voxel_count(),
            });
        }
        if let Some(pos) = vectors.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(FieldError::NonFinite(format!(
                "field voxel {pos} is {:?}",
                vectors[pos]
            )));
        }
        Ok(Self { grid, vectors })
    }

    /// All-zero field.
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.voxel_count();
        Self {
            grid,
            vectors: vec![[0.0; 3]; n],
        }
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, vectors: Vec<[f64; 3]>) -> Self {
        debug_assert_eq!(vectors.len(), grid.voxel_count());
        Self { grid, vectors }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.vectors
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.vectors[self.grid.linear(i, j, k)]
    }

    /// Trilinear interpolation at a world point; the zero vector outside the
    /// grid.
    pub fn sample_world(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(FieldError::NonFinite(format!("sample point {p:?}")));
        }
        Ok(self.sample_index(self.grid.world_to_index(p)))
    }

    /// Trilinear interpolation in continuous index coordinates.
    pub fn sample_index(&self, u: [f64; 3]) -> [f64; 3] {
        match trilinear_setup(&self.grid, u) {
            None => [0.0; 3],
            Some(cell) => {
                let mut acc = [0.0; 3];
                for (idx, w) in cell.corners() {
                    let v = self.vectors[idx];
                    acc[0] += w * v[0];
                    acc[1] += w * v[1];
                    acc[2] += w * v[2];
                }
                acc
            }
        }
    }

    /// Pointwise scaling by `gamma`, preserving the grid.
    pub fn scaled(&self, gamma: f64) -> DisplacementField {
        let vectors = self
            .vectors
            .iter()
            .map(|v| [gamma * v[0], gamma * v[1], gamma * v[2]])
            .collect();
        Self {
            grid: self.grid.clone(),
            vectors,
        }
    }

    /// Largest Euclidean vector norm over the field.
    pub fn max_norm(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_checked() {
        let g = GridSpec::isotropic([2, 2, 2]).unwrap();
        assert!(DisplacementField::new(g.clone(), vec![[0.0; 3]; 3]).is_err());
        assert!(DisplacementField::new(g, vec![[0.0; 3]; 8]).is_ok());
    }

    #[test]
    fn affine_fields_sample_exactly() {
        // Trilinear interpolation reproduces affine functions inside a cell.
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let affine = |p: [f64; 3]| -> [f64; 3] {
            [
                0.5 * p[0] - 0.25 * p[1],
                p[2] + 1.0,
                -0.125 * p[0] + 0.75 * p[2],
            ]
        };
        let mut vectors = vec![[0.0; 3]; g.voxel_count()];
        for idx in 0..g.voxel_count() {
            let [i, j, k] = g.unravel(idx);
            vectors[idx] = affine(g.world(i, j, k));
        }
        let f = DisplacementField::new(g, vectors).unwrap();
        let p = [1.25, 2.5, 0.75];
        let got = f.sample_world(p).unwrap();
        let want = affine(p);
        for a in 0..3 {
            assert!((got[a] - want[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_halves_exactly() {
        let g = GridSpec::isotropic([2, 2, 2]).unwrap();
        let f = DisplacementField::new(g, vec![[3.0, -1.5, 0.7]; 8]).unwrap();
        let h = f.scaled(0.5);
        for v in h.vectors() {
            assert_eq!(*v, [1.5, -0.75, 0.35]);
        }
    }
}
