use crate::{FieldError, GridSpec, Result};

/// Scalar 3D image: one finite `f64` per voxel in the grid's linear order.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: GridSpec,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.voxel_count() {
            return Err(FieldError::DataLength {
                got: data.len(),
                want: grid.voxel_count(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(format!(
                "volume voxel {pos} is {}",
                data[pos]
            )));
        }
        Ok(Self { grid, data })
    }

    /// Constant-valued volume.
    pub fn filled(grid: GridSpec, value: f64) -> Result<Self> {
        let n = grid.voxel_count();
        Self::new(grid, vec![value; n])
    }

    /// Skips the finiteness scan; callers guarantee the data came from
    /// arithmetic on already-validated inputs.
    pub(crate) fn from_parts_unchecked(grid: GridSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.voxel_count());
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.linear(i, j, k)]
    }

    /// Trilinear interpolation at a world point; zero outside the grid.
    pub fn sample_world(&self, p: [f64; 3]) -> Result<f64> {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(FieldError::NonFinite(format!("sample point {p:?}")));
        }
        Ok(self.sample_index(self.grid.world_to_index(p)))
    }

    /// Trilinear interpolation in continuous index coordinates; zero outside
    /// `[0, dim-1]^3`.
    pub fn sample_index(&self, u: [f64; 3]) -> f64 {
        match trilinear_setup(&self.grid, u) {
            None => 0.0,
            Some(cell) => {
                let mut acc = 0.0;
                for (idx, w) in cell.corners() {
                    acc += w * self.data[idx];
                }
                acc
            }
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// One cell of a trilinear interpolation: base corner plus fractional
/// weights. Built once per sample and shared by scalar and vector sampling.
pub(crate) struct TrilinearCell {
    frac: [f64; 3],
    strides: [usize; 3],
    root: usize,
}

impl TrilinearCell {
    /// The 8 corner linear indices with their trilinear weights. Corners on
    /// the high face reuse the base index when the cell is clamped to the
    /// last voxel (frac is 0 there, so the weight vanishes).
    pub(crate) fn corners(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let [fx, fy, fz] = self.frac;
        let wx = [1.0 - fx, fx];
        let wy = [1.0 - fy, fy];
        let wz = [1.0 - fz, fz];
        (0..8).filter_map(move |c| {
            let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = wx[dx] * wy[dy] * wz[dz];
            if w == 0.0 {
                return None;
            }
            let idx = self.root + dx * self.strides[0] + dy * self.strides[1] + dz;
            Some((idx, w))
        })
    }

}

/// Locates the interpolation cell for continuous index coordinates `u`, or
/// `None` when `u` falls outside the sampled domain (including non-finite).
pub(crate) fn trilinear_setup(grid: &GridSpec, u: [f64; 3]) -> Option<TrilinearCell> {
    let dims = grid.dims();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let ua = u[a];
        if !(ua >= 0.0 && ua <= (dims[a] - 1) as f64) {
            return None; // also catches NaN
        }
        let mut b = ua.floor() as usize;
        // exact hit on the last voxel center
        if b == dims[a] - 1 {
            b -= 1;
            frac[a] = 1.0;
        } else {
            frac[a] = ua - b as f64;
        }
        base[a] = b;
    }
    // collapse exact-integer coordinates so corner weights are exactly 0/1
    for a in 0..3 {
        if frac[a] == 1.0 {
            base[a] += 1;
            frac[a] = 0.0;
        }
    }
    let strides = [dims[1] * dims[2], dims[2], 1];
    let root = (base[0] * dims[1] + base[1]) * dims[2] + base[2];
    Some(TrilinearCell { frac, strides, root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ramp_x(grid: &GridSpec) -> Volume {
        // v(x) = world x0 coordinate in mm
        let mut data = vec![0.0; grid.voxel_count()];
        let [d, w, h] = grid.dims();
        for i in 0..d {
            for j in 0..w {
                for k in 0..h {
                    data[grid.linear(i, j, k)] = grid.world(i, j, k)[0];
                }
            }
        }
        Volume::new(grid.clone(), data).unwrap()
    }

    #[test]
    fn rejects_bad_data() {
        let g = GridSpec::isotropic([2, 2, 2]).unwrap();
        assert!(Volume::new(g.clone(), vec![0.0; 7]).is_err());
        let mut d = vec![0.0; 8];
        d[3] = f64::NAN;
        assert!(Volume::new(g, d).is_err());
    }

    #[test]
    fn constant_volume_samples_constant() {
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let v = Volume::filled(g, 7.0).unwrap();
        for p in [[0.5, 0.5, 0.5], [1.25, 2.75, 0.0], [3.0, 3.0, 3.0]] {
            assert_eq!(v.sample_world(p).unwrap(), 7.0);
        }
    }

    #[test]
    fn sample_at_voxel_center_is_exact() {
        let g = GridSpec::new([4, 4, 4], [0.5, 2.0, 1.0], [-8.0, 4.0, 0.0]).unwrap();
        let v = ramp_x(&g);
        let p = g.world(2, 1, 3);
        assert_eq!(v.sample_world(p).unwrap(), v.get(2, 1, 3));
    }

    #[test]
    fn midpoint_matches_hand_computed_trilinear_weights() {
        // Ramp v(x) = x0 on a unit grid. Halfway between centers along axis 0
        // the weights are (0.5, 0.5) and the value is the mean of neighbors,
        // which equals the ramp at the midpoint.
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let v = ramp_x(&g);
        let got = v.sample_world([1.5, 2.0, 2.0]).unwrap();
        let expect = 0.5 * v.get(1, 2, 2) + 0.5 * v.get(2, 2, 2);
        assert_eq!(got, expect);
        assert_relative_eq!(got, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn out_of_bounds_samples_zero() {
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let v = Volume::filled(g, 5.0).unwrap();
        assert_eq!(v.sample_world([-0.1, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(v.sample_world([1.0, 1.0, 3.01]).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_point_errors() {
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let v = Volume::filled(g, 1.0).unwrap();
        assert!(v.sample_world([f64::NAN, 0.0, 0.0]).is_err());
        assert!(v.sample_world([f64::INFINITY, 0.0, 0.0]).is_err());
    }
}
