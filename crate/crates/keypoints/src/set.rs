use shiftfield_core::GridSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeypointError {
    #[error("points and displacements differ in length: {points} vs {displacements}")]
    LengthMismatch { points: usize, displacements: usize },

    #[error("keypoint {index} at {point:?} lies outside the grid")]
    OutOfGrid { index: usize, point: [f64; 3] },

    #[error("keypoints {a} and {b} coincide")]
    DuplicatePoint { a: usize, b: usize },

    #[error("no keypoint candidates to sample from")]
    NoCandidates,

    #[error(transparent)]
    Field(#[from] shiftfield_core::FieldError),
}

/// Matched keypoints: preoperative locations `x_i` (mm) with displacement
/// vectors `d_i` (mm) looked up from a dense field. The intraoperative
/// targets `y_i = x_i + d_i` are derived, not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    points: Vec<[f64; 3]>,
    displacements: Vec<[f64; 3]>,
    grid: GridSpec,
}

impl KeypointSet {
    pub fn new(
        points: Vec<[f64; 3]>,
        displacements: Vec<[f64; 3]>,
        grid: GridSpec,
    ) -> Result<Self, KeypointError> {
        if points.len() != displacements.len() {
            return Err(KeypointError::LengthMismatch {
                points: points.len(),
                displacements: displacements.len(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if !grid.world_in_bounds(*p) {
                return Err(KeypointError::OutOfGrid {
                    index: i,
                    point: *p,
                });
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(KeypointError::DuplicatePoint { a: i, b: j });
                }
            }
        }
        Ok(Self {
            points,
            displacements,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn displacements(&self) -> &[[f64; 3]] {
        &self.displacements
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Intraoperative targets `y_i = x_i + d_i`.
    pub fn targets(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .zip(&self.displacements)
            .map(|(x, d)| [x[0] + d[0], x[1] + d[1], x[2] + d[2]])
            .collect()
    }
}
