use crate::{FieldError, GridSpec, Result};

/// Tissue code book shared by every label volume in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum TissueLabel {
    Background = 0,
    Skull = 1,
    Csf = 2,
    Parenchyma = 3,
    Edema = 4,
    TumorCore = 5,
}

impl TissueLabel {
    pub const ALL: [TissueLabel; 6] = [
        TissueLabel::Background,
        TissueLabel::Skull,
        TissueLabel::Csf,
        TissueLabel::Parenchyma,
        TissueLabel::Edema,
        TissueLabel::TumorCore,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for TissueLabel {
    type Error = FieldError;

    fn try_from(code: u8) -> Result<Self> {
        TissueLabel::ALL
            .get(code as usize)
            .copied()
            .ok_or(FieldError::InvalidLabel(code))
    }
}

/// Small set of tissue codes, used to select voxels by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSet(u8);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);
    /// Background and skull: the voxels whose displacements are forced to
    /// zero in every interpolated field.
    pub const RIGID: LabelSet = LabelSet(0b00_0011);
    /// All intracranial tissue: CSF, parenchyma, edema and tumor core.
    pub const BRAIN: LabelSet = LabelSet(0b11_1100);
    /// Non-tumorous brain: CSF, parenchyma and edema.
    pub const HEALTHY: LabelSet = LabelSet(0b01_1100);
    /// Edema only.
    pub const EDEMA: LabelSet = LabelSet(0b01_0000);

    pub fn of(labels: &[TissueLabel]) -> LabelSet {
        let mut bits = 0u8;
        for l in labels {
            bits |= 1 << l.code();
        }
        LabelSet(bits)
    }

    #[inline]
    pub fn contains_code(self, code: u8) -> bool {
        code < 6 && (self.0 >> code) & 1 == 1
    }

    #[inline]
    pub fn contains(self, label: TissueLabel) -> bool {
        self.contains_code(label.code())
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Per-voxel tissue codes on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    grid: GridSpec,
    labels: Vec<u8>,
}

impl LabelVolume {
    pub fn new(grid: GridSpec, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != grid.voxel_count() {
            return Err(FieldError::DataLength {
                got: labels.len(),
                want: grid.voxel_count(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&c| c > 5) {
            return Err(FieldError::InvalidLabel(bad));
        }
        Ok(Self { grid, labels })
    }

    pub fn filled(grid: GridSpec, label: TissueLabel) -> Self {
        let n = grid.voxel_count();
        Self {
            grid,
            labels: vec![label.code(); n],
        }
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, labels: Vec<u8>) -> Self {
        debug_assert_eq!(labels.len(), grid.voxel_count());
        Self { grid, labels }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.labels[self.grid.linear(i, j, k)]
    }

    /// Boolean mask of voxels whose label is in `set`.
    pub fn mask(&self, set: LabelSet) -> Vec<bool> {
        self.labels.iter().map(|&c| set.contains_code(c)).collect()
    }

    /// Number of voxels whose label is in `set`.
    pub fn count(&self, set: LabelSet) -> usize {
        self.labels.iter().filter(|&&c| set.contains_code(c)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_codes_outside_book() {
        let g = GridSpec::isotropic([2, 2, 2]).unwrap();
        let mut labels = vec![0u8; 8];
        labels[5] = 6;
        assert!(LabelVolume::new(g, labels).is_err());
    }

    #[test]
    fn label_sets() {
        assert!(LabelSet::RIGID.contains(TissueLabel::Background));
        assert!(LabelSet::RIGID.contains(TissueLabel::Skull));
        assert!(!LabelSet::RIGID.contains(TissueLabel::Csf));
        assert!(LabelSet::BRAIN.contains(TissueLabel::TumorCore));
        assert!(!LabelSet::HEALTHY.contains(TissueLabel::TumorCore));
        assert!(LabelSet::HEALTHY.contains(TissueLabel::Edema));
        let s = LabelSet::of(&[TissueLabel::Skull, TissueLabel::Edema]);
        assert!(s.contains_code(1) && s.contains_code(4) && !s.contains_code(0));
    }

    #[test]
    fn mask_and_count_agree() {
        let g = GridSpec::isotropic([2, 2, 2]).unwrap();
        let labels = vec![0, 1, 2, 3, 4, 5, 3, 3];
        let lv = LabelVolume::new(g, labels).unwrap();
        let m = lv.mask(LabelSet::BRAIN);
        assert_eq!(m.iter().filter(|&&b| b).count(), lv.count(LabelSet::BRAIN));
        assert_eq!(lv.count(LabelSet::BRAIN), 6);
    }
}
