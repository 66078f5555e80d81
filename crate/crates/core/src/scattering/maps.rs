//! Free-parameter maps between group blocks, their parameter vectors, and the full surface.

use nalgebra::DMatrix;

use crate::config::RisArchitecture;
use crate::linalg::{CMat, CVec};

/// Duplication map `K_g` of one group, kept implicit.
///
/// Non-reciprocal groups use every entry (column-major). Reciprocal groups keep the
/// diagonal and strictly-lower entries, column by column, and mirror the lower part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupMap {
    pub group_size: usize,
    pub reciprocal: bool,
}

impl GroupMap {
    pub fn free_len(&self) -> usize {
        let m = self.group_size;
        if self.reciprocal {
            m * (m + 1) / 2
        } else {
            m * m
        }
    }

    /// `(row, col)` of each free parameter in the block.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let m = self.group_size;
        let mut out = Vec::with_capacity(self.free_len());
        for c in 0..m {
            let start = if self.reciprocal { c } else { 0 };
            for r in start..m {
                out.push((r, c));
            }
        }
        out
    }

    /// Block from free parameters (`vec⁻¹(K_g φ_g)`).
    pub fn expand(&self, free: &CVec) -> CMat {
        let m = self.group_size;
        let mut out = CMat::zeros(m, m);
        for (v, (r, c)) in free.iter().zip(self.positions()) {
            out[(r, c)] = *v;
            if self.reciprocal {
                out[(c, r)] = *v;
            }
        }
        out
    }

    /// Free parameters of a block respecting the symmetry class.
    pub fn extract(&self, block: &CMat) -> CVec {
        let pos = self.positions();
        CVec::from_iterator(pos.len(), pos.iter().map(|&(r, c)| block[(r, c)]))
    }

    /// `K_gᴴ vec(X)`: mirrored entries are summed.
    pub fn adjoint(&self, x: &CMat) -> CVec {
        let pos = self.positions();
        CVec::from_iterator(
            pos.len(),
            pos.iter().map(|&(r, c)| {
                if self.reciprocal && r != c {
                    x[(r, c)] + x[(c, r)]
                } else {
                    x[(r, c)]
                }
            }),
        )
    }

    /// Diagonal of `K_gᴴ K_g` (1 for unique entries, 2 for mirrored pairs).
    pub fn gram_diag(&self) -> Vec<f64> {
        self.positions()
            .iter()
            .map(|&(r, c)| if self.reciprocal && r != c { 2.0 } else { 1.0 })
            .collect()
    }

    /// Explicit `M_g² × L` 0/1 matrix.
    pub fn duplication_matrix(&self) -> DMatrix<f64> {
        let m = self.group_size;
        let mut k = DMatrix::zeros(m * m, self.free_len());
        for (j, (r, c)) in self.positions().into_iter().enumerate() {
            k[(r + c * m, j)] = 1.0;
            if self.reciprocal {
                k[(c + r * m, j)] = 1.0;
            }
        }
        k
    }
}

/// Maps for every group of an architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureMaps {
    pub elements: usize,
    pub groups: usize,
    pub group: GroupMap,
}

pub fn build_maps(arch: &RisArchitecture) -> ArchitectureMaps {
    ArchitectureMaps {
        elements: arch.elements,
        groups: arch.groups(),
        group: GroupMap {
            group_size: arch.group_size,
            reciprocal: arch.is_reciprocal(),
        },
    }
}

impl ArchitectureMaps {
    pub fn group_size(&self) -> usize {
        self.group.group_size
    }

    pub fn offset(&self, g: usize) -> usize {
        g * self.group.group_size
    }

    /// Explicit `M² × M_g²` placement matrix `R_g`.
    pub fn placement_matrix(&self, g: usize) -> DMatrix<f64> {
        let (m, mg, o) = (self.elements, self.group.group_size, self.offset(g));
        let mut r = DMatrix::zeros(m * m, mg * mg);
        for c in 0..mg {
            for a in 0..mg {
                r[((o + a) + (o + c) * m, a + c * mg)] = 1.0;
            }
        }
        r
    }

    pub fn duplication_matrix(&self, _g: usize) -> DMatrix<f64> {
        self.group.duplication_matrix()
    }

    /// Block `g` of a full `M × M` matrix.
    pub fn block(&self, x: &CMat, g: usize) -> CMat {
        let (mg, o) = (self.group.group_size, self.offset(g));
        x.view((o, o), (mg, mg)).into_owned()
    }

    /// Splits a block-diagonal matrix into its groups.
    pub fn split(&self, x: &CMat) -> Vec<CMat> {
        (0..self.groups).map(|g| self.block(x, g)).collect()
    }
}
