//! Layer-wise index maps into flat parameter vectors.
//!
//! Group actions and zero-pattern manifolds are stated in terms of
//! `(W^(l), b^(l))`. A two-layer network is viewed as a depth-2 network with
//! widths `(d, m, 1)`, no biases, `W^(1)` rows `w_i` and `W^(2) = aᵀ`.

use super::{Mlp, TwoLayer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkLayout {
    widths: Vec<usize>,
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Interleaved,
    Dense { offsets: Vec<usize> },
}

impl NetworkLayout {
    pub fn two_layer(net: &TwoLayer) -> Self {
        NetworkLayout {
            widths: vec![net.d, net.m, 1],
            kind: Kind::Interleaved,
        }
    }

    pub fn mlp(net: &Mlp) -> Self {
        NetworkLayout {
            widths: net.widths.clone(),
            kind: Kind::Dense {
                offsets: (1..=net.depth()).map(|l| net.layer_offset(l)).collect(),
            },
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// `L`, the number of weight layers.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn width(&self, l: usize) -> usize {
        self.widths[l]
    }

    pub fn has_bias(&self) -> bool {
        matches!(self.kind, Kind::Dense { .. })
    }

    pub fn n_params(&self) -> usize {
        match &self.kind {
            Kind::Interleaved => self.widths[1] * (self.widths[0] + 1),
            Kind::Dense { .. } => self.widths.windows(2).map(|p| p[1] * (p[0] + 1)).sum(),
        }
    }

    /// Flat index of `W^(l)_{ij}`; `l` is 1-based, `i`, `j` are 0-based.
    pub fn weight_index(&self, l: usize, i: usize, j: usize) -> usize {
        debug_assert!(l >= 1 && l <= self.depth());
        debug_assert!(i < self.widths[l] && j < self.widths[l - 1]);
        match &self.kind {
            Kind::Interleaved => {
                let block = self.widths[0] + 1;
                if l == 1 {
                    i * block + 1 + j
                } else {
                    j * block
                }
            }
            Kind::Dense { offsets } => offsets[l - 1] + i * self.widths[l - 1] + j,
        }
    }

    pub fn bias_index(&self, l: usize, i: usize) -> Option<usize> {
        match &self.kind {
            Kind::Interleaved => None,
            Kind::Dense { offsets } => {
                Some(offsets[l - 1] + self.widths[l] * self.widths[l - 1] + i)
            }
        }
    }

    /// All flat indices of row `i` of `W^(l)` followed by `b^(l)_i` if present.
    pub fn row_indices(&self, l: usize, i: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.widths[l - 1])
            .map(|j| self.weight_index(l, i, j))
            .collect();
        idx.extend(self.bias_index(l, i));
        idx
    }
}
