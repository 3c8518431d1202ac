//! Hierarchical binary-tree codebook.
//!
//! Layer `l` splits the array's visible region into `2^l` sectors of equal
//! width in `sin(psi)`, so sector `k` spans
//! `sin(psi) in [-1 + k*2^(1-l), -1 + (k+1)*2^(1-l))` and its beam points at
//! the sector centre. Equal sine-width sectors make the two children of a
//! node symmetric around the parent in the array's phase domain, which is
//! what lets a greedy two-child comparison land on the best leaf. The angular
//! width `w(psi, l)` therefore depends on the steering angle.

use serde::{Deserialize, Serialize};

use super::array::{beam_vector, BeamVector};
use crate::error::{Error, Result};

/// `L_m = ceil(log2 N_T)`.
pub fn max_layer(n_t: usize) -> u32 {
    if n_t <= 1 {
        0
    } else {
        usize::BITS - (n_t - 1).leading_zeros()
    }
}

/// A beam of the codebook, identified by layer and sector index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodebookNode {
    layer: u32,
    index: u32,
}

impl CodebookNode {
    pub fn new(layer: u32, index: u32) -> Result<Self> {
        if layer == 0 || layer >= 32 {
            return Err(Error::InvalidNode(format!("layer {layer} outside [1, 31]")));
        }
        if index >= (1u32 << layer) {
            return Err(Error::InvalidNode(format!("index {index} outside layer {layer}")));
        }
        Ok(Self { layer, index })
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    fn sector_count(&self) -> f64 {
        (1u64 << self.layer) as f64
    }

    /// Sector bounds in the sine domain.
    pub fn sine_bounds(&self) -> (f64, f64) {
        let step = 2.0 / self.sector_count();
        let lo = -1.0 + self.index as f64 * step;
        (lo, lo + step)
    }

    /// Steering angle of the sector centre, radians in `(-pi/2, pi/2)`.
    pub fn psi(&self) -> f64 {
        let (lo, hi) = self.sine_bounds();
        (0.5 * (lo + hi)).asin()
    }

    /// Angular width of the sector, radians.
    pub fn width(&self) -> f64 {
        let (lo, hi) = self.sine_bounds();
        hi.min(1.0).asin() - lo.max(-1.0).asin()
    }

    /// Whether the steering angle falls in this sector (upper edge
    /// inclusive only for the last sector).
    pub fn contains(&self, psi: f64) -> bool {
        let s = psi.sin();
        let (lo, hi) = self.sine_bounds();
        s >= lo && (s < hi || (self.index as f64 + 1.0 == self.sector_count() && s <= hi))
    }
}

/// Codebook for an `n_t`-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codebook {
    n_t: usize,
    max_layer: u32,
}

impl Codebook {
    pub fn new(n_t: usize) -> Result<Self> {
        if n_t < 2 {
            return Err(Error::InvalidNode(format!(
                "a hierarchical codebook needs at least 2 antennas, got {n_t}"
            )));
        }
        Ok(Self {
            n_t,
            max_layer: max_layer(n_t),
        })
    }

    pub fn antennas(&self) -> usize {
        self.n_t
    }

    pub fn max_layer(&self) -> u32 {
        self.max_layer
    }

    pub fn node(&self, layer: u32, index: u32) -> Result<CodebookNode> {
        if layer > self.max_layer {
            return Err(Error::InvalidNode(format!(
                "layer {layer} exceeds maximum layer {}",
                self.max_layer
            )));
        }
        CodebookNode::new(layer, index)
    }

    pub fn is_leaf(&self, node: CodebookNode) -> bool {
        node.layer >= self.max_layer
    }

    /// The two half-sectors of `node` at the next layer, smaller steering
    /// angle first.
    pub fn children(&self, node: CodebookNode) -> Result<(CodebookNode, CodebookNode)> {
        if node.layer >= self.max_layer {
            return Err(Error::InvalidNode(format!("layer-{} node is a leaf", node.layer)));
        }
        let layer = node.layer + 1;
        Ok((
            CodebookNode {
                layer,
                index: 2 * node.index,
            },
            CodebookNode {
                layer,
                index: 2 * node.index + 1,
            },
        ))
    }

    /// Same-layer sectors on either side, if they exist.
    pub fn neighbors(&self, node: CodebookNode) -> (Option<CodebookNode>, Option<CodebookNode>) {
        let last = (1u32 << node.layer) - 1;
        let left = (node.index > 0).then(|| CodebookNode {
            layer: node.layer,
            index: node.index - 1,
        });
        let right = (node.index < last).then(|| CodebookNode {
            layer: node.layer,
            index: node.index + 1,
        });
        (left, right)
    }

    /// Sector at `layer` containing the steering angle `psi` (angles past
    /// the visible region clamp to the edge sectors).
    pub fn snap(&self, psi: f64, layer: u32) -> CodebookNode {
        let layer = layer.clamp(1, self.max_layer);
        let count = 1u32 << layer;
        let s = psi.sin().clamp(-1.0, 1.0);
        let idx = ((s + 1.0) * 0.5 * count as f64).floor();
        CodebookNode {
            layer,
            index: (idx.max(0.0) as u32).min(count - 1),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = CodebookNode> {
        let layer = self.max_layer;
        (0..(1u32 << layer)).map(move |index| CodebookNode { layer, index })
    }

    /// Every node of every layer, ordered by steering angle.
    pub fn nodes(&self) -> Vec<CodebookNode> {
        let mut all: Vec<CodebookNode> = (1..=self.max_layer)
            .flat_map(|layer| (0..(1u32 << layer)).map(move |index| CodebookNode { layer, index }))
            .collect();
        all.sort_by(|a, b| a.psi().total_cmp(&b.psi()).then(a.layer.cmp(&b.layer)));
        all
    }

    pub fn beam(&self, node: CodebookNode) -> BeamVector {
        beam_vector(node, self.n_t).expect("node validated against this codebook")
    }
}
