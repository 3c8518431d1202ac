use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use super::codebook::{max_layer, CodebookNode};
use crate::error::{Error, Result};

/// Complex antenna weight vector.
pub type BeamVector = DVector<Complex64>;

/// Half-wavelength ULA response `a(psi, N)`: entry `n` is
/// `exp(j*pi*n*sin(psi)) / sqrt(N)`.
pub fn steering_vector(psi: f64, n: usize) -> Result<BeamVector> {
    if n == 0 {
        return Err(Error::ZeroAntennas);
    }
    Ok(steering_unchecked(psi, n))
}

pub(crate) fn steering_unchecked(psi: f64, n: usize) -> BeamVector {
    let scale = 1.0 / (n as f64).sqrt();
    let step = PI * psi.sin();
    DVector::from_iterator(n, (0..n).map(|k| Complex64::from_polar(scale, step * k as f64)))
}

/// Codebook beam `w(psi, l)`: the first `min(2^l, N_T)` elements carry
/// `a(psi, N(l))`, the rest are switched off.
pub fn beam_vector(node: CodebookNode, n_t: usize) -> Result<BeamVector> {
    if n_t == 0 {
        return Err(Error::ZeroAntennas);
    }
    let lm = max_layer(n_t);
    if node.layer() > lm {
        return Err(Error::InvalidNode(format!(
            "layer {} exceeds maximum layer {lm} for {n_t} antennas",
            node.layer()
        )));
    }
    let active = active_elements(node.layer(), n_t);
    let head = steering_unchecked(node.psi(), active);
    let mut w = DVector::zeros(n_t);
    w.rows_mut(0, active).copy_from(&head);
    Ok(w)
}

/// `N(l) = min(2^l, N_T)`.
pub fn active_elements(layer: u32, n_t: usize) -> usize {
    1usize.checked_shl(layer).map_or(n_t, |n| n.min(n_t))
}
