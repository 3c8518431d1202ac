//! Effective gains, matched combining, SINR and rate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::array::BeamVector;
use super::channel::RadioConfig;
use super::codebook::{Codebook, CodebookNode};
use crate::error::{Error, Result};

/// `h = w_r^* H w_t`.
pub fn effective_gain(w_r: &DVector<Complex64>, h: &DMatrix<Complex64>, w_t: &DVector<Complex64>) -> Result<Complex64> {
    if h.nrows() != w_r.len() || h.ncols() != w_t.len() {
        return Err(Error::Dimension(format!(
            "channel is {}x{}, combiner has {} entries, beam has {}",
            h.nrows(),
            h.ncols(),
            w_r.len(),
            w_t.len()
        )));
    }
    Ok(w_r.dotc(&(h * w_t)))
}

/// Unit vector along a receive response; the first basis vector when the
/// response vanishes.
pub fn matched_combiner(response: &DVector<Complex64>) -> BeamVector {
    let norm = response.norm();
    if norm > 0.0 && norm.is_finite() {
        response.unscale(norm)
    } else {
        let mut e = DVector::zeros(response.len().max(1));
        e[0] = Complex64::new(1.0, 0.0);
        e
    }
}

/// Matched-filter combiner `H w_t / ||H w_t||`.
pub fn bs_combiner(h: &DMatrix<Complex64>, w_t: &DVector<Complex64>) -> BeamVector {
    matched_combiner(&(h * w_t))
}

pub fn rate_from_sinr(sinr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// SINR and rate from the desired gain `h` and the per-interferer gains
/// `w_r^* H_k w_k` (summed coherently, each scaled by `sqrt(P)`).
pub fn sinr_and_rate(signal: Complex64, interferers: &[Complex64], radio: &RadioConfig) -> (f64, f64) {
    let amplitude = radio.tx_power_w.sqrt();
    let mut sum = Complex64::new(0.0, 0.0);
    for g in interferers {
        sum += g * amplitude;
    }
    let sinr = radio.tx_power_w * signal.norm_sqr() / (sum.norm_sqr() + radio.noise_power());
    (sinr, rate_from_sinr(sinr, radio.bandwidth_hz))
}

/// SINR and rate under matched combining, given the desired receive response
/// `H_i w_i` and the aggregate interfering response `sum_k H_k w_k`.
pub fn matched_sinr(own: &DVector<Complex64>, interference: &DVector<Complex64>, radio: &RadioConfig) -> (f64, f64) {
    matched_sinr_slice(own.as_slice(), interference.as_slice(), radio)
}

/// [`matched_sinr`] on raw receive responses.
pub fn matched_sinr_slice(own: &[Complex64], interference: &[Complex64], radio: &RadioConfig) -> (f64, f64) {
    let energy: f64 = own.iter().map(|c| c.norm_sqr()).sum();
    let leak = if energy > 0.0 && energy.is_finite() {
        // w_r^* I with w_r = own / ||own||
        let dot: Complex64 = own.iter().zip(interference).map(|(a, b)| a.conj() * b).sum();
        dot.unscale(energy.sqrt())
    } else {
        interference.first().copied().unwrap_or_default()
    };
    sinr_and_rate(Complex64::new(energy.sqrt(), 0.0), &[leak], radio)
}

/// Leaf maximizing `|w_r^* H w|` under matched combining, i.e. `||H w||`;
/// ties go to the smaller steering angle.
pub fn exhaustive_best_beam(h: &DMatrix<Complex64>, codebook: &Codebook) -> Result<CodebookNode> {
    if h.ncols() != codebook.antennas() {
        return Err(Error::Dimension(format!(
            "channel has {} transmit antennas, codebook {}",
            h.ncols(),
            codebook.antennas()
        )));
    }
    let mut best: Option<(CodebookNode, f64)> = None;
    for leaf in codebook.leaves() {
        let gain = (h * codebook.beam(leaf)).norm();
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((leaf, gain));
        }
    }
    best.map(|(n, _)| n).ok_or(Error::EmptyCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_gain_is_identity() {
        let h = DMatrix::from_element(1, 1, c(0.3, -1.2));
        let one = DVector::from_element(1, c(1.0, 0.0));
        assert_eq!(effective_gain(&one, &h, &one).unwrap(), c(0.3, -1.2));
    }

    #[test]
    fn zero_channel_gives_zero_gain() {
        let h = DMatrix::zeros(2, 3);
        let w_r = DVector::from_element(2, c(0.5, 0.5));
        let w_t = DVector::from_element(3, c(0.1, 0.0));
        assert_eq!(effective_gain(&w_r, &h, &w_t).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let h = DMatrix::zeros(2, 3);
        let v = DVector::zeros(2);
        assert!(effective_gain(&v, &h, &v).is_err());
    }

    #[test]
    fn unit_sinr_gives_bandwidth_rate() {
        let radio = RadioConfig::default();
        let signal = c((radio.noise_power() / radio.tx_power_w).sqrt(), 0.0);
        let (sinr, rate) = sinr_and_rate(signal, &[], &radio);
        assert!((sinr - 1.0).abs() < 1e-12);
        assert!((rate - radio.bandwidth_hz).abs() < 1e-3);
    }

    #[test]
    fn zero_signal_gives_zero_rate() {
        let radio = RadioConfig::default();
        assert_eq!(sinr_and_rate(c(0.0, 0.0), &[c(1e-6, 0.0)], &radio), (0.0, 0.0));
    }

    #[test]
    fn single_receive_antenna_combiner_is_unit_phase() {
        let h = DMatrix::from_row_slice(1, 2, &[c(1.0, 1.0), c(0.0, 2.0)]);
        let w = DVector::from_element(2, c(1.0, 0.0));
        let w_r = bs_combiner(&h, &w);
        let expected = c(1.0, 3.0) / c(1.0, 3.0).norm();
        assert!((w_r[0] - expected).norm() < 1e-15);
        let g = effective_gain(&w_r, &h, &w).unwrap();
        assert!((g.norm() - (&h * &w).norm()).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_picks_first_leaf() {
        let cb = Codebook::new(8).unwrap();
        let best = exhaustive_best_beam(&DMatrix::zeros(4, 8), &cb).unwrap();
        assert_eq!(best, cb.leaves().next().unwrap());
    }
}
