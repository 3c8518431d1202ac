//! Antenna arrays, the hierarchical codebook, the geometric multipath
//! channel and the SINR/rate arithmetic.

pub(crate) mod array;
mod channel;
mod codebook;
mod link;

pub use array::{active_elements, beam_vector, steering_vector, BeamVector};
pub use channel::{realize_channel, ChannelState, Path, RadioConfig};
pub use codebook::{max_layer, Codebook, CodebookNode};
pub use link::{
    bs_combiner, effective_gain, exhaustive_best_beam, matched_combiner, matched_sinr, matched_sinr_slice, rate_from_sinr,
    sinr_and_rate,
};

pub use num_complex::Complex64;
