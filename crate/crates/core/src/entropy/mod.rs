//! Adaptive binary range coding and the residual/mode binarizations.
//!
//! Everything here is integer arithmetic, so streams are byte-identical on
//! every platform.

mod binarize;
mod range;

pub use binarize::{
    exp_golomb_len, mode_bins, residual_bins, sign_map, sign_unmap, SymbolContexts, SymbolDecoder,
    SymbolEncoder, PREFIX_BINS,
};
pub use range::{Context, RangeDecoder, RangeEncoder, PROB_BITS};
