//! Constrained decoding over prefix trees and FM-indexes.

mod beam;
mod fm_index;
mod suffix;

pub use beam::{constrained_beam_search, BeamHypothesis, Constraint, FmConstraint};
pub use fm_index::{FMIndex, Occurrence, DEFAULT_SA_SAMPLE, SEPARATOR};
pub use suffix::suffix_array;
