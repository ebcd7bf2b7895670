//! Lossless coding of LiDAR reflectance attributes with a nearest-neighbor
//! predicting transform whose fallback predictor is chosen from surface
//! normal agreement.
//!
//! Geometry is side information: the decoder receives the same integer
//! positions as the encoder and re-derives Morton order, normals, levels of
//! detail and every unsignaled predictor decision from them.

pub mod codec;
pub mod entropy;
pub mod error;
pub mod lod;
pub mod model;
pub mod normal;
pub mod predict;
pub mod report;
pub mod spatial;
pub mod synth;

pub use codec::{decode, encode, AttributeBitstream, CodecConfig, CodecStats, Header};
pub use error::{Error, Result};
pub use lod::{LodParams, LodStructure};
pub use model::{PointCloud, Position};
pub use normal::{Normal, NormalField, Orientation};
pub use predict::{IdwExponent, Mode, ThresholdPolicy};
