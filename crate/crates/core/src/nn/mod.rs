//! Small-network numerics: MLP, GRU, Gaussian policy head, and Adam, with
//! hand-written reverse-mode gradients over this closed set of layer types.

mod adam;
mod gaussian;
mod gru;
mod mlp;

pub use adam::{Adam, LinearDecay};
pub use gaussian::GaussianHead;
pub use gru::{gru_param_count, GruCache, GruNet};
pub use mlp::{mlp_param_count, Mlp, MlpCache};
