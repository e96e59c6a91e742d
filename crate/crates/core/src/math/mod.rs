//! Shared numerical primitives.

mod gaussian;
pub mod optimize;
pub mod quadrature;
pub mod rng;
mod roots;
mod spd;
pub mod special;
pub mod stats;

pub(crate) use gaussian::mvt_logpdf_from_quadratic;
pub use gaussian::{mvn_logpdf, mvt_logpdf};
pub use roots::{find_root, find_root_newton};
pub use spd::{floor_eigenvalues, SpdMatrix};
pub use special::{
    logsumexp, normal_cdf, normal_logpdf, normal_pdf, normal_quantile, t_cdf, t_logpdf, t_quantile,
};
