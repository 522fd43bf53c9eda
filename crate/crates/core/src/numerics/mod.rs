//! Special functions and adaptive quadrature.

mod quadrature;
mod special;

pub use quadrature::{
    integrate, integrate_pieces, CancelToken, Domain, Integral, QuadSpec, TailMap,
};
pub use special::{
    binomial, gamma, ln_std_normal_cdf, std_normal_cdf, std_normal_pdf, std_normal_quantile,
    std_normal_sf,
};
