//! Explicit approximants: zonal kernels, cubature, B-spline interpolation, the
//! ReLU^k power identities, kernel factorization and the assembled network
//! `Σ_i μ_i L_{n0}(u)(y_i) Q_N^{k+1}(l_{n0})(⟨x, y_i⟩)`.

mod assemble;
mod cubature;
mod cutoff;
mod factor;
mod spline;
mod zonal;

pub use assemble::{
    approximation_ladder, build_inner_product_network, build_multichannel_inner_product,
    build_spline_block, build_spline_fcnn, constructive_approximator, householder_to_e1,
    spline_block_width, ApproxReport, ConstructiveNetwork, ConstructiveParams, ConvStage,
    InnerProductNet, SplineBlock, MAX_SINGLE_CHANNEL_LEN, TARGET_QUADRATURE_ALLOWANCE,
};
pub use cubature::{
    cubature_rule, exact_rule, gauss_legendre, op_l, sphere_monomial_mean,
    verify_cubature_identity, CubatureRule, POLY_DEGREE_ALLOWANCE,
};
pub use cutoff::SmoothCutoff;
pub use factor::{conv_factorize, poly_roots, polymul, power_decomposition, Factorization};
pub use spline::{bspline, interp_spline, truncated_powers, Spline, SplineSpec, TruncatedPowers};
pub use zonal::{gegenbauer, kernel_l, zonal_terms, ZonalKernel};
