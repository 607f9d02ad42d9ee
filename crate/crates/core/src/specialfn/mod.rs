//! Real-argument special functions behind the closed-form eigenfunctions:
//! Gamma, Hermite functions of negative order, parabolic cylinder `D_v`, and
//! Kummer's `M` and Tricomi's `U`.

mod gamma;
mod hermite;
mod hypergeometric;

pub use crate::quad::QuadratureConfig;
pub use gamma::gamma;
pub use hermite::{hermite_h, hermite_h_deriv, parabolic_d, parabolic_d_deriv};
pub use hypergeometric::{kummer_m, kummer_m_deriv, tricomi_u, tricomi_u_deriv};
