//! Parabolic cylinder functions `D_{-c}(iλ)` on the imaginary axis and `ln Γ`.

mod gamma;
mod ode;
mod pcf;
pub mod quadrature;

pub use gamma::gamma_ln;
pub use pcf::{
    ln_abs2, ln_abs2_many, ln_abs_wronskian_exact, pcf_negative_order, pcf_quadrature, pcf_quadrature_eval,
    pcf_weber_ode, weber_trajectory, PcfEval, WeberState, C_MAX_QUAD, ODE_RTOL,
};
