//! Approximate minimizers of the quadratic model
//! `Q(p) = ∇f(x)ᵀp + ½pᵀHp + Ψ(x + p) − Ψ(x)`.

mod blockdiag;
mod sparsa;

pub use blockdiag::{block_model_value, blockdiag_cd_solve, BlockCdConfig, BlockCdOutcome};
pub use sparsa::{sparsa_solve, SparsaConfig, SparsaOutcome, WarmStart};
