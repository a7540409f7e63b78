//! Lower-level dynamics `w_{t+1} = Ξ_{t+1}(w_t, λ)` and its derivative maps.
//!
//! Derivatives follow the transposed convention: `A_{t+1} = ∇_{w_t} Ξ_{t+1}`
//! is `M × M` with `(A)_{jk} = ∂Ξ_k/∂w_j`, and `B_{t+1} = ∇_λ Ξ_{t+1}` is
//! `N × M`. An *adjoint* product applies the matrix as written (`A v`,
//! `B v`); a *tangent* product applies its transpose (`Aᵀ v`, `Bᵀ e`), which
//! is the ordinary Jacobian-vector product.

mod objective;
mod trajectory;
mod transition;

pub use objective::{Curvature, LowerObjective};
pub use trajectory::{unroll, StoragePolicy, Trajectory};
pub use transition::{
    Direction, ExtendedHyper, GdTransition, InitialState, StepSize, TransitionSystem,
};
