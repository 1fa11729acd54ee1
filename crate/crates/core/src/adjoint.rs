//! Adjoint states of the two control problems.
//!
//! The adjoint is the exact transpose of the discrete forward map paired
//! with the rectangle-rule cost `tau * sum_{n=1..N} 1/2 |u^n - z_d^n|_M^2`:
//!
//! ```text
//! (M/tau + K [+ alpha B1]) p^n = (M/tau) p^{n+1} + M (u^n - z_d^n),  p^{N+1} = 0
//! ```
//!
//! with `p^n = 0` on Dirichlet nodes for the mixed Dirichlet problem. Adjoint
//! slice `k` stores `p^{k+1}`, so slice `n_steps` is the zero terminal value
//! and slice `k` pairs with control slice `k`. With that pairing
//! `(C(h, eta), u - z_d)_H = (h, p)_H - (eta, p|Gamma2)_Q` holds to rounding.

use crate::assembly::DiscreteOperators;
use crate::error::{Error, Result};
use crate::state::{ProblemData, Propagator, Role, Trajectory, Variant};

fn check_state(u: &Trajectory, data: &ProblemData) -> Result<()> {
    if u.role != Role::State {
        return Err(Error::contract("adjoint solve expects a state trajectory"));
    }
    if u.slices.len() != data.n_steps() + 1 {
        return Err(Error::contract(format!(
            "state trajectory has {} slices, expected {}",
            u.slices.len(),
            data.n_steps() + 1
        )));
    }
    Ok(())
}

pub fn solve_adjoint(
    data: &ProblemData,
    u: &Trajectory,
    ops: &DiscreteOperators,
    variant: Variant,
) -> Result<Trajectory> {
    check_state(u, data)?;
    Propagator::new(data, ops, variant)?.adjoint(data, u)
}

pub fn solve_adjoint_p(data: &ProblemData, u: &Trajectory, ops: &DiscreteOperators) -> Result<Trajectory> {
    solve_adjoint(data, u, ops, Variant::Dirichlet)
}

pub fn solve_adjoint_palpha(
    data: &ProblemData,
    u_alpha: &Trajectory,
    ops: &DiscreteOperators,
) -> Result<Trajectory> {
    solve_adjoint(data, u_alpha, ops, Variant::Robin)
}
