//! Exactly solvable time-dependent two-level Hamiltonians.
//!
//! A driven qubit `H(t) = Δ/2 (X^{pp} − X^{qq}) + V(t) X^{pq} + V̄(t) X^{qp}` has a
//! propagator that factorizes as `U = e^{α X^{pq}} e^{Δf J₀} e^{β X^{qp}}`. The
//! factorizing functions follow from a solution φ of the parametric oscillator
//! `φ'' + Ω²(t) φ = 0`, where Ω² is fixed by the driving field. Running the map
//! backwards, a prescribed real Ω(t) together with a solution μ of the Ermakov
//! equation `μ'' + Ω² μ = Ω₀²/μ³` yields driving fields whose propagator is known
//! in closed form.
//!
//! Modules:
//! - [`su2`]: Hubbard operators, Hamiltonian assembly, propagator composition.
//! - [`factorization`]: the direct map from a field and an oscillator solution to
//!   `(α, Δf, β)`, and the field → Ω² map.
//! - [`ermakov`]: Pinney solutions, field synthesis, μ-form factorization, periodicity.
//! - [`families`]: closed-form circular, decaying and oscillating field families.
//! - [`oracle`]: Runge–Kutta integration of `i dU/dt = H U` and verification reports.
//!
//! Units have ħ = 1; times and frequencies are reciprocal.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ermakov;
pub mod factorization;
pub mod families;
pub mod numerics;
pub mod oracle;
pub mod su2;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
