//! Hubbard operators in the two-level representation, Hamiltonian assembly and
//! composition of the disentangled propagator.
//!
//! Basis ordering is `(|p⟩, |q⟩)`: the upper level maps to row 0.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;


use crate::{Error, Result, C64};

/// `|Re Δf|` beyond which `e^{±Δf/2}` is refused.
pub const DELTA_F_GUARD: f64 = 50.0;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    /// Upper level `|p⟩`.
    P,
    /// Lower level `|q⟩`.
    Q,
}

impl Level {
    fn index(self) -> usize {
        match self {
            Level::P => 0,
            Level::Q => 1,
        }
    }
}

/// Label of the Hubbard operator `X^{row,col} = |row⟩⟨col|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HubbardIndex {
    pub row: Level,
    pub col: Level,
}

impl HubbardIndex {
    pub const fn new(row: Level, col: Level) -> Self {
        Self { row, col }
    }

    pub const ALL: [HubbardIndex; 4] = [
        HubbardIndex::new(Level::P, Level::P),
        HubbardIndex::new(Level::P, Level::Q),
        HubbardIndex::new(Level::Q, Level::P),
        HubbardIndex::new(Level::Q, Level::Q),
    ];

    /// `(X^{i,j})† = X^{j,i}`.
    pub fn adjoint(self) -> Self {
        Self::new(self.col, self.row)
    }

    pub fn matrix(self) -> ComplexMat2 {
        let mut m = ComplexMat2::zeros();
        m.0[self.row.index()][self.col.index()] = ONE;
        m
    }
}

/// Multiplication rule `X^{i,j} X^{k,m} = δ_{jk} X^{i,m}`; `None` is the zero operator.
pub fn hubbard_product(a: HubbardIndex, b: HubbardIndex) -> Option<HubbardIndex> {
    (a.col == b.row).then_some(HubbardIndex::new(a.row, b.col))
}

/// Dense 2×2 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMat2(pub [[C64; 2]; 2]);

impl ComplexMat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub const fn zeros() -> Self {
        Self([[ZERO; 2]; 2])
    }

    pub const fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max_ij |U_ij − V_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// `‖U†U − 𝕀‖` in the max-entry norm.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self - Self::identity()).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

impl fmt::Debug for ComplexMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(f, "[[{}, {}], [{}, {}]]", m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl Add for ComplexMat2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for ComplexMat2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Mul for ComplexMat2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Time-dependent coupling `V(t)`.
pub type Coupling = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Level splitting Δ and coupling V(t) of `H = Δ/2 (X^{pp} − X^{qq}) + V X^{pq} + V̄ X^{qp}`.
#[derive(Clone)]
pub struct HamiltonianParams {
    pub level_splitting: f64,
    pub coupling: Coupling,
}

impl HamiltonianParams {
    pub fn new<V>(level_splitting: f64, coupling: V) -> Self
    where
        V: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self { level_splitting, coupling: Arc::new(coupling) }
    }

    pub fn coupling_at(&self, t: f64) -> C64 {
        (self.coupling)(t)
    }
}

impl fmt::Debug for HamiltonianParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianParams")
            .field("level_splitting", &self.level_splitting)
            .finish_non_exhaustive()
    }
}

/// `H(t) = [[Δ/2, V(t)], [V̄(t), −Δ/2]]`.
pub fn build_hamiltonian(params: &HamiltonianParams, t: f64) -> Result<ComplexMat2> {
    if !t.is_finite() {
        return Err(Error::NonFinite { what: "time", t });
    }
    if !params.level_splitting.is_finite() {
        return Err(Error::NonFinite { what: "level splitting", t });
    }
    let v = params.coupling_at(t);
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFinite { what: "coupling V(t)", t });
    }
    let half = C64::new(0.5 * params.level_splitting, 0.0);
    Ok(ComplexMat2::new(half, v, v.conj(), -half))
}

/// `U = e^{α X^{pq}} e^{Δf J₀} e^{β X^{qp}}` written out entrywise:
/// `[[e^{Δf/2} + αβ e^{−Δf/2}, α e^{−Δf/2}], [β e^{−Δf/2}, e^{−Δf/2}]]`.
pub fn compose_propagator(alpha: C64, delta_f: C64, beta: C64) -> Result<ComplexMat2> {
    if delta_f.re.abs() > DELTA_F_GUARD {
        return Err(Error::Range { t: f64::NAN, value: delta_f.re.abs() });
    }
    let up = (delta_f * 0.5).exp();
    let down = (-delta_f * 0.5).exp();
    Ok(ComplexMat2::new(up + alpha * beta * down, alpha * down, beta * down, down))
}

/// Amplitudes `c_p |p⟩ + c_q |q⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub cp: C64,
    pub cq: C64,
}

impl QubitState {
    pub const fn new(cp: C64, cq: C64) -> Self {
        Self { cp, cq }
    }

    pub const fn upper() -> Self {
        Self::new(ONE, ZERO)
    }

    pub const fn lower() -> Self {
        Self::new(ZERO, ONE)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.cp.norm_sqr() + self.cq.norm_sqr()
    }

    /// `P = |c_p|² − |c_q|²`.
    pub fn population_inversion(&self) -> f64 {
        self.cp.norm_sqr() - self.cq.norm_sqr()
    }
}

/// Result of [`evolve_state`]; `non_unitary` is raised when the propagator's
/// unitarity defect exceeds the tolerance and the norm may have drifted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolved {
    pub state: QubitState,
    pub unitarity_defect: f64,
    pub non_unitary: bool,
}

pub const UNITARITY_TOL: f64 = 1e-10;

/// `ψ = U ψ₀` for a normalized `ψ₀`.
pub fn evolve_state(u: &ComplexMat2, psi0: &QubitState) -> Result<Evolved> {
    if (psi0.norm_sqr().sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!(
            "initial state is not normalized (‖ψ₀‖ = {})",
            psi0.norm_sqr().sqrt()
        )));
    }
    let [cp, cq] = u.apply([psi0.cp, psi0.cq]);
    let defect = u.unitarity_defect();
    Ok(Evolved { state: QubitState::new(cp, cq), unitarity_defect: defect, non_unitary: !(defect < UNITARITY_TOL) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hubbard_multiplication_rule_all_pairs() {
        for a in HubbardIndex::ALL {
            for b in HubbardIndex::ALL {
                let product = a.matrix() * b.matrix();
                let expected = hubbard_product(a, b).map_or(ComplexMat2::zeros(), HubbardIndex::matrix);
                assert_eq!(product, expected, "{a:?}·{b:?}");
            }
        }
    }

    #[test]
    fn hubbard_examples() {
        let pq = HubbardIndex::new(Level::P, Level::Q);
        let qp = HubbardIndex::new(Level::Q, Level::P);
        let pp = HubbardIndex::new(Level::P, Level::P);
        assert_eq!(hubbard_product(pq, qp), Some(pp));
        assert_eq!(hubbard_product(pp, qp), None);
    }

    #[test]
    fn hubbard_completeness_and_adjoint() {
        let sum = HubbardIndex::new(Level::P, Level::P).matrix() + HubbardIndex::new(Level::Q, Level::Q).matrix();
        assert_eq!(sum, ComplexMat2::identity());
        for x in HubbardIndex::ALL {
            assert_eq!(x.matrix().adjoint(), x.adjoint().matrix());
        }
        let distinct: std::collections::HashSet<_> = HubbardIndex::ALL.iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn diagonal_hamiltonian() {
        let params = HamiltonianParams::new(2.0, |_| C64::new(0.0, 0.0));
        let h = build_hamiltonian(&params, 0.3).unwrap();
        assert_eq!(h, ComplexMat2::new(ONE, ZERO, ZERO, -ONE));
    }

    #[test]
    fn non_finite_coupling_is_rejected() {
        let params = HamiltonianParams::new(1.0, |t| C64::new(1.0 / t, 0.0));
        assert!(matches!(build_hamiltonian(&params, 0.0), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn compose_identity() {
        let u = compose_propagator(ZERO, ZERO, ZERO).unwrap();
        assert_eq!(u, ComplexMat2::identity());
    }

    #[test]
    fn compose_acting_on_upper_state() {
        let (a, f, b) = (C64::new(0.3, -0.2), C64::new(0.1, 0.7), C64::new(-0.4, 0.5));
        let u = compose_propagator(a, f, b).unwrap();
        let [cp, cq] = u.apply([ONE, ZERO]);
        let down = (-f / 2.0).exp();
        assert!((cp - down * (f.exp() + a * b)).norm() < 1e-15);
        assert!((cq - down * b).norm() < 1e-15);
    }

    #[test]
    fn compose_matches_three_factor_product() {
        // e^{αX^{pq}} = 1 + αX^{pq}, e^{ΔfJ₀} = diag(e^{Δf/2}, e^{−Δf/2}), e^{βX^{qp}} = 1 + βX^{qp}
        let (a, f, b) = (C64::new(1.3, -0.2), C64::new(-0.9, 2.7), C64::new(0.4, 0.05));
        let left = ComplexMat2::new(ONE, a, ZERO, ONE);
        let mid = ComplexMat2::new((f / 2.0).exp(), ZERO, ZERO, (-f / 2.0).exp());
        let right = ComplexMat2::new(ONE, ZERO, b, ONE);
        let product = left * mid * right;
        assert!(product.max_abs_diff(&compose_propagator(a, f, b).unwrap()) < 1e-14);
    }

    #[test]
    fn overflow_guard() {
        assert!(matches!(compose_propagator(ZERO, C64::new(51.0, 0.0), ZERO), Err(Error::Range { .. })));
        assert!(compose_propagator(ZERO, C64::new(-49.0, 3.0), ZERO).is_ok());
    }

    #[test]
    fn evolve_identity() {
        let out = evolve_state(&ComplexMat2::identity(), &QubitState::upper()).unwrap();
        assert_eq!(out.state, QubitState::upper());
        assert!(!out.non_unitary);
    }

    #[test]
    fn evolve_flags_non_unitary_and_rejects_unnormalized() {
        let u = ComplexMat2::identity().scale(C64::new(1.1, 0.0));
        assert!(evolve_state(&u, &QubitState::upper()).unwrap().non_unitary);
        let bad = QubitState::new(ONE, ONE);
        assert!(evolve_state(&ComplexMat2::identity(), &bad).is_err());
    }

    fn c64() -> impl Strategy<Value = C64> {
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(r, i)| C64::new(r, i))
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian_and_traceless(delta in -10.0f64..10.0, v in c64(), t in -5.0f64..5.0) {
            let params = HamiltonianParams::new(delta, move |s| v * C64::from_polar(1.0, s));
            let h = build_hamiltonian(&params, t).unwrap();
            prop_assert_eq!(h, h.adjoint());
            prop_assert_eq!(h.trace(), ZERO);
        }

        #[test]
        fn composed_determinant_is_one(a in c64(), b in c64(), fr in -49.0f64..49.0, fi in -20.0f64..20.0) {
            let u = compose_propagator(a, C64::new(fr, fi), b).unwrap();
            // exact in exact arithmetic; rounding scales with the largest entry squared
            let scale = u.max_abs().max(1.0);
            prop_assert!((u.det() - ONE).norm() < 1e-12 * scale * scale);
        }

        #[test]
        fn unitary_evolution_preserves_norm(theta in 0.0f64..6.3, phi in 0.0f64..6.3, chi in 0.0f64..6.3, x in 0.0f64..1.0) {
            let (c, s) = (theta.cos(), theta.sin());
            let u = ComplexMat2::new(
                C64::from_polar(c, phi), C64::from_polar(-s, -chi),
                C64::from_polar(s, chi), C64::from_polar(c, -phi),
            );
            let psi0 = QubitState::new(C64::new(x.sqrt(), 0.0), C64::from_polar((1.0 - x).sqrt(), 0.4));
            let out = evolve_state(&u, &psi0).unwrap();
            prop_assert!(!out.non_unitary);
            prop_assert!((out.state.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }
}
