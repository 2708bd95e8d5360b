//! Domain types for the coin ⊗ position space and the basic state operations.
//!
//! The total Hilbert space of a walker on `N` sites is spanned by the basis
//! states `|c, x⟩` with coin `c ∈ {↑, ↓}` and site `x ∈ 1..=N`. Amplitude
//! vectors use the coin-major layout `index(c, x) = c·N + (x − 1)` with
//! `↑ = 0`, `↓ = 1`, so a coin operator acts on two contiguous blocks.
//! Sites are 1-based in every public signature and 0-based internally.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Coin states are normalized to within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Constructed operators must satisfy `‖U†U − I‖_max` below this tolerance.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Reduce an angle to the canonical interval `[0, 2π)`.
pub fn canonical_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid of a tiny negative value can round up to exactly 2π, and
    // a negative zero passes through unchanged.
    if a >= TAU || a == 0.0 {
        0.0
    } else {
        a
    }
}

/// The `(ρ, θ, φ)` triple parametrizing the general 2×2 unitary coin
///
/// ```text
///     ⎡ √ρ              √(1−ρ)·e^{iθ}    ⎤
///     ⎣ √(1−ρ)·e^{iφ}  −√ρ·e^{i(θ+φ)}   ⎦
/// ```
///
/// up to a global U(1) phase. `ρ` is the bias of the coin; `θ` and `φ` are
/// stored canonically in `[0, 2π)`. The same triple describes recovery
/// operators `(ρ′, θ′, φ′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoinParameters {
    rho: f64,
    theta: f64,
    phi: f64,
}

impl CoinParameters {
    pub fn new(rho: f64, theta: f64, phi: f64) -> Result<Self> {
        if !rho.is_finite() || !(0.0..=1.0).contains(&rho) {
            return Err(Error::RhoOutOfRange(rho));
        }
        Ok(Self {
            rho,
            theta: canonical_angle(theta),
            phi: canonical_angle(phi),
        })
    }

    /// The unbiased coin, `ρ = 1/2` with no phases.
    pub fn hadamard() -> Self {
        Self { rho: 0.5, theta: 0.0, phi: 0.0 }
    }

    /// The diagonal coin family representative, `(1, 0, 0)`.
    pub fn identity() -> Self {
        Self { rho: 1.0, theta: 0.0, phi: 0.0 }
    }

    /// The anti-diagonal coin family representative, `(0, 0, 0)`.
    pub fn flip() -> Self {
        Self { rho: 0.0, theta: 0.0, phi: 0.0 }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// A normalized qubit amplitude pair `(α, β)` over `{|↑⟩, |↓⟩}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinState {
    alpha: Complex64,
    beta: Complex64,
}

impl CoinState {
    /// Build from explicit amplitudes; `|α|² + |β|²` must equal 1 within
    /// [`NORMALIZATION_TOLERANCE`].
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Self { alpha, beta })
    }

    /// `|↑⟩`, the north pole of the Bloch sphere.
    pub fn up() -> Self {
        Self { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0) }
    }

    /// `|↓⟩`, the south pole of the Bloch sphere.
    pub fn down() -> Self {
        Self { alpha: Complex64::new(0.0, 0.0), beta: Complex64::new(1.0, 0.0) }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }
}

/// Map Bloch angles to the coin state `(cos(θ_b/2), e^{iφ_b}·sin(θ_b/2))`.
pub fn bloch_to_coin(theta_b: f64, phi_b: f64) -> CoinState {
    let half = 0.5 * theta_b;
    CoinState {
        alpha: Complex64::new(half.cos(), 0.0),
        beta: Complex64::from_polar(half.sin(), phi_b),
    }
}

/// Lattice topology: reflecting boundaries (line) or periodic boundary (cycle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Line,
    Cycle,
}

/// How coin states select movement directions.
///
/// Spatial: a fixed coin state means the same spatial direction at every
/// site (`↑` moves towards larger `x`). Local: edges carry alternating coin
/// labels and the walker traverses the incident edge matching its coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionConvention {
    Spatial,
    Local,
}

/// Coin basis index; `Up = 0`, `Down = 1` in the coin-major layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinBasis {
    Up,
    Down,
}

impl CoinBasis {
    pub(crate) fn offset(self) -> usize {
        match self {
            CoinBasis::Up => 0,
            CoinBasis::Down => 1,
        }
    }
}

/// A finite one-dimensional lattice with a direction convention.
///
/// The transfer source `A` is always site 1; the antipodal target `B` is
/// site `N` on a line and site `N/2 + 1` on an even cycle. Odd cycles have
/// no antipode. The local convention on an odd cycle is rejected because no
/// consistent alternating edge labelling exists there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lattice {
    topology: Topology,
    n_sites: usize,
    convention: DirectionConvention,
}

impl Lattice {
    pub fn new(topology: Topology, n_sites: usize, convention: DirectionConvention) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::LatticeTooSmall(n_sites));
        }
        if topology == Topology::Cycle
            && convention == DirectionConvention::Local
            && !n_sites.is_multiple_of(2)
        {
            return Err(Error::OddLocalCycle(n_sites));
        }
        Ok(Self { topology, n_sites, convention })
    }

    /// A spatial-convention line of `n_sites` sites.
    pub fn line(n_sites: usize) -> Result<Self> {
        Self::new(Topology::Line, n_sites, DirectionConvention::Spatial)
    }

    /// A spatial-convention cycle of `n_sites` sites.
    pub fn cycle(n_sites: usize) -> Result<Self> {
        Self::new(Topology::Cycle, n_sites, DirectionConvention::Spatial)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn convention(&self) -> DirectionConvention {
        self.convention
    }

    /// Dimension of the coin ⊗ position space, `2N`.
    pub fn dim(&self) -> usize {
        2 * self.n_sites
    }

    /// The transfer source site `A`.
    pub fn source_site(&self) -> usize {
        1
    }

    /// The antipodal target site `B`, when defined.
    pub fn target_site(&self) -> Option<usize> {
        match self.topology {
            Topology::Line => Some(self.n_sites),
            Topology::Cycle if self.n_sites.is_multiple_of(2) => Some(self.n_sites / 2 + 1),
            Topology::Cycle => None,
        }
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_sites });
        }
        Ok(())
    }

    /// Basis index of `|coin, site⟩` (1-based site).
    pub fn index(&self, coin: CoinBasis, site: usize) -> usize {
        debug_assert!(site >= 1 && site <= self.n_sites);
        coin.offset() * self.n_sites + (site - 1)
    }
}

/// Complex amplitude vector over the `2N`-dimensional coin ⊗ position space
/// together with the number of steps taken so far.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    amplitudes: DVector<Complex64>,
    step_count: usize,
}

impl WalkState {
    /// Build from a raw amplitude vector of even length, checking the norm.
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        if !amplitudes.len().is_multiple_of(2) || amplitudes.is_empty() {
            return Err(Error::DimensionMismatch { expected: 2, actual: amplitudes.len() });
        }
        let norm_sq = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Self { amplitudes, step_count: 0 })
    }

    pub(crate) fn from_parts(amplitudes: DVector<Complex64>, step_count: usize) -> Self {
        Self { amplitudes, step_count }
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Amplitude of `|coin, site⟩` (1-based site).
    ///
    /// Panics if the site is out of range; use [`Lattice::check_site`] first
    /// for untrusted input.
    pub fn amplitude(&self, coin: CoinBasis, site: usize) -> Complex64 {
        let n = self.n_sites();
        assert!(site >= 1 && site <= n, "site {site} outside 1..={n}");
        self.amplitudes[coin.offset() * n + (site - 1)]
    }

    /// Euclidean norm of the amplitude vector.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability of finding the walker at each site, in site order.
    pub fn site_probabilities(&self) -> Vec<f64> {
        let n = self.n_sites();
        (0..n)
            .map(|x| self.amplitudes[x].norm_sqr() + self.amplitudes[n + x].norm_sqr())
            .collect()
    }
}

/// A dense `2N×2N` unitary, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: DMatrix<Complex64>,
}

impl UnitaryOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let residual = unitarity_residual(&matrix);
        if residual > UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary(residual));
        }
        Ok(Self { matrix })
    }

    // For products of validated unitaries, where accumulated rounding may
    // exceed the strict construction tolerance.
    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `‖M†M − I‖_max`, the largest entry modulus of the unitarity defect.
pub fn unitarity_residual(matrix: &DMatrix<Complex64>) -> f64 {
    let gram = matrix.adjoint() * matrix;
    let n = gram.nrows();
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            residual = residual.max((gram[(i, j)] - expected).norm());
        }
    }
    residual
}

/// Place a coin state at one site; all other amplitudes are zero and the
/// step count starts at 0.
pub fn localized_state(coin: CoinState, site: usize, lattice: &Lattice) -> Result<WalkState> {
    lattice.check_site(site)?;
    let mut amplitudes = DVector::from_element(lattice.dim(), Complex64::new(0.0, 0.0));
    amplitudes[lattice.index(CoinBasis::Up, site)] = coin.alpha();
    amplitudes[lattice.index(CoinBasis::Down, site)] = coin.beta();
    Ok(WalkState { amplitudes, step_count: 0 })
}

/// `⟨a|b⟩` with conjugation on `a`.
pub fn inner_product(a: &WalkState, b: &WalkState) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn coin_parameters_canonicalize_angles() {
        let p = CoinParameters::new(0.5, -PI, 3.0 * TAU + 0.25).unwrap();
        assert!((p.theta() - PI).abs() < 1e-12);
        assert!((p.phi() - 0.25).abs() < 1e-12);
        assert!(CoinParameters::new(1.5, 0.0, 0.0).is_err());
        assert!(CoinParameters::new(-0.1, 0.0, 0.0).is_err());
        assert!(CoinParameters::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn canonical_angle_handles_tiny_negatives() {
        let a = canonical_angle(-1e-20);
        assert!((0.0..TAU).contains(&a));
    }

    #[test]
    fn bloch_poles() {
        let north = bloch_to_coin(0.0, 1.234);
        assert_eq!(north.alpha(), c(1.0, 0.0));
        assert_eq!(north.beta(), c(0.0, 0.0));

        let south = bloch_to_coin(PI, 0.0);
        assert!(south.alpha().norm() < 1e-16);
        assert!((south.beta() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bloch_equator_gives_circular_state() {
        // (1/√2)[|↑⟩ + i|↓⟩]
        let s = bloch_to_coin(PI / 2.0, PI / 2.0);
        assert!((s.alpha() - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.beta() - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn coin_state_rejects_unnormalized() {
        assert!(CoinState::new(c(1.0, 0.0), c(0.5, 0.0)).is_err());
        assert!(CoinState::new(c(0.6, 0.0), c(0.8, 0.0)).is_ok());
    }

    #[test]
    fn lattice_invariants() {
        assert!(Lattice::line(1).is_err());
        assert!(Lattice::new(Topology::Cycle, 5, DirectionConvention::Local).is_err());
        assert!(Lattice::new(Topology::Cycle, 6, DirectionConvention::Local).is_ok());
        // Odd cycles are fine in the spatial convention, they just have no antipode.
        let odd = Lattice::cycle(5).unwrap();
        assert_eq!(odd.target_site(), None);
        assert_eq!(Lattice::line(7).unwrap().target_site(), Some(7));
        assert_eq!(Lattice::cycle(6).unwrap().target_site(), Some(4));
    }

    #[test]
    fn coin_major_indexing() {
        let lattice = Lattice::line(4).unwrap();
        assert_eq!(lattice.index(CoinBasis::Up, 1), 0);
        assert_eq!(lattice.index(CoinBasis::Up, 4), 3);
        assert_eq!(lattice.index(CoinBasis::Down, 1), 4);
        assert_eq!(lattice.index(CoinBasis::Down, 3), 6);
    }

    #[test]
    fn localized_state_places_amplitudes() {
        let lattice = Lattice::line(4).unwrap();
        let state = localized_state(CoinState::up(), 1, &lattice).unwrap();
        assert_eq!(state.amplitude(CoinBasis::Up, 1), c(1.0, 0.0));
        assert_eq!(state.step_count(), 0);
        assert_eq!(state.site_probabilities()[0], 1.0);

        let cyc = Lattice::cycle(4).unwrap();
        let state = localized_state(CoinState::down(), 3, &cyc).unwrap();
        assert_eq!(state.amplitude(CoinBasis::Down, 3), c(1.0, 0.0));
        assert_eq!(state.amplitude(CoinBasis::Up, 3), c(0.0, 0.0));

        let six = Lattice::line(6).unwrap();
        let coin = bloch_to_coin(PI / 2.0, PI / 2.0);
        let state = localized_state(coin, 1, &six).unwrap();
        let nonzero = state.amplitudes().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);

        assert!(localized_state(CoinState::up(), 5, &lattice).is_err());
        assert!(localized_state(CoinState::up(), 0, &lattice).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let lattice = Lattice::line(3).unwrap();
        let s1 = localized_state(bloch_to_coin(1.1, 2.2), 1, &lattice).unwrap();
        let p = inner_product(&s1, &s1).unwrap();
        assert!((p - c(1.0, 0.0)).norm() < 1e-14);

        let s2 = localized_state(CoinState::up(), 2, &lattice).unwrap();
        let s3 = localized_state(CoinState::up(), 1, &lattice).unwrap();
        assert_eq!(inner_product(&s3, &s2).unwrap(), c(0.0, 0.0));

        // ⟨↑,1 | (1/√2)(|↑,1⟩+|↓,1⟩)⟩ = 1/√2
        let sup = localized_state(
            CoinState::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap(),
            1,
            &lattice,
        )
        .unwrap();
        let overlap = inner_product(&s3, &sup).unwrap();
        assert!((overlap - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);

        let other = localized_state(CoinState::up(), 1, &Lattice::line(4).unwrap()).unwrap();
        assert!(inner_product(&s3, &other).is_err());
    }

    proptest! {
        #[test]
        fn bloch_states_are_normalized(theta_b in 0.0..PI, phi_b in 0.0..TAU) {
            let s = bloch_to_coin(theta_b, phi_b);
            let norm_sq = s.alpha().norm_sqr() + s.beta().norm_sqr();
            prop_assert!((norm_sq - 1.0).abs() < 1e-15);
        }

        #[test]
        fn inner_product_conjugate_symmetry(
            t1 in 0.0..PI, p1 in 0.0..TAU, t2 in 0.0..PI, p2 in 0.0..TAU,
            x1 in 1usize..=5, x2 in 1usize..=5,
        ) {
            let lattice = Lattice::line(5).unwrap();
            let a = localized_state(bloch_to_coin(t1, p1), x1, &lattice).unwrap();
            let b = localized_state(bloch_to_coin(t2, p2), x2, &lattice).unwrap();
            let ab = inner_product(&a, &b).unwrap();
            let ba = inner_product(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-15);
        }
    }
}
