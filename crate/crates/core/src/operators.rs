//! Coin, shift, step and recovery operators, and the inverse of the coin
//! parametrization for arbitrary 2×2 unitaries.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::core::{
    canonical_angle, CoinBasis, CoinParameters, DirectionConvention, Lattice, Topology,
    UnitaryOperator,
};
use crate::error::{Error, Result};

/// Dense 2×2 complex matrix, row-major.
pub type Matrix2 = nalgebra::Matrix2<Complex64>;

/// Inputs to [`decompose_unitary2`] must be unitary within this residual.
pub const DECOMPOSE_TOLERANCE: f64 = 1e-10;

/// A transfer block counts as perfect below this unitarity residual. The
/// gap to quasi-transfers (probabilities around 0.99 after very long runs)
/// is many orders of magnitude, so the exact cut-off is uncritical.
pub const BLOCK_TOLERANCE: f64 = 1e-9;

/// Coin parameters plus the global phase `γ` splitting an arbitrary 2×2
/// unitary as `m = e^{iγ}·C(ρ′, θ′, φ′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionResult {
    pub params: CoinParameters,
    pub global_phase: f64,
}

impl DecompositionResult {
    /// The reconstructed matrix `e^{iγ}·C(params)`.
    pub fn matrix(&self) -> Matrix2 {
        coin_matrix(self.params) * Complex64::from_polar(1.0, self.global_phase)
    }
}

/// The general unitary coin for the given `(ρ, θ, φ)`.
pub fn coin_matrix(params: CoinParameters) -> Matrix2 {
    let r = params.rho().sqrt();
    let s = (1.0 - params.rho()).sqrt();
    let e_theta = Complex64::from_polar(1.0, params.theta());
    let e_phi = Complex64::from_polar(1.0, params.phi());
    Matrix2::new(
        Complex64::new(r, 0.0),
        s * e_theta,
        s * e_phi,
        -Complex64::new(r, 0.0) * e_theta * e_phi,
    )
}

/// Destination of `|coin, site⟩` under one shift, or `None` when the walker
/// has no matching edge and stays put (line boundaries, local convention).
fn shift_destination(
    lattice: &Lattice,
    coin: CoinBasis,
    site: usize,
) -> Option<(CoinBasis, usize)> {
    let n = lattice.n_sites();
    match lattice.convention() {
        DirectionConvention::Spatial => match lattice.topology() {
            Topology::Line => Some(match coin {
                // Right-movers reflect into left-movers at the last site and
                // vice versa at the first, keeping the flux conserved.
                CoinBasis::Up if site < n => (CoinBasis::Up, site + 1),
                CoinBasis::Up => (CoinBasis::Down, n),
                CoinBasis::Down if site > 1 => (CoinBasis::Down, site - 1),
                CoinBasis::Down => (CoinBasis::Up, 1),
            }),
            Topology::Cycle => Some(match coin {
                CoinBasis::Up => (CoinBasis::Up, site % n + 1),
                CoinBasis::Down => (CoinBasis::Down, (site + n - 2) % n + 1),
            }),
        },
        DirectionConvention::Local => {
            // Edge (x, x+1) carries label ↑ for odd x, ↓ for even x; on a
            // cycle the closing edge (N, 1) takes the label forced by
            // alternation. The walker crosses its coin's edge unchanged.
            let label_up = |left_site: usize| left_site % 2 == 1;
            let right_neighbor = if site < n {
                Some((site + 1, label_up(site)))
            } else if lattice.topology() == Topology::Cycle {
                Some((1, label_up(n)))
            } else {
                None
            };
            let left_neighbor = if site > 1 {
                Some((site - 1, label_up(site - 1)))
            } else if lattice.topology() == Topology::Cycle {
                Some((n, label_up(n)))
            } else {
                None
            };
            let wants_up = coin == CoinBasis::Up;
            for neighbor in [right_neighbor, left_neighbor].into_iter().flatten() {
                if neighbor.1 == wants_up {
                    return Some((coin, neighbor.0));
                }
            }
            None
        }
    }
}

/// The `2N×2N` shift operator for the lattice. Always a permutation matrix:
/// every row and column holds exactly one unit entry.
pub fn shift_operator(lattice: &Lattice) -> UnitaryOperator {
    let dim = lattice.dim();
    let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for coin in [CoinBasis::Up, CoinBasis::Down] {
        for site in 1..=lattice.n_sites() {
            let source = lattice.index(coin, site);
            let (dest_coin, dest_site) =
                shift_destination(lattice, coin, site).unwrap_or((coin, site));
            let dest = lattice.index(dest_coin, dest_site);
            matrix[(dest, source)] = Complex64::new(1.0, 0.0);
        }
    }
    UnitaryOperator::new(matrix).expect("shift permutation is unitary")
}

/// One walk step, `U = S·(C ⊗ I)`.
pub fn step_operator(coin: CoinParameters, lattice: &Lattice) -> UnitaryOperator {
    let n = lattice.n_sites();
    let coin_full: DMatrix<Complex64> = coin_matrix(coin).kronecker(&DMatrix::identity(n, n));
    let matrix = shift_operator(lattice).matrix() * coin_full;
    UnitaryOperator::new(matrix).expect("product of unitaries")
}

/// `‖m†m − I‖_max` for a 2×2 matrix.
pub fn unitarity_residual2(m: &Matrix2) -> f64 {
    let gram = m.adjoint() * m;
    let mut residual = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let expected = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            residual = residual.max((gram[(i, j)] - expected).norm());
        }
    }
    residual
}

fn decompose_with_tolerance(m: &Matrix2, tolerance: f64) -> Result<DecompositionResult> {
    let residual = unitarity_residual2(m);
    if residual > tolerance {
        return Err(Error::NotUnitary(residual));
    }
    let diag_sq = m[(0, 0)].norm_sqr().clamp(0.0, 1.0);
    // 1 − ρ computed from the anti-diagonal; near ρ = 1 this avoids the
    // cancellation that 1 − |m00|² suffers, which would otherwise inflate
    // the reconstructed off-diagonal magnitude √(1−ρ) from 1e-16 to 1e-8.
    let off_sq = (m[(0, 1)].norm() * m[(1, 0)].norm()).clamp(0.0, 1.0);
    let (rho, gamma, theta, phi) = if m[(0, 0)].norm() < 1e-12 {
        // Anti-diagonal: phases read directly, no global phase.
        (diag_sq, 0.0, m[(0, 1)].arg(), m[(1, 0)].arg())
    } else if off_sq < 1e-24 {
        // Diagonal: only θ + φ is determined; let φ carry the full phase.
        let gamma = m[(0, 0)].arg();
        (1.0 - off_sq, gamma, 0.0, (-m[(1, 1)]).arg() - gamma)
    } else {
        let gamma = m[(0, 0)].arg();
        let rho = if diag_sq > 0.5 { 1.0 - off_sq } else { diag_sq };
        (rho, gamma, m[(0, 1)].arg() - gamma, m[(1, 0)].arg() - gamma)
    };
    Ok(DecompositionResult {
        params: CoinParameters::new(rho, theta, phi)?,
        global_phase: canonical_angle(gamma),
    })
}

/// Split a 2×2 unitary as `e^{iγ}·C(ρ′, θ′, φ′)`.
///
/// The global phase is anchored so that the `(0,0)` entry of `e^{−iγ}m`
/// is real and non-negative; for an anti-diagonal `m` the phase is zero and
/// `θ′`, `φ′` are the two anti-diagonal phases.
pub fn decompose_unitary2(m: &Matrix2) -> Result<DecompositionResult> {
    decompose_with_tolerance(m, DECOMPOSE_TOLERANCE)
}

/// Recovery parameters for a certified transfer block: the decomposition of
/// `m†`. Applying the resulting coin after the transfer restores every
/// initial coin state up to the reported global phase.
pub fn recovery_from_transfer_block(m: &Matrix2) -> Result<DecompositionResult> {
    decompose_with_tolerance(&m.adjoint(), BLOCK_TOLERANCE)
}

/// The closed-form recovery families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryCase {
    /// ρ = 1 line, applied after `N` steps: `(0, 0, −θ−φ−π)`.
    IdentityLine,
    /// ρ = 1 even cycle, applied after `N/2` steps: `(1, 0, −NΘ/2 + π)`
    /// with `Θ = θ + φ + π`.
    IdentityCycleEven,
    /// ρ = 1 odd cycle, applied after `N` steps: `(1, 0, −NΘ + π)`.
    IdentityCycleOdd,
    /// ρ = 0 local even cycle with odd `N/2`, applied after `N/2` steps:
    /// `(0, −φ, −θ)`.
    FlipLocalCycleOddHalf,
}

impl RecoveryCase {
    fn name(self) -> &'static str {
        match self {
            RecoveryCase::IdentityLine => "identity-line",
            RecoveryCase::IdentityCycleEven => "identity-cycle-even",
            RecoveryCase::IdentityCycleOdd => "identity-cycle-odd",
            RecoveryCase::FlipLocalCycleOddHalf => "flip-local-cycle-oddhalf",
        }
    }
}

fn case_mismatch(case: RecoveryCase, reason: String) -> Error {
    Error::RecoveryCaseMismatch { case: case.name(), reason }
}

/// The closed-form recovery parameters for the given case, angle-canonicalized.
pub fn closed_form_recovery(
    case: RecoveryCase,
    lattice: &Lattice,
    coin: CoinParameters,
) -> Result<CoinParameters> {
    let n = lattice.n_sites() as f64;
    let even = lattice.n_sites().is_multiple_of(2);
    match case {
        RecoveryCase::IdentityLine => {
            if lattice.topology() != Topology::Line {
                return Err(case_mismatch(case, "needs a line".into()));
            }
            if coin.rho() != 1.0 {
                return Err(case_mismatch(case, format!("needs rho = 1, got {}", coin.rho())));
            }
            CoinParameters::new(0.0, 0.0, -coin.theta() - coin.phi() - PI)
        }
        RecoveryCase::IdentityCycleEven | RecoveryCase::IdentityCycleOdd => {
            if lattice.topology() != Topology::Cycle {
                return Err(case_mismatch(case, "needs a cycle".into()));
            }
            if coin.rho() != 1.0 {
                return Err(case_mismatch(case, format!("needs rho = 1, got {}", coin.rho())));
            }
            let big_theta = coin.theta() + coin.phi() + PI;
            if case == RecoveryCase::IdentityCycleEven {
                if !even {
                    return Err(case_mismatch(case, "needs an even cycle".into()));
                }
                CoinParameters::new(1.0, 0.0, -n * big_theta / 2.0 + PI)
            } else {
                if even {
                    return Err(case_mismatch(case, "needs an odd cycle".into()));
                }
                CoinParameters::new(1.0, 0.0, -n * big_theta + PI)
            }
        }
        RecoveryCase::FlipLocalCycleOddHalf => {
            if lattice.topology() != Topology::Cycle
                || lattice.convention() != DirectionConvention::Local
            {
                return Err(case_mismatch(case, "needs a local-convention cycle".into()));
            }
            if !even || (lattice.n_sites() / 2) % 2 != 1 {
                return Err(case_mismatch(case, "needs even N with odd N/2".into()));
            }
            if coin.rho() != 0.0 {
                return Err(case_mismatch(case, format!("needs rho = 0, got {}", coin.rho())));
            }
            CoinParameters::new(0.0, -coin.phi(), -coin.theta())
        }
    }
}

/// Largest entry modulus of `a − e^{iδ}b` minimized over the global phase
/// `δ`, i.e. how far two matrices are from agreeing up to a phase.
pub fn phase_distance(a: &Matrix2, b: &Matrix2) -> f64 {
    // Align on the largest entry of b.
    let mut best = (0, 0);
    for i in 0..2 {
        for j in 0..2 {
            if b[(i, j)].norm() > b[best].norm() {
                best = (i, j);
            }
        }
    }
    if b[best].norm() == 0.0 {
        return a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let phase = a[best] / b[best];
    let phase = if phase.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        phase / phase.norm()
    };
    let mut distance = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            distance = distance.max((a[(i, j)] - phase * b[(i, j)]).norm());
        }
    }
    distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{bloch_to_coin, localized_state};
    use crate::evolution::{evolve, fidelity};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &Matrix2, b: &Matrix2) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Deterministic low-state generator for test data.
    pub(crate) struct Lcg(u64);

    impl Lcg {
        pub(crate) fn new(seed: u64) -> Self {
            Lcg(seed.max(1))
        }

        pub(crate) fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    pub(crate) fn random_unitary2(rng: &mut Lcg) -> Matrix2 {
        // QR of a random complex 2×2 gives a Haar-ish unitary Q.
        let mut raw = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                raw[(i, j)] = c(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0);
            }
        }
        let qr = DMatrix::from_fn(2, 2, |i, j| raw[(i, j)]).qr();
        let q = qr.q();
        Matrix2::new(q[(0, 0)], q[(0, 1)], q[(1, 0)], q[(1, 1)])
    }

    #[test]
    fn hadamard_coin() {
        let m = coin_matrix(CoinParameters::hadamard());
        let h = FRAC_1_SQRT_2;
        let expected = Matrix2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0));
        assert!(max_diff(&m, &expected) < 1e-15);
    }

    #[test]
    fn degenerate_coins() {
        let z = coin_matrix(CoinParameters::identity());
        assert!(max_diff(&z, &Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))) < 1e-15);
        let x = coin_matrix(CoinParameters::flip());
        assert!(max_diff(&x, &Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))) < 1e-15);
    }

    #[test]
    fn line_shift_reflects_at_boundaries() {
        let lattice = Lattice::line(4).unwrap();
        let s = shift_operator(&lattice);
        // |↑,4⟩ → |↓,4⟩
        let from = lattice.index(CoinBasis::Up, 4);
        let to = lattice.index(CoinBasis::Down, 4);
        assert_eq!(s.matrix()[(to, from)], c(1.0, 0.0));
        // |↓,1⟩ → |↑,1⟩
        let from = lattice.index(CoinBasis::Down, 1);
        let to = lattice.index(CoinBasis::Up, 1);
        assert_eq!(s.matrix()[(to, from)], c(1.0, 0.0));
    }

    #[test]
    fn cycle_shift_wraps() {
        let lattice = Lattice::cycle(4).unwrap();
        let s = shift_operator(&lattice);
        let from = lattice.index(CoinBasis::Up, 4);
        let to = lattice.index(CoinBasis::Up, 1);
        assert_eq!(s.matrix()[(to, from)], c(1.0, 0.0));
        let from = lattice.index(CoinBasis::Down, 1);
        let to = lattice.index(CoinBasis::Down, 4);
        assert_eq!(s.matrix()[(to, from)], c(1.0, 0.0));
    }

    #[test]
    fn two_cycle_shift_squares_to_identity() {
        let lattice = Lattice::cycle(2).unwrap();
        let s = shift_operator(&lattice);
        let square = s.matrix() * s.matrix();
        let identity = DMatrix::identity(4, 4);
        assert!((square - identity).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn shifts_are_permutations() {
        let mut lattices = Vec::new();
        for n in 2..=9 {
            lattices.push(Lattice::line(n).unwrap());
            lattices.push(Lattice::cycle(n).unwrap());
            lattices.push(Lattice::new(Topology::Line, n, DirectionConvention::Local).unwrap());
            if n % 2 == 0 {
                lattices.push(Lattice::new(Topology::Cycle, n, DirectionConvention::Local).unwrap());
            }
        }
        for lattice in lattices {
            let s = shift_operator(&lattice);
            for col in 0..lattice.dim() {
                let ones = (0..lattice.dim())
                    .filter(|&row| s.matrix()[(row, col)].norm() == 1.0)
                    .count();
                let zeros = (0..lattice.dim())
                    .filter(|&row| s.matrix()[(row, col)].norm() == 0.0)
                    .count();
                assert_eq!(ones, 1, "column {col} of {lattice:?}");
                assert_eq!(zeros, lattice.dim() - 1);
            }
            for row in 0..lattice.dim() {
                let ones = (0..lattice.dim())
                    .filter(|&col| s.matrix()[(row, col)].norm() == 1.0)
                    .count();
                assert_eq!(ones, 1, "row {row} of {lattice:?}");
            }
        }
    }

    fn matrix_power(u: &UnitaryOperator, t: usize) -> DMatrix<Complex64> {
        let mut acc = DMatrix::identity(u.dim(), u.dim());
        for _ in 0..t {
            acc = u.matrix() * acc;
        }
        acc
    }

    fn proportional_to_identity(m: &DMatrix<Complex64>, tol: f64) -> bool {
        let phase = m[(0, 0)];
        if (phase.norm() - 1.0).abs() > tol {
            return false;
        }
        let n = m.nrows();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let expected = if i == j { phase } else { c(0.0, 0.0) };
                (m[(i, j)] - expected).norm() < tol
            })
        })
    }

    #[test]
    fn hadamard_four_cycle_revives_after_eight_steps() {
        let lattice = Lattice::cycle(4).unwrap();
        let u = step_operator(CoinParameters::hadamard(), &lattice);
        let u8 = matrix_power(&u, 8);
        assert!(proportional_to_identity(&u8, 1e-12));
    }

    #[test]
    fn diagonal_coin_line_period_is_twice_the_size() {
        for n in 2..=6 {
            let lattice = Lattice::line(n).unwrap();
            let u = step_operator(CoinParameters::identity(), &lattice);
            let p = matrix_power(&u, 2 * n);
            assert!(proportional_to_identity(&p, 1e-12), "N = {n}");
        }
    }

    #[test]
    fn diagonal_coin_two_cycle_period_two() {
        let lattice = Lattice::cycle(2).unwrap();
        let u = step_operator(CoinParameters::identity(), &lattice);
        let p = matrix_power(&u, 2);
        assert!(proportional_to_identity(&p, 1e-15));
    }

    #[test]
    fn decompose_rotation_block() {
        // The 2-line transfer block.
        let m = Matrix2::new(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let d = decompose_unitary2(&m).unwrap();
        assert_eq!(d.params.rho(), 0.0);
        assert!((d.params.theta() - PI).abs() < 1e-15);
        assert!(d.params.phi().abs() < 1e-15);
        assert_eq!(d.global_phase, 0.0);
        assert!(max_diff(&d.matrix(), &m) < 1e-15);
    }

    #[test]
    fn decompose_hadamard_is_fixed_point() {
        let m = coin_matrix(CoinParameters::hadamard());
        let d = decompose_unitary2(&m).unwrap();
        assert!((d.params.rho() - 0.5).abs() < 1e-15);
        assert!(d.params.theta().abs() < 1e-15);
        assert!(d.params.phi().abs() < 1e-15);
        assert_eq!(d.global_phase, 0.0);
    }

    #[test]
    fn decompose_rejects_non_unitary() {
        let m = Matrix2::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert!(matches!(decompose_unitary2(&m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn decompose_round_trips_on_parameter_grid() {
        // ≥ 11×8×8 grid over (ρ, θ, φ).
        for i in 0..=10 {
            let rho = i as f64 / 10.0;
            for j in 0..8 {
                let theta = TAU * j as f64 / 8.0;
                for k in 0..8 {
                    let phi = TAU * k as f64 / 8.0;
                    let params = CoinParameters::new(rho, theta, phi).unwrap();
                    let m = coin_matrix(params);
                    let d = decompose_unitary2(&m).unwrap();
                    assert!(
                        max_diff(&d.matrix(), &m) < 1e-12,
                        "rho={rho} theta={theta} phi={phi}"
                    );
                }
            }
        }
    }

    #[test]
    fn decompose_round_trips_on_random_unitaries() {
        let mut rng = Lcg::new(0x9e3779b97f4a7c15);
        for draw in 0..1000 {
            let m = random_unitary2(&mut rng);
            let d = decompose_unitary2(&m).unwrap();
            assert!(max_diff(&d.matrix(), &m) < 1e-12, "draw {draw}");
        }
    }

    #[test]
    fn recovery_of_two_line_block() {
        let block = Matrix2::new(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let recovery = recovery_from_transfer_block(&block).unwrap();
        let expected = Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0));
        assert!(max_diff(&recovery.matrix(), &expected) < 1e-15);
        // (ρ′, θ′, φ′) = (0, 0, −π) canonicalized to (0, 0, π).
        assert_eq!(recovery.params.rho(), 0.0);
        assert!(recovery.params.theta().abs() < 1e-15);
        assert!((recovery.params.phi() - PI).abs() < 1e-15);
    }

    #[test]
    fn recovery_of_identity_and_hadamard_blocks() {
        let identity = Matrix2::identity();
        let r = recovery_from_transfer_block(&identity).unwrap();
        assert!(max_diff(&r.matrix(), &identity) < 1e-15);

        let h = coin_matrix(CoinParameters::hadamard());
        let r = recovery_from_transfer_block(&h).unwrap();
        assert!(max_diff(&r.matrix(), &h) < 1e-15);
    }

    #[test]
    fn closed_form_identity_line() {
        let lattice = Lattice::line(3).unwrap();
        let coin = CoinParameters::identity();
        let r = closed_form_recovery(RecoveryCase::IdentityLine, &lattice, coin).unwrap();
        assert_eq!(r.rho(), 0.0);
        assert_eq!(r.theta(), 0.0);
        assert!((r.phi() - PI).abs() < 1e-15);

        let bad = closed_form_recovery(RecoveryCase::IdentityLine, &lattice, CoinParameters::flip());
        assert!(bad.is_err());
    }

    #[test]
    fn closed_form_even_cycle_verified_by_simulation() {
        // N = 4, θ = φ = 0: Θ = π so the recovery is (1, 0, −2π+π) ≡ (1, 0, π).
        let lattice = Lattice::cycle(4).unwrap();
        let coin = CoinParameters::identity();
        let r = closed_form_recovery(RecoveryCase::IdentityCycleEven, &lattice, coin).unwrap();
        assert_eq!(r.rho(), 1.0);
        assert_eq!(r.theta(), 0.0);
        assert!((r.phi() - PI).abs() < 1e-12);

        let u = step_operator(coin, &lattice);
        let initial = bloch_to_coin(1.1, 0.7);
        let state = localized_state(initial, 1, &lattice).unwrap();
        let arrived = evolve(&state, 2, &u).unwrap();
        let recovered_matrix =
            coin_matrix(r).kronecker(&DMatrix::identity(4, 4));
        let recovered = crate::core::WalkState::from_parts(
            &recovered_matrix * arrived.amplitudes(),
            arrived.step_count(),
        );
        let f = fidelity(&recovered, initial, 3).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_flip_local_cycle_verified_by_simulation() {
        // N = 6 has odd N/2 = 3; at θ = φ = 0 the recovery is (0, 0, 0).
        let lattice = Lattice::new(Topology::Cycle, 6, DirectionConvention::Local).unwrap();
        let coin = CoinParameters::flip();
        let r = closed_form_recovery(RecoveryCase::FlipLocalCycleOddHalf, &lattice, coin).unwrap();
        assert_eq!((r.rho(), r.theta(), r.phi()), (0.0, 0.0, 0.0));

        let u = step_operator(coin, &lattice);
        let initial = bloch_to_coin(0.9, 2.3);
        let state = localized_state(initial, 1, &lattice).unwrap();
        let arrived = evolve(&state, 3, &u).unwrap();
        let recovered_matrix =
            coin_matrix(r).kronecker(&DMatrix::identity(6, 6));
        let recovered = crate::core::WalkState::from_parts(
            &recovered_matrix * arrived.amplitudes(),
            arrived.step_count(),
        );
        let f = fidelity(&recovered, initial, 4).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_case_validation() {
        let line = Lattice::line(4).unwrap();
        let cycle4 = Lattice::cycle(4).unwrap();
        let cycle5 = Lattice::cycle(5).unwrap();
        let id = CoinParameters::identity();
        assert!(closed_form_recovery(RecoveryCase::IdentityCycleEven, &line, id).is_err());
        assert!(closed_form_recovery(RecoveryCase::IdentityCycleEven, &cycle5, id).is_err());
        assert!(closed_form_recovery(RecoveryCase::IdentityCycleOdd, &cycle4, id).is_err());
        // Flip case needs the local convention and odd N/2.
        let spatial6 = Lattice::cycle(6).unwrap();
        let local4 = Lattice::new(Topology::Cycle, 4, DirectionConvention::Local).unwrap();
        let flip = CoinParameters::flip();
        assert!(closed_form_recovery(RecoveryCase::FlipLocalCycleOddHalf, &spatial6, flip).is_err());
        assert!(closed_form_recovery(RecoveryCase::FlipLocalCycleOddHalf, &local4, flip).is_err());
    }

    proptest! {
        #[test]
        fn coin_matrix_is_unitary(rho in 0.0..=1.0f64, theta in 0.0..TAU, phi in 0.0..TAU) {
            let params = CoinParameters::new(rho, theta, phi).unwrap();
            prop_assert!(unitarity_residual2(&coin_matrix(params)) < 1e-15);
        }

        #[test]
        fn step_operator_is_unitary(
            rho in 0.0..=1.0f64,
            theta in 0.0..TAU,
            phi in 0.0..TAU,
            n in 2usize..=8,
            cycle in proptest::bool::ANY,
        ) {
            let params = CoinParameters::new(rho, theta, phi).unwrap();
            let lattice = if cycle { Lattice::cycle(n).unwrap() } else { Lattice::line(n).unwrap() };
            let u = step_operator(params, &lattice);
            prop_assert!(crate::core::unitarity_residual(u.matrix()) < 1e-12);
        }
    }
}
