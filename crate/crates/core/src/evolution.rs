//! Time-stepping by dense operator application and by the iterative
//! amplitude map, probabilities, fidelities, and periodicity detection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::core::{CoinBasis, CoinParameters, CoinState, DirectionConvention, Lattice, Topology,
    UnitaryOperator, WalkState};
use crate::error::{Error, Result};
use crate::operators::{Matrix2, BLOCK_TOLERANCE};

/// `U^{t*} = e^{i·phase}·I` must hold entrywise within this tolerance for a
/// period to be reported.
pub const PERIODICITY_TOLERANCE: f64 = 1e-9;

/// The 2×2 sub-matrix of `U^t` mapping coin amplitudes at the source site to
/// coin amplitudes at the target site, with its unitarity residual.
///
/// A residual below [`BLOCK_TOLERANCE`] means every initial coin state
/// arrives at the target with probability 1 after `t` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferBlock {
    pub t: usize,
    pub source: usize,
    pub target: usize,
    pub block: Matrix2,
    pub residual: f64,
}

impl TransferBlock {
    /// Whether the block certifies an exact transfer.
    pub fn is_perfect(&self) -> bool {
        self.residual < BLOCK_TOLERANCE
    }
}

/// Smallest `t*` with `U^{t*}` proportional to the identity, and the
/// proportionality phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicityResult {
    pub period: usize,
    pub phase: f64,
}

/// Apply `U` to the state `steps` times.
pub fn evolve(state: &WalkState, steps: usize, u: &UnitaryOperator) -> Result<WalkState> {
    if u.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), actual: state.dim() });
    }
    let mut amplitudes = state.amplitudes().clone();
    for _ in 0..steps {
        amplitudes = u.matrix() * amplitudes;
    }
    Ok(WalkState::from_parts(amplitudes, state.step_count() + steps))
}

/// Advance the walk by the iterative amplitude map
///
/// ```text
/// α' (x) = α(x−1)·√ρ        + β(x−1)·√(1−ρ)·e^{iθ}
/// β' (x) = α(x+1)·√(1−ρ)·e^{iφ} − β(x+1)·√ρ·e^{i(θ+φ)}
/// ```
///
/// with cyclic index wrap on cycles. On lines the would-be outflow at the
/// first (last) site re-enters as the opposite coin component at the same
/// site, mirroring the reflecting shift. Only the spatial convention is
/// encoded; use the dense path for local-convention lattices.
pub fn evolve_map(
    state: &WalkState,
    steps: usize,
    coin: CoinParameters,
    lattice: &Lattice,
) -> Result<WalkState> {
    if lattice.convention() != DirectionConvention::Spatial {
        return Err(Error::MapNeedsSpatial);
    }
    if state.dim() != lattice.dim() {
        return Err(Error::DimensionMismatch { expected: lattice.dim(), actual: state.dim() });
    }
    let n = lattice.n_sites();
    let sqrt_rho = Complex64::new(coin.rho().sqrt(), 0.0);
    let sqrt_rest = (1.0 - coin.rho()).sqrt();
    let up_mix = Complex64::from_polar(sqrt_rest, coin.theta());
    let down_mix = Complex64::from_polar(sqrt_rest, coin.phi());
    let down_keep = -sqrt_rho * Complex64::from_polar(1.0, coin.theta() + coin.phi());

    let mut alpha: Vec<Complex64> = state.amplitudes().as_slice()[..n].to_vec();
    let mut beta: Vec<Complex64> = state.amplitudes().as_slice()[n..].to_vec();
    let mut right = vec![Complex64::new(0.0, 0.0); n];
    let mut left = vec![Complex64::new(0.0, 0.0); n];

    for _ in 0..steps {
        for x in 0..n {
            right[x] = alpha[x] * sqrt_rho + beta[x] * up_mix;
            left[x] = alpha[x] * down_mix + beta[x] * down_keep;
        }
        match lattice.topology() {
            Topology::Line => {
                for x in (1..n).rev() {
                    alpha[x] = right[x - 1];
                }
                alpha[0] = left[0];
                beta[..n - 1].copy_from_slice(&left[1..n]);
                beta[n - 1] = right[n - 1];
            }
            Topology::Cycle => {
                for x in 0..n {
                    alpha[x] = right[(x + n - 1) % n];
                }
                for x in 0..n {
                    beta[x] = left[(x + 1) % n];
                }
            }
        }
    }

    let mut amplitudes = DVector::from_element(2 * n, Complex64::new(0.0, 0.0));
    for x in 0..n {
        amplitudes[x] = alpha[x];
        amplitudes[n + x] = beta[x];
    }
    Ok(WalkState::from_parts(amplitudes, state.step_count() + steps))
}

/// Apply a coin-only operator `m ⊗ I` without forming the Kronecker product.
pub fn apply_coin(state: &WalkState, m: &Matrix2) -> WalkState {
    let n = state.n_sites();
    let mut amplitudes = DVector::from_element(2 * n, Complex64::new(0.0, 0.0));
    for x in 0..n {
        let a = state.amplitudes()[x];
        let b = state.amplitudes()[n + x];
        amplitudes[x] = m[(0, 0)] * a + m[(0, 1)] * b;
        amplitudes[n + x] = m[(1, 0)] * a + m[(1, 1)] * b;
    }
    WalkState::from_parts(amplitudes, state.step_count())
}

/// `P_{t,x} = |α_{t,x}|² + |β_{t,x}|²` at the given 1-based site.
pub fn site_probability(state: &WalkState, site: usize) -> Result<f64> {
    let n = state.n_sites();
    if site == 0 || site > n {
        return Err(Error::SiteOutOfRange { site, n_sites: n });
    }
    Ok(state.amplitude(CoinBasis::Up, site).norm_sqr()
        + state.amplitude(CoinBasis::Down, site).norm_sqr())
}

/// `|⟨target_coin ⊗ target_site | state⟩|`, invariant under global phases
/// of either argument.
pub fn fidelity(state: &WalkState, target_coin: CoinState, target_site: usize) -> Result<f64> {
    let n = state.n_sites();
    if target_site == 0 || target_site > n {
        return Err(Error::SiteOutOfRange { site: target_site, n_sites: n });
    }
    let overlap = target_coin.alpha().conj() * state.amplitude(CoinBasis::Up, target_site)
        + target_coin.beta().conj() * state.amplitude(CoinBasis::Down, target_site);
    Ok(overlap.norm())
}

pub(crate) fn extract_block(
    power: &DMatrix<Complex64>,
    n_sites: usize,
    source: usize,
    target: usize,
) -> Matrix2 {
    let src_up = source - 1;
    let src_down = n_sites + source - 1;
    let dst_up = target - 1;
    let dst_down = n_sites + target - 1;
    Matrix2::new(
        power[(dst_up, src_up)],
        power[(dst_up, src_down)],
        power[(dst_down, src_up)],
        power[(dst_down, src_down)],
    )
}

pub(crate) fn block_residual(block: &Matrix2) -> f64 {
    let gram = block.adjoint() * block;
    let mut residual = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let expected = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            residual = residual.max((gram[(i, j)] - expected).norm());
        }
    }
    residual
}

/// The coin-to-coin block of `U^t` from the source site to the target site.
pub fn transfer_block(
    u: &UnitaryOperator,
    t: usize,
    source: usize,
    target: usize,
) -> Result<TransferBlock> {
    let n = u.dim() / 2;
    for site in [source, target] {
        if site == 0 || site > n {
            return Err(Error::SiteOutOfRange { site, n_sites: n });
        }
    }
    // Binary exponentiation; t can be large for long-time analyses.
    let mut acc = DMatrix::<Complex64>::identity(u.dim(), u.dim());
    let mut base = u.matrix().clone();
    let mut exp = t;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        exp >>= 1;
    }
    let block = extract_block(&acc, n, source, target);
    Ok(TransferBlock { t, source, target, block, residual: block_residual(&block) })
}

fn identity_proportionality(power: &DMatrix<Complex64>) -> Option<f64> {
    let dim = power.nrows();
    let mut phase_entry = power[(0, 0)];
    for i in 1..dim {
        if power[(i, i)].norm() > phase_entry.norm() {
            phase_entry = power[(i, i)];
        }
    }
    if (phase_entry.norm() - 1.0).abs() > PERIODICITY_TOLERANCE {
        return None;
    }
    let phase = phase_entry.arg();
    let reference = Complex64::from_polar(1.0, phase);
    for i in 0..dim {
        for j in 0..dim {
            let expected = if i == j { reference } else { Complex64::new(0.0, 0.0) };
            if (power[(i, j)] - expected).norm() > PERIODICITY_TOLERANCE {
                return None;
            }
        }
    }
    Some(phase)
}

/// Smallest `t* ≤ horizon` with `U^{t*} ∝ I`, if any. The phase is read from
/// the largest-modulus diagonal entry of `U^{t*}`.
pub fn detect_periodicity(u: &UnitaryOperator, horizon: usize) -> Result<Option<PeriodicityResult>> {
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    let mut power = DMatrix::<Complex64>::identity(u.dim(), u.dim());
    for t in 1..=horizon {
        power = u.matrix() * power;
        if let Some(phase) = identity_proportionality(&power) {
            return Ok(Some(PeriodicityResult { period: t, phase }));
        }
    }
    Ok(None)
}

/// Number of distinct sites on which the coin state localizes under repeated
/// application of a composite step, counted until the first return to the
/// start site.
///
/// The composite (for instance a recovery followed by `t` walk steps) must
/// relocalize every coin state on a common site with the coin conserved up
/// to a global phase at each application; the count includes the start site.
pub fn n_periodicity(
    u_composite: &UnitaryOperator,
    start_site: usize,
    horizon: usize,
) -> Result<u32> {
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    let n = u_composite.dim() / 2;
    if start_site == 0 || start_site > n {
        return Err(Error::SiteOutOfRange { site: start_site, n_sites: n });
    }
    let mut power = DMatrix::<Complex64>::identity(u_composite.dim(), u_composite.dim());
    let mut visited = vec![false; n + 1];
    visited[start_site] = true;
    let mut count = 1u32;
    for _ in 1..=horizon {
        power = u_composite.matrix() * power;
        let localized = (1..=n).find(|&site| {
            let block = extract_block(&power, n, start_site, site);
            // Coin conserved at a localization event: block ∝ I.
            let phase = block[(0, 0)];
            if (phase.norm() - 1.0).abs() > PERIODICITY_TOLERANCE {
                return false;
            }
            let deviation = (block[(1, 1)] - phase)
                .norm()
                .max(block[(0, 1)].norm())
                .max(block[(1, 0)].norm());
            deviation < PERIODICITY_TOLERANCE
        });
        match localized {
            Some(site) if site == start_site => return Ok(count),
            Some(site) if !visited[site] => {
                visited[site] = true;
                count += 1;
            }
            _ => {}
        }
    }
    Err(Error::HorizonExhausted(horizon))
}
