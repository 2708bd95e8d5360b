//! End-to-end transfer certification, recovery synthesis, parameter sweeps,
//! fidelity maps and long-time peak analysis.
//!
//! Certification works at operator level: a walk transfers perfectly after
//! `t` steps exactly when the 2×2 coin block of `U^t` from the source to
//! the target site is unitary, which covers every initial coin state at
//! once. Bloch-sphere sampling is kept as a cross-check on top of that.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

use crate::core::{
    localized_state, CoinParameters, CoinState, DirectionConvention, Lattice, Topology,
    UnitaryOperator, WalkState,
};
use crate::error::{Error, Result};
use crate::evolution::{
    apply_coin, block_residual, detect_periodicity, extract_block, fidelity, n_periodicity,
    site_probability, PeriodicityResult,
};
use crate::operators::{
    coin_matrix, recovery_from_transfer_block, step_operator, Matrix2, BLOCK_TOLERANCE,
};

/// Certified transfers must restore every sampled state with fidelity above
/// `1 −` this tolerance.
pub const FIDELITY_TOLERANCE: f64 = 1e-9;

/// Default exact-transfer search horizon is this factor times the site count.
pub const DEFAULT_HORIZON_FACTOR: usize = 50;

/// Default peak threshold for long-time probability analyses.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.5;

/// 64 coin states on an 8×8 Bloch-angle grid; the first and last rows are
/// the poles.
pub fn sample_bloch_states() -> Vec<CoinState> {
    let mut states = Vec::with_capacity(64);
    for i in 0..8 {
        let theta_b = PI * i as f64 / 7.0;
        for j in 0..8 {
            let phi_b = TAU * j as f64 / 8.0;
            states.push(crate::core::bloch_to_coin(theta_b, phi_b));
        }
    }
    states
}

/// Outcome of a transfer certification run.
#[derive(Debug, Clone, Serialize)]
pub struct PstReport {
    pub schema: u32,
    pub lattice: Lattice,
    pub coin: CoinParameters,
    pub transfer_time: Option<usize>,
    pub target: Option<usize>,
    pub recovery: Option<CoinParameters>,
    pub global_phase: Option<f64>,
    pub period: Option<PeriodicityResult>,
    pub n_period: Option<u32>,
    pub certified: bool,
    pub residual: f64,
}

/// Max-over-time fidelity at the target site for a grid of initial Bloch
/// states, target coin equal to the initial coin.
#[derive(Debug, Clone, Serialize)]
pub struct FidelityMap {
    pub theta_values: Vec<f64>,
    pub phi_values: Vec<f64>,
    /// `values[i][j]` belongs to `(theta_values[i], phi_values[j])`.
    pub values: Vec<Vec<f64>>,
    pub horizon: usize,
}

impl FidelityMap {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Strict local maxima of the site probability above a threshold.
#[derive(Debug, Clone, Serialize)]
pub struct PeakAnalysis {
    pub site: usize,
    pub threshold: f64,
    pub horizon: usize,
    pub peak_times: Vec<usize>,
    pub peak_values: Vec<f64>,
    pub gaps: Vec<usize>,
}

/// One simulated-versus-closed-form comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormCheck {
    pub case: &'static str,
    pub topology: Topology,
    pub n_sites: usize,
    pub l: Option<usize>,
    pub theta: f64,
    pub phi: f64,
    pub t: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub checks: Vec<ClosedFormCheck>,
    pub max_deviation: f64,
}

/// Transfer behaviour of the anti-diagonal coin on a local-convention line.
#[derive(Debug, Clone, Serialize)]
pub struct FlipLineWitness {
    pub n_sites: usize,
    pub horizon: usize,
    /// Max over time of the target-site probability for `(α, β) = (1, 1)/√2`.
    pub balanced_max_target_probability: f64,
    pub balanced_max_time: usize,
    /// Min over time of the source-site probability when starting from `|↑⟩`.
    pub up_min_source_probability: f64,
    /// Max over time of the target-site probability when starting from `|↓⟩`.
    pub down_max_target_probability: f64,
}

fn verify_recovery_on_block(block: &Matrix2, recovery: &Matrix2) -> bool {
    sample_bloch_states().iter().all(|state| {
        let alpha = state.alpha();
        let beta = state.beta();
        let arrived_up = block[(0, 0)] * alpha + block[(0, 1)] * beta;
        let arrived_down = block[(1, 0)] * alpha + block[(1, 1)] * beta;
        let restored_up = recovery[(0, 0)] * arrived_up + recovery[(0, 1)] * arrived_down;
        let restored_down = recovery[(1, 0)] * arrived_up + recovery[(1, 1)] * arrived_down;
        let overlap = alpha.conj() * restored_up + beta.conj() * restored_down;
        overlap.norm() > 1.0 - FIDELITY_TOLERANCE
    })
}

/// Search for the smallest `t ≤ horizon` at which every coin state is
/// relocated from site 1 to the antipodal site, synthesize the recovery
/// coin, verify it on 64 sampled Bloch states, and attach periodicity and
/// n-periodicity classifications.
///
/// With no qualifying `t` the report carries `certified = false` and the
/// smallest block residual seen, plus the periodicity result as a
/// diagnostic.
pub fn check_pst(lattice: &Lattice, coin: CoinParameters, horizon: usize) -> Result<PstReport> {
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    let target = lattice
        .target_site()
        .ok_or(Error::NoAntipode(lattice.n_sites()))?;
    let source = lattice.source_site();
    let n = lattice.n_sites();
    let u = step_operator(coin, lattice);

    let mut power = DMatrix::<Complex64>::identity(u.dim(), u.dim());
    let mut best_residual = f64::INFINITY;
    for t in 1..=horizon {
        power = u.matrix() * &power;
        let block = extract_block(&power, n, source, target);
        let residual = block_residual(&block);
        best_residual = best_residual.min(residual);
        if residual >= BLOCK_TOLERANCE {
            continue;
        }
        let recovery = recovery_from_transfer_block(&block)?;
        let recovery_matrix = recovery.matrix();
        if !verify_recovery_on_block(&block, &recovery_matrix) {
            continue;
        }
        let period = detect_periodicity(&u, horizon)?;
        let composite = UnitaryOperator::from_matrix_unchecked(
            recovery_matrix.kronecker(&DMatrix::identity(n, n)) * &power,
        );
        let n_period = n_periodicity(&composite, source, n + 1).ok();
        return Ok(PstReport {
            schema: 1,
            lattice: *lattice,
            coin,
            transfer_time: Some(t),
            target: Some(target),
            recovery: Some(recovery.params),
            global_phase: Some(recovery.global_phase),
            period,
            n_period,
            certified: true,
            residual,
        });
    }

    Ok(PstReport {
        schema: 1,
        lattice: *lattice,
        coin,
        transfer_time: None,
        target: Some(target),
        recovery: None,
        global_phase: None,
        period: detect_periodicity(&u, horizon)?,
        n_period: None,
        certified: false,
        residual: best_residual,
    })
}

/// Run [`check_pst`] over a grid of lattices and coins with `φ = 0`,
/// returning the certified cases only. Odd cycles are skipped (they have no
/// antipodal site); the per-lattice horizon is `horizon_factor · N`.
pub fn sweep(
    topology: Topology,
    n_sites: &[usize],
    rho_grid: &[f64],
    theta_grid: &[f64],
    horizon_factor: usize,
) -> Result<Vec<PstReport>> {
    let mut reports = Vec::new();
    for &n in n_sites {
        if topology == Topology::Cycle && n % 2 != 0 {
            continue;
        }
        let lattice = Lattice::new(topology, n, DirectionConvention::Spatial)?;
        for &rho in rho_grid {
            for &theta in theta_grid {
                let coin = CoinParameters::new(rho, theta, 0.0)?;
                let report = check_pst(&lattice, coin, horizon_factor.max(1) * n)?;
                if report.certified {
                    reports.push(report);
                }
            }
        }
    }
    Ok(reports)
}

/// Default sweep grid for the coin bias: `{0, 1/8, …, 1}`.
pub fn default_rho_grid() -> Vec<f64> {
    (0..=8).map(|k| k as f64 / 8.0).collect()
}

fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    let step = (end - start) / (count - 1) as f64;
    (0..count)
        .map(|i| if i == count - 1 { end } else { start + step * i as f64 })
        .collect()
}

/// Max-over-time fidelity at the antipodal site for every initial coin
/// state on a `resolution.0 × resolution.1` Bloch-angle grid spanning
/// `θ_b ∈ [0, π]`, `φ_b ∈ [0, 2π]`, both ends included.
pub fn fidelity_map(
    lattice: &Lattice,
    coin: CoinParameters,
    resolution: (usize, usize),
    horizon: usize,
) -> Result<FidelityMap> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::GridTooCoarse(resolution.0, resolution.1));
    }
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    let target = lattice
        .target_site()
        .ok_or(Error::NoAntipode(lattice.n_sites()))?;
    let source = lattice.source_site();
    let n = lattice.n_sites();
    let theta_values = linspace(0.0, PI, resolution.0);
    let phi_values = linspace(0.0, TAU, resolution.1);
    let states: Vec<Vec<CoinState>> = theta_values
        .iter()
        .map(|&tb| phi_values.iter().map(|&pb| crate::core::bloch_to_coin(tb, pb)).collect())
        .collect();

    let u = step_operator(coin, lattice);
    let mut power = DMatrix::<Complex64>::identity(u.dim(), u.dim());
    let mut values = vec![vec![0.0f64; resolution.1]; resolution.0];
    for _ in 1..=horizon {
        power = u.matrix() * &power;
        let block = extract_block(&power, n, source, target);
        for (row, state_row) in states.iter().enumerate() {
            for (col, state) in state_row.iter().enumerate() {
                let alpha = state.alpha();
                let beta = state.beta();
                let arrived_up = block[(0, 0)] * alpha + block[(0, 1)] * beta;
                let arrived_down = block[(1, 0)] * alpha + block[(1, 1)] * beta;
                let overlap = alpha.conj() * arrived_up + beta.conj() * arrived_down;
                let f = overlap.norm();
                if f > values[row][col] {
                    values[row][col] = f;
                }
            }
        }
    }
    Ok(FidelityMap { theta_values, phi_values, values, horizon })
}

/// Strict local maxima of `P_{t,site}` above `threshold` for `t ≤ horizon`,
/// with the inter-peak gaps.
pub fn peak_analysis(
    lattice: &Lattice,
    coin: CoinParameters,
    initial: CoinState,
    site: usize,
    horizon: usize,
    threshold: f64,
) -> Result<PeakAnalysis> {
    lattice.check_site(site)?;
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::BadThreshold(threshold));
    }
    let u = step_operator(coin, lattice);
    let mut state = localized_state(initial, lattice.source_site(), lattice)?;
    let mut series = Vec::with_capacity(horizon + 1);
    series.push(site_probability(&state, site)?);
    for _ in 1..=horizon {
        state = crate::evolution::evolve(&state, 1, &u)?;
        series.push(site_probability(&state, site)?);
    }
    let mut peak_times = Vec::new();
    let mut peak_values = Vec::new();
    for t in 1..horizon {
        if series[t] > threshold && series[t] > series[t - 1] && series[t] > series[t + 1] {
            peak_times.push(t);
            peak_values.push(series[t]);
        }
    }
    let gaps = peak_times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(PeakAnalysis { site, threshold, horizon, peak_times, peak_values, gaps })
}

struct BasisPairWalk {
    up: WalkState,
    down: WalkState,
    t: usize,
}

impl BasisPairWalk {
    fn new(lattice: &Lattice) -> Self {
        Self {
            up: localized_state(CoinState::up(), 1, lattice).unwrap(),
            down: localized_state(CoinState::down(), 1, lattice).unwrap(),
            t: 0,
        }
    }

    fn advance_to(&mut self, t: usize, u: &UnitaryOperator) {
        while self.t < t {
            self.up = crate::evolution::evolve(&self.up, 1, u).unwrap();
            self.down = crate::evolution::evolve(&self.down, 1, u).unwrap();
            self.t += 1;
        }
    }

    /// The coin block at `site`: columns are the evolved basis states.
    fn block_at(&self, site: usize) -> Matrix2 {
        Matrix2::new(
            self.up.amplitude(crate::core::CoinBasis::Up, site),
            self.down.amplitude(crate::core::CoinBasis::Up, site),
            self.up.amplitude(crate::core::CoinBasis::Down, site),
            self.down.amplitude(crate::core::CoinBasis::Down, site),
        )
    }
}

fn block_deviation(actual: &Matrix2, expected: &Matrix2) -> f64 {
    (actual - expected).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Compare simulated states against the closed forms for the diagonal-coin
/// walks on lines and cycles and the anti-diagonal coin on local-convention
/// even cycles, including all phases. Lines are checked at `t = N(2l−1)`
/// and `t = 2Nl`, cycles at `t = N/2` (even `N`) and `t = N`.
pub fn verify_closed_forms(
    max_n: usize,
    l_max: usize,
    angle_grid: &[f64],
) -> Result<ClosedFormReport> {
    if max_n < 2 {
        return Err(Error::LatticeTooSmall(max_n));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut checks = Vec::new();

    for &theta in angle_grid {
        for &phi in angle_grid {
            // Diagonal coin on lines: transfers at odd multiples of N and
            // revives at even multiples, with phase Θ = (θ+φ)N + μπ.
            let coin = CoinParameters::new(1.0, theta, phi)?;
            for n in 2..=max_n {
                let lattice = Lattice::line(n)?;
                let u = step_operator(coin, &lattice);
                let mu = if n % 2 == 0 { 0.0 } else { 1.0 };
                let big_theta = (theta + phi) * n as f64 + mu * PI;
                let mut walk = BasisPairWalk::new(&lattice);
                for l in 1..=l_max {
                    let t_transfer = n * (2 * l - 1);
                    walk.advance_to(t_transfer, &u);
                    let expected = Matrix2::new(
                        zero,
                        -Complex64::from_polar(1.0, theta + phi),
                        one,
                        zero,
                    ) * Complex64::from_polar(1.0, (l - 1) as f64 * big_theta);
                    checks.push(ClosedFormCheck {
                        case: "diagonal-line-transfer",
                        topology: Topology::Line,
                        n_sites: n,
                        l: Some(l),
                        theta,
                        phi,
                        t: t_transfer,
                        deviation: block_deviation(&walk.block_at(n), &expected),
                    });

                    let t_revival = 2 * n * l;
                    walk.advance_to(t_revival, &u);
                    let expected = Matrix2::identity()
                        * Complex64::from_polar(1.0, l as f64 * big_theta);
                    checks.push(ClosedFormCheck {
                        case: "diagonal-line-revival",
                        topology: Topology::Line,
                        n_sites: n,
                        l: Some(l),
                        theta,
                        phi,
                        t: t_revival,
                        deviation: block_deviation(&walk.block_at(1), &expected),
                    });
                }
            }

            // Diagonal coin on cycles: the down component gains e^{iΘ} per
            // step with Θ = θ + φ + π.
            for n in 2..=max_n {
                let lattice = Lattice::cycle(n)?;
                let u = step_operator(coin, &lattice);
                let big_theta = theta + phi + PI;
                let mut walk = BasisPairWalk::new(&lattice);
                if n % 2 == 0 {
                    let t_half = n / 2;
                    walk.advance_to(t_half, &u);
                    let expected = Matrix2::new(
                        one,
                        zero,
                        zero,
                        Complex64::from_polar(1.0, n as f64 * big_theta / 2.0),
                    );
                    checks.push(ClosedFormCheck {
                        case: "diagonal-cycle-antipode",
                        topology: Topology::Cycle,
                        n_sites: n,
                        l: None,
                        theta,
                        phi,
                        t: t_half,
                        deviation: block_deviation(&walk.block_at(n / 2 + 1), &expected),
                    });
                }
                walk.advance_to(n, &u);
                let expected = Matrix2::new(
                    one,
                    zero,
                    zero,
                    Complex64::from_polar(1.0, n as f64 * big_theta),
                );
                checks.push(ClosedFormCheck {
                    case: "diagonal-cycle-return",
                    topology: Topology::Cycle,
                    n_sites: n,
                    l: None,
                    theta,
                    phi,
                    t: n,
                    deviation: block_deviation(&walk.block_at(1), &expected),
                });
            }

            // Anti-diagonal coin on local-convention even cycles: arrival at
            // the antipode after N/2 steps, coin restored for even N/2 and
            // swapped with phases for odd N/2, overall phase ⌊N/4⌋(θ+φ).
            let flip = CoinParameters::new(0.0, theta, phi)?;
            for n in (2..=max_n).step_by(2) {
                let lattice = Lattice::new(Topology::Cycle, n, DirectionConvention::Local)?;
                let u = step_operator(flip, &lattice);
                let mut walk = BasisPairWalk::new(&lattice);
                walk.advance_to(n / 2, &u);
                let core = if (n / 2) % 2 == 0 {
                    Matrix2::identity()
                } else {
                    Matrix2::new(
                        zero,
                        Complex64::from_polar(1.0, theta),
                        Complex64::from_polar(1.0, phi),
                        zero,
                    )
                };
                let overall = Complex64::from_polar(1.0, (n / 4) as f64 * (theta + phi));
                checks.push(ClosedFormCheck {
                    case: "flip-local-cycle-antipode",
                    topology: Topology::Cycle,
                    n_sites: n,
                    l: None,
                    theta,
                    phi,
                    t: n / 2,
                    deviation: block_deviation(&walk.block_at(n / 2 + 1), &(core * overall)),
                });
            }
        }
    }

    let max_deviation = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
    Ok(ClosedFormReport { checks, max_deviation })
}

/// Track how the anti-diagonal coin behaves on a local-convention line:
/// reports the reachable target-site probability for a balanced initial
/// state and for the two basis states.
pub fn flip_line_witness(n_sites: usize, horizon: usize) -> Result<FlipLineWitness> {
    if horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    let lattice = Lattice::new(Topology::Line, n_sites, DirectionConvention::Local)?;
    let coin = CoinParameters::flip();
    let u = step_operator(coin, &lattice);
    let target = lattice.target_site().expect("lines always have a last site");
    let balanced = CoinState::new(
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
    )
    .expect("normalized");

    let mut balanced_state = localized_state(balanced, 1, &lattice)?;
    let mut up_state = localized_state(CoinState::up(), 1, &lattice)?;
    let mut down_state = localized_state(CoinState::down(), 1, &lattice)?;
    let mut balanced_max = site_probability(&balanced_state, target)?;
    let mut balanced_max_time = 0;
    let mut up_min_source = site_probability(&up_state, 1)?;
    let mut down_max = site_probability(&down_state, target)?;
    for t in 1..=horizon {
        balanced_state = crate::evolution::evolve(&balanced_state, 1, &u)?;
        up_state = crate::evolution::evolve(&up_state, 1, &u)?;
        down_state = crate::evolution::evolve(&down_state, 1, &u)?;
        let p = site_probability(&balanced_state, target)?;
        if p > balanced_max {
            balanced_max = p;
            balanced_max_time = t;
        }
        up_min_source = up_min_source.min(site_probability(&up_state, 1)?);
        down_max = down_max.max(site_probability(&down_state, target)?);
    }
    Ok(FlipLineWitness {
        n_sites,
        horizon,
        balanced_max_target_probability: balanced_max,
        balanced_max_time,
        up_min_source_probability: up_min_source,
        down_max_target_probability: down_max,
    })
}

/// Replay a certified report end to end on the full state space: build the
/// step operator, evolve each sampled Bloch state for the transfer time,
/// apply the recovery coin, and check the fidelity against the initial
/// state at the target site.
pub fn replay_certified(report: &PstReport) -> Result<bool> {
    let (Some(t), Some(target), Some(recovery), Some(global_phase)) = (
        report.transfer_time,
        report.target,
        report.recovery,
        report.global_phase,
    ) else {
        return Ok(false);
    };
    let u = step_operator(report.coin, &report.lattice);
    let recovery_matrix =
        coin_matrix(recovery) * Complex64::from_polar(1.0, global_phase);
    for initial in sample_bloch_states() {
        let state = localized_state(initial, report.lattice.source_site(), &report.lattice)?;
        let arrived = crate::evolution::evolve(&state, t, &u)?;
        let restored = apply_coin(&arrived, &recovery_matrix);
        if fidelity(&restored, initial, target)? <= 1.0 - FIDELITY_TOLERANCE {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::bloch_to_coin;
    use crate::operators::phase_distance;

    #[test]
    fn bloch_sample_has_64_states_with_poles() {
        let states = sample_bloch_states();
        assert_eq!(states.len(), 64);
        assert!(states[..8]
            .iter()
            .all(|s| (s.alpha() - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(states[56..].iter().all(|s| s.alpha().norm() < 1e-15));
    }

    #[test]
    fn two_line_quarter_bias_certifies_at_six_steps() {
        let lattice = Lattice::line(2).unwrap();
        let coin = CoinParameters::new(0.25, 0.0, 0.0).unwrap();
        let report = check_pst(&lattice, coin, 100).unwrap();
        assert!(report.certified);
        assert_eq!(report.transfer_time, Some(6));
        assert_eq!(report.target, Some(2));
        let recovery = report.recovery.unwrap();
        // (0, 0, −π) canonicalized to (0, 0, π).
        assert!(recovery.rho() < 1e-18);
        assert!(recovery.theta().abs() < 1e-9);
        assert!((recovery.phi() - PI).abs() < 1e-9);
        assert_eq!(report.period.unwrap().period, 12);
        assert_eq!(report.n_period, Some(2));
        assert!(replay_certified(&report).unwrap());
    }

    #[test]
    fn hadamard_four_cycle_certifies_with_trivial_recovery() {
        let lattice = Lattice::cycle(4).unwrap();
        let report = check_pst(&lattice, CoinParameters::hadamard(), 200).unwrap();
        assert!(report.certified);
        assert_eq!(report.transfer_time, Some(4));
        assert_eq!(report.target, Some(3));
        let matrix = coin_matrix(report.recovery.unwrap())
            * Complex64::from_polar(1.0, report.global_phase.unwrap());
        assert!(phase_distance(&matrix, &Matrix2::identity()) < 1e-9);
        assert_eq!(report.period.unwrap().period, 8);
        assert_eq!(report.n_period, Some(2));
    }

    #[test]
    fn hadamard_six_line_does_not_certify() {
        let lattice = Lattice::line(6).unwrap();
        let report = check_pst(&lattice, CoinParameters::hadamard(), 300).unwrap();
        assert!(!report.certified);
        assert_eq!(report.transfer_time, None);
        assert!(report.residual > 1e-3);
    }

    #[test]
    fn check_pst_rejects_odd_cycles_and_empty_horizons() {
        let odd = Lattice::cycle(5).unwrap();
        assert!(matches!(
            check_pst(&odd, CoinParameters::hadamard(), 10),
            Err(Error::NoAntipode(5))
        ));
        let line = Lattice::line(2).unwrap();
        assert!(matches!(
            check_pst(&line, CoinParameters::hadamard(), 0),
            Err(Error::EmptyHorizon)
        ));
    }

    #[test]
    fn two_cycle_certifies_for_any_coin_with_inverse_recovery() {
        let lattice = Lattice::cycle(2).unwrap();
        for (rho, theta, phi) in [(0.3, 0.4, 1.9), (0.8, 5.1, 0.2), (0.0, 1.0, 2.0)] {
            let coin = CoinParameters::new(rho, theta, phi).unwrap();
            let report = check_pst(&lattice, coin, 50).unwrap();
            assert!(report.certified, "coin {coin:?}");
            assert_eq!(report.transfer_time, Some(1));
            let recovery_matrix = coin_matrix(report.recovery.unwrap());
            let expected = coin_matrix(coin).adjoint();
            assert!(phase_distance(&recovery_matrix, &expected) < 1e-9);
            assert_eq!(report.n_period, Some(2));
        }
    }

    #[test]
    fn sweep_with_empty_grid_is_empty() {
        let reports = sweep(Topology::Line, &[2, 3], &[], &[0.0], 50).unwrap();
        assert!(reports.is_empty());
    }

    type Vec2 = nalgebra::Vector2<Complex64>;

    fn as_vec2(s: CoinState) -> Vec2 {
        Vec2::new(s.alpha(), s.beta())
    }

    fn perp(v: &Vec2) -> Vec2 {
        Vec2::new(-v[1].conj(), v[0].conj())
    }

    /// The unique-up-to-phase unitary mapping `fin_a ∝→ out_a` and
    /// `fin_b ∝→ out_b` for two non-orthogonal pairs.
    fn recovery_from_two_pairs(fin_a: &Vec2, out_a: &Vec2, fin_b: &Vec2, out_b: &Vec2) -> Matrix2 {
        let fin_perp = perp(fin_a);
        let out_perp = perp(out_a);
        let c1 = fin_a.dotc(fin_b);
        let c2 = fin_perp.dotc(fin_b);
        // R fin_b = c1·out_a + μ·c2·out_perp must be orthogonal to out_b⊥.
        let out_b_perp = perp(out_b);
        let mu = -(out_b_perp.dotc(&(out_a * c1))) / out_b_perp.dotc(&(out_perp * c2));
        out_a * fin_a.adjoint() + out_perp * mu * fin_perp.adjoint()
    }

    #[test]
    fn recovery_is_unique_across_initial_states() {
        // Recoveries reconstructed from different (initial, final) pairs
        // agree with the canonical one up to a global phase.
        let lattice = Lattice::line(2).unwrap();
        let coin = CoinParameters::hadamard();
        let u = step_operator(coin, &lattice);
        let block = crate::evolution::transfer_block(&u, 4, 1, 2).unwrap().block;
        let canonical = recovery_from_transfer_block(&block).unwrap().matrix();

        let reference = as_vec2(bloch_to_coin(0.4, 0.3));
        let reference_final = block * reference;
        for k in 1..=10 {
            let other = as_vec2(bloch_to_coin(0.2 + 0.25 * k as f64, 0.5 * k as f64));
            if reference.dotc(&other).norm() < 1e-3 {
                continue;
            }
            let derived = recovery_from_two_pairs(
                &reference_final,
                &reference,
                &(block * other),
                &other,
            );
            let distance = phase_distance(&derived, &canonical);
            assert!(distance < 1e-9, "state {k}: distance {distance}");
        }
    }

    #[test]
    fn two_cycle_with_recovery_has_unit_fidelity_everywhere() {
        // Appending the inverse coin turns the one-step 2-cycle transfer
        // into an exact relocation of every Bloch state.
        let lattice = Lattice::cycle(2).unwrap();
        let coin = CoinParameters::hadamard();
        let u = step_operator(coin, &lattice);
        let recovery = coin_matrix(coin).adjoint();
        for theta_row in 0..9 {
            for phi_col in 0..9 {
                let initial = crate::core::bloch_to_coin(
                    PI * theta_row as f64 / 8.0,
                    TAU * phi_col as f64 / 8.0,
                );
                let state = localized_state(initial, 1, &lattice).unwrap();
                let arrived = crate::evolution::evolve(&state, 1, &u).unwrap();
                let restored = apply_coin(&arrived, &recovery);
                let f = fidelity(&restored, initial, 2).unwrap();
                assert!((f - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_hold_to_high_precision() {
        let grid: Vec<f64> = (0..4).map(|k| TAU * k as f64 / 4.0).collect();
        let report = verify_closed_forms(8, 2, &grid).unwrap();
        assert!(
            report.max_deviation < 1e-10,
            "max deviation {}",
            report.max_deviation
        );
        assert!(!report.checks.is_empty());
    }

    #[test]
    fn flip_line_witness_reports_transfer() {
        // Under the alternating edge labels the anti-diagonal coin shuttles
        // both components to the far end in N steps, so the balanced state
        // arrives completely.
        let witness = flip_line_witness(4, 40).unwrap();
        assert!((witness.balanced_max_target_probability - 1.0).abs() < 1e-12);
        assert_eq!(witness.balanced_max_time, 4);
        assert!((witness.down_max_target_probability - 1.0).abs() < 1e-12);
        // The up component leaves the first site (after a one-step dwell).
        assert!(witness.up_min_source_probability < 1e-12);
    }
}
