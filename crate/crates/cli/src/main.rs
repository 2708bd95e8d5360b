//! Command-line front end: evolutions, transfer certification, sweeps,
//! fidelity maps, peak analyses and canned reproduction targets.
//!
//! Time series and grids are emitted as CSV with the resolved
//! configuration echoed in `# key=value` header lines (strip the `# ` and
//! the lines form a valid config file). Certification reports are emitted
//! as JSON with a `schema` version field. Exit codes: 0 on success, 1 on
//! validation errors, 2 when a check command finds nothing to report.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use coinwalk::{
    bloch_to_coin, check_pst, evolve, fidelity_map, localized_state, peak_analysis, step_operator,
    sweep, verify_closed_forms, CoinBasis, CoinParameters, DirectionConvention, Lattice, Topology,
};

mod config;

use config::{
    build_coin, build_initial, build_lattice, convention_name, parse_angle, parse_complex,
    parse_convention, parse_topology, topology_name, AngleList, F64List, InitialEcho, Settings,
};

#[derive(Parser)]
#[command(
    name = "coinwalk",
    version,
    about = "Discrete-time coined quantum walks on finite lines and cycles"
)]
struct Cli {
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the records to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct LatticeArgs {
    /// Lattice topology: line or cycle.
    #[arg(long, value_parser = parse_topology)]
    topology: Option<Topology>,

    /// Number of sites N (at least 2).
    #[arg(long)]
    n_sites: Option<usize>,

    /// Direction convention: spatial or local.
    #[arg(long, value_parser = parse_convention)]
    convention: Option<DirectionConvention>,
}

#[derive(Args, Default)]
struct CoinArgs {
    /// Coin bias in [0, 1].
    #[arg(long)]
    rho: Option<f64>,

    /// Coin phase angle (radians, or pi:<multiple>).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    theta: Option<f64>,

    /// Coin phase angle (radians, or pi:<multiple>).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    phi: Option<f64>,
}

#[derive(Args, Default)]
struct InitialArgs {
    /// Bloch polar angle of the initial coin state.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    theta_b: Option<f64>,

    /// Bloch azimuthal angle of the initial coin state.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    phi_b: Option<f64>,

    /// Up amplitude as re or re,im (use together with --beta).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    alpha: Option<Complex64>,

    /// Down amplitude as re or re,im (use together with --alpha).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    beta: Option<Complex64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a walk and emit per-step site records as CSV.
    Evolve {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        coin: CoinArgs,
        #[command(flatten)]
        initial: InitialArgs,
        /// Number of steps to take.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Certify perfect transfer of the coin state and emit a JSON report.
    /// Exits with code 2 when no transfer certifies within the horizon.
    CheckPst {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        coin: CoinArgs,
        /// Search horizon in steps (default 50·N).
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Certify transfers over a (N, rho, theta) grid; emits the certified
    /// reports as a JSON array.
    Sweep {
        /// Lattice topology: line or cycle.
        #[arg(long, value_parser = parse_topology)]
        topology: Option<Topology>,
        /// Smallest site count.
        #[arg(long)]
        n_min: Option<usize>,
        /// Largest site count.
        #[arg(long)]
        n_max: Option<usize>,
        /// Comma-separated coin biases (default 0,1/8,...,1).
        #[arg(long)]
        rho_grid: Option<F64List>,
        /// Comma-separated coin angles (default 0).
        #[arg(long, allow_hyphen_values = true)]
        theta_grid: Option<AngleList>,
        /// Per-lattice horizon is this factor times N.
        #[arg(long)]
        horizon_factor: Option<usize>,
    },
    /// Max-over-time fidelity at the antipodal site over a Bloch-angle
    /// grid of initial coin states, as CSV.
    FidelityMap {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        coin: CoinArgs,
        /// Grid points per axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// Time horizon (default 50·N).
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Strict local maxima of the site probability above a threshold, as
    /// CSV. Exits with code 2 when no peak qualifies.
    Peaks {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        coin: CoinArgs,
        #[command(flatten)]
        initial: InitialArgs,
        /// Site to watch (default: the antipodal target).
        #[arg(long)]
        site: Option<usize>,
        /// Time horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// Peak threshold in (0, 1).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compare simulated walks against the closed-form states for the
    /// diagonal and anti-diagonal coin families, as CSV.
    VerifyClosedForms {
        /// Largest site count to check.
        #[arg(long)]
        max_n: Option<usize>,
        /// Number of round trips on lines.
        #[arg(long)]
        l_max: Option<usize>,
        /// Comma-separated coin angles for the (theta, phi) grid.
        #[arg(long, allow_hyphen_values = true)]
        angles: Option<AngleList>,
    },
    /// Regenerate a bundled dataset (table1, table2, fig3, fig4, fig5)
    /// into the output directory.
    Reproduce {
        /// One of: table1, table2, fig3, fig4, fig5.
        target: String,
        /// Directory for the generated files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };

    let (body, exit) = match cli.command {
        Command::Evolve { lattice, coin, initial, steps } => {
            cmd_evolve(&settings, lattice, coin, initial, steps)?
        }
        Command::CheckPst { lattice, coin, horizon } => {
            cmd_check_pst(&settings, lattice, coin, horizon)?
        }
        Command::Sweep { topology, n_min, n_max, rho_grid, theta_grid, horizon_factor } => {
            cmd_sweep(&settings, topology, n_min, n_max, rho_grid, theta_grid, horizon_factor)?
        }
        Command::FidelityMap { lattice, coin, resolution, horizon } => {
            cmd_fidelity_map(&settings, lattice, coin, resolution, horizon)?
        }
        Command::Peaks { lattice, coin, initial, site, horizon, threshold } => {
            cmd_peaks(&settings, lattice, coin, initial, site, horizon, threshold)?
        }
        Command::VerifyClosedForms { max_n, l_max, angles } => {
            cmd_verify_closed_forms(&settings, max_n, l_max, angles)?
        }
        Command::Reproduce { target, out_dir } => {
            cmd_reproduce(&target, &out_dir)?;
            (String::new(), ExitCode::SUCCESS)
        }
    };

    if !body.is_empty() {
        match &cli.output {
            Some(path) => std::fs::write(path, body)
                .with_context(|| format!("cannot write {}", path.display()))?,
            None => print!("{body}"),
        }
    }
    Ok(exit)
}

fn resolve_lattice(settings: &Settings, args: LatticeArgs) -> Result<Lattice> {
    let topology = args
        .topology
        .or(settings.topology("topology")?)
        .unwrap_or(Topology::Line);
    let n_sites = args.n_sites.or(settings.usize("n-sites")?);
    let convention = args
        .convention
        .or(settings.convention("convention")?)
        .unwrap_or(DirectionConvention::Spatial);
    build_lattice(topology, n_sites, convention)
}

fn resolve_coin(settings: &Settings, args: CoinArgs) -> Result<CoinParameters> {
    let rho = args.rho.or(settings.f64("rho")?);
    let theta = args.theta.or(settings.angle("theta")?).unwrap_or(0.0);
    let phi = args.phi.or(settings.angle("phi")?).unwrap_or(0.0);
    build_coin(rho, theta, phi)
}

fn resolve_initial(
    settings: &Settings,
    args: InitialArgs,
) -> Result<(coinwalk::CoinState, InitialEcho)> {
    build_initial(
        args.theta_b.or(settings.angle("theta-b")?),
        args.phi_b.or(settings.angle("phi-b")?),
        args.alpha.or(settings.complex("alpha")?),
        args.beta.or(settings.complex("beta")?),
    )
}

fn header_lattice(out: &mut String, lattice: &Lattice) {
    let _ = writeln!(out, "# topology={}", topology_name(lattice.topology()));
    let _ = writeln!(out, "# n-sites={}", lattice.n_sites());
    let _ = writeln!(out, "# convention={}", convention_name(lattice.convention()));
}

fn header_coin(out: &mut String, coin: &CoinParameters) {
    let _ = writeln!(out, "# rho={}", coin.rho());
    let _ = writeln!(out, "# theta={}", coin.theta());
    let _ = writeln!(out, "# phi={}", coin.phi());
}

fn header_initial(out: &mut String, echo: &InitialEcho) {
    match echo {
        InitialEcho::Bloch { theta_b, phi_b } => {
            let _ = writeln!(out, "# theta-b={theta_b}");
            let _ = writeln!(out, "# phi-b={phi_b}");
        }
        InitialEcho::Amplitudes { alpha, beta } => {
            let _ = writeln!(out, "# alpha={},{}", alpha.re, alpha.im);
            let _ = writeln!(out, "# beta={},{}", beta.re, beta.im);
        }
    }
}

fn cmd_evolve(
    settings: &Settings,
    lattice: LatticeArgs,
    coin: CoinArgs,
    initial: InitialArgs,
    steps: Option<usize>,
) -> Result<(String, ExitCode)> {
    let lattice = resolve_lattice(settings, lattice)?;
    let coin = resolve_coin(settings, coin)?;
    let (initial, echo) = resolve_initial(settings, initial)?;
    let steps = steps
        .or(settings.usize("steps")?)
        .ok_or_else(|| anyhow!("--steps is required"))?;

    let u = step_operator(coin, &lattice);
    let mut state = localized_state(initial, lattice.source_site(), &lattice)?;

    let mut out = String::new();
    header_lattice(&mut out, &lattice);
    header_coin(&mut out, &coin);
    header_initial(&mut out, &echo);
    let _ = writeln!(out, "# steps={steps}");
    out.push_str("t,x,prob,re_alpha,im_alpha,re_beta,im_beta\n");
    for t in 0..=steps {
        if t > 0 {
            state = evolve(&state, 1, &u)?;
        }
        for x in 1..=lattice.n_sites() {
            let up = state.amplitude(CoinBasis::Up, x);
            let down = state.amplitude(CoinBasis::Down, x);
            let prob = up.norm_sqr() + down.norm_sqr();
            let _ = writeln!(out, "{t},{x},{prob},{},{},{},{}", up.re, up.im, down.re, down.im);
        }
    }
    Ok((out, ExitCode::SUCCESS))
}

fn cmd_check_pst(
    settings: &Settings,
    lattice: LatticeArgs,
    coin: CoinArgs,
    horizon: Option<usize>,
) -> Result<(String, ExitCode)> {
    let lattice = resolve_lattice(settings, lattice)?;
    let coin = resolve_coin(settings, coin)?;
    let horizon = horizon
        .or(settings.usize("horizon")?)
        .unwrap_or(coinwalk::pst::DEFAULT_HORIZON_FACTOR * lattice.n_sites());

    let report = check_pst(&lattice, coin, horizon)?;
    let body = format!("{}\n", serde_json::to_string_pretty(&report)?);
    let exit = if report.certified { ExitCode::SUCCESS } else { ExitCode::from(2) };
    Ok((body, exit))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    settings: &Settings,
    topology: Option<Topology>,
    n_min: Option<usize>,
    n_max: Option<usize>,
    rho_grid: Option<F64List>,
    theta_grid: Option<AngleList>,
    horizon_factor: Option<usize>,
) -> Result<(String, ExitCode)> {
    let topology = topology
        .or(settings.topology("topology")?)
        .ok_or_else(|| anyhow!("--topology is required"))?;
    let n_min = n_min.or(settings.usize("n-min")?).unwrap_or(2);
    let n_max = n_max.or(settings.usize("n-max")?).unwrap_or(10);
    if n_min < 2 || n_max < n_min {
        return Err(anyhow!("need 2 <= n-min <= n-max, got {n_min}..{n_max}"));
    }
    let rho_grid = rho_grid
        .map(|list| list.0)
        .or(settings.f64_list("rho-grid")?)
        .unwrap_or_else(coinwalk::pst::default_rho_grid);
    let theta_grid = theta_grid
        .map(|list| list.0)
        .or(settings.angle_list("theta-grid")?)
        .unwrap_or_else(|| vec![0.0]);
    let horizon_factor = horizon_factor
        .or(settings.usize("horizon-factor")?)
        .unwrap_or(coinwalk::pst::DEFAULT_HORIZON_FACTOR);

    let ns: Vec<usize> = (n_min..=n_max).collect();
    let reports = sweep(topology, &ns, &rho_grid, &theta_grid, horizon_factor)?;
    let body = format!("{}\n", serde_json::to_string_pretty(&reports)?);
    Ok((body, ExitCode::SUCCESS))
}

fn cmd_fidelity_map(
    settings: &Settings,
    lattice: LatticeArgs,
    coin: CoinArgs,
    resolution: Option<usize>,
    horizon: Option<usize>,
) -> Result<(String, ExitCode)> {
    let lattice = resolve_lattice(settings, lattice)?;
    let coin = resolve_coin(settings, coin)?;
    let resolution = resolution.or(settings.usize("resolution")?).unwrap_or(61);
    let horizon = horizon
        .or(settings.usize("horizon")?)
        .unwrap_or(coinwalk::pst::DEFAULT_HORIZON_FACTOR * lattice.n_sites());

    let map = fidelity_map(&lattice, coin, (resolution, resolution), horizon)?;
    let mut out = String::new();
    header_lattice(&mut out, &lattice);
    header_coin(&mut out, &coin);
    let _ = writeln!(out, "# resolution={resolution}");
    let _ = writeln!(out, "# horizon={horizon}");
    out.push_str("theta_b,phi_b,fidelity\n");
    for (i, theta_b) in map.theta_values.iter().enumerate() {
        for (j, phi_b) in map.phi_values.iter().enumerate() {
            let _ = writeln!(out, "{theta_b},{phi_b},{}", map.values[i][j]);
        }
    }
    Ok((out, ExitCode::SUCCESS))
}

#[allow(clippy::too_many_arguments)]
fn cmd_peaks(
    settings: &Settings,
    lattice: LatticeArgs,
    coin: CoinArgs,
    initial: InitialArgs,
    site: Option<usize>,
    horizon: Option<usize>,
    threshold: Option<f64>,
) -> Result<(String, ExitCode)> {
    let lattice = resolve_lattice(settings, lattice)?;
    let coin = resolve_coin(settings, coin)?;
    let (initial, echo) = resolve_initial(settings, initial)?;
    let site = site
        .or(settings.usize("site")?)
        .or_else(|| lattice.target_site())
        .ok_or_else(|| anyhow!("--site is required on an odd cycle"))?;
    let horizon = horizon
        .or(settings.usize("horizon")?)
        .unwrap_or(coinwalk::pst::DEFAULT_HORIZON_FACTOR * lattice.n_sites());
    let threshold = threshold
        .or(settings.f64("threshold")?)
        .unwrap_or(coinwalk::pst::DEFAULT_PEAK_THRESHOLD);

    let analysis = peak_analysis(&lattice, coin, initial, site, horizon, threshold)?;
    let mut out = String::new();
    header_lattice(&mut out, &lattice);
    header_coin(&mut out, &coin);
    header_initial(&mut out, &echo);
    let _ = writeln!(out, "# site={site}");
    let _ = writeln!(out, "# horizon={horizon}");
    let _ = writeln!(out, "# threshold={threshold}");
    out.push_str("t,value,gap\n");
    for (index, (t, value)) in analysis.peak_times.iter().zip(&analysis.peak_values).enumerate() {
        if index == 0 {
            let _ = writeln!(out, "{t},{value},");
        } else {
            let _ = writeln!(out, "{t},{value},{}", analysis.gaps[index - 1]);
        }
    }
    let exit = if analysis.peak_times.is_empty() { ExitCode::from(2) } else { ExitCode::SUCCESS };
    Ok((out, exit))
}

fn cmd_verify_closed_forms(
    settings: &Settings,
    max_n: Option<usize>,
    l_max: Option<usize>,
    angles: Option<AngleList>,
) -> Result<(String, ExitCode)> {
    let max_n = max_n.or(settings.usize("max-n")?).unwrap_or(16);
    let l_max = l_max.or(settings.usize("l-max")?).unwrap_or(3);
    let angles = angles
        .map(|list| list.0)
        .or(settings.angle_list("angles")?)
        .unwrap_or_else(|| (0..8).map(|k| 2.0 * PI * k as f64 / 8.0).collect());

    let report = verify_closed_forms(max_n, l_max, &angles)?;
    let mut out = String::new();
    let _ = writeln!(out, "# max-n={max_n}");
    let _ = writeln!(out, "# l-max={l_max}");
    let _ = writeln!(
        out,
        "# angles={}",
        angles.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
    );
    out.push_str("case,topology,n_sites,l,t,theta,phi,deviation\n");
    for check in &report.checks {
        let l = check.l.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{l},{},{},{},{}",
            check.case,
            topology_name(check.topology),
            check.n_sites,
            check.t,
            check.theta,
            check.phi,
            check.deviation
        );
    }
    eprintln!("max deviation: {:e}", report.max_deviation);
    Ok((out, ExitCode::SUCCESS))
}

fn cmd_reproduce(target: &str, out_dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    match target {
        "table1" => {
            let lattice = Lattice::line(2)?;
            let reports = table_reports(&lattice)?;
            write_file(out_dir, "table1.json", &reports)?;
        }
        "table2" => {
            let lattice = Lattice::cycle(4)?;
            let reports = table_reports(&lattice)?;
            write_file(out_dir, "table2.json", &reports)?;
        }
        "fig3" => {
            let mut out = String::from("panel,t,prob\n");
            let panels: [(&str, Lattice, usize, usize); 6] = [
                ("a", Lattice::cycle(4)?, 3, 100),
                ("b", Lattice::line(4)?, 4, 100),
                ("c", Lattice::cycle(6)?, 4, 100),
                ("d", Lattice::line(6)?, 6, 100),
                ("e", Lattice::cycle(6)?, 4, 13_000),
                ("f", Lattice::line(6)?, 6, 14_000),
            ];
            for (panel, lattice, site, horizon) in panels {
                let u = step_operator(CoinParameters::hadamard(), &lattice);
                let mut state =
                    localized_state(bloch_to_coin(PI / 2.0, PI / 2.0), 1, &lattice)?;
                for t in 0..=horizon {
                    if t > 0 {
                        state = evolve(&state, 1, &u)?;
                    }
                    let prob = coinwalk::site_probability(&state, site)?;
                    let _ = writeln!(out, "{panel},{t},{prob}");
                }
            }
            std::fs::write(out_dir.join("fig3.csv"), out)?;
        }
        "fig4" => {
            let lattice = Lattice::line(2)?;
            let mut out = String::from("panel,theta_b,phi_b,fidelity\n");
            for (panel, coin) in [
                ("a", CoinParameters::identity()),
                ("b", CoinParameters::hadamard()),
            ] {
                let map = fidelity_map(&lattice, coin, (61, 61), 100)?;
                for (i, theta_b) in map.theta_values.iter().enumerate() {
                    for (j, phi_b) in map.phi_values.iter().enumerate() {
                        let _ = writeln!(out, "{panel},{theta_b},{phi_b},{}", map.values[i][j]);
                    }
                }
            }
            std::fs::write(out_dir.join("fig4.csv"), out)?;
        }
        "fig5" => {
            let lattice = Lattice::cycle(4)?;
            let mut out = String::from("rho,t,x,prob\n");
            for rho in [0.5, 0.25] {
                let coin = CoinParameters::new(rho, 0.0, 0.0)?;
                let u = step_operator(coin, &lattice);
                let mut state =
                    localized_state(bloch_to_coin(PI / 2.0, PI / 2.0), 1, &lattice)?;
                for t in 0..=12 {
                    if t > 0 {
                        state = evolve(&state, 1, &u)?;
                    }
                    for x in 1..=4 {
                        let prob = coinwalk::site_probability(&state, x)?;
                        let _ = writeln!(out, "{rho},{t},{x},{prob}");
                    }
                }
            }
            std::fs::write(out_dir.join("fig5.csv"), out)?;
        }
        other => return Err(anyhow!("unknown target `{other}` (table1, table2, fig3, fig4, fig5)")),
    }
    Ok(())
}

fn table_reports(lattice: &Lattice) -> Result<Vec<coinwalk::PstReport>> {
    [0.25, 0.5, 0.75]
        .iter()
        .map(|&rho| {
            let coin = CoinParameters::new(rho, 0.0, 0.0)?;
            Ok(check_pst(lattice, coin, 100)?)
        })
        .collect()
}

fn write_file(dir: &std::path::Path, name: &str, reports: &[coinwalk::PstReport]) -> Result<()> {
    let body = format!("{}\n", serde_json::to_string_pretty(reports)?);
    std::fs::write(dir.join(name), body)?;
    Ok(())
}
