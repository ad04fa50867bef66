use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bellstab::config::{parse_config, Mode, RunConfig, Settings};
use bellstab::run::run_command;

/// Driven-dissipative simulator of autonomous Bell-state stabilization for
/// two qubits dispersively coupled to a lossy cavity.
#[derive(Parser)]
#[command(name = "bellstab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the master equation and emit the fidelity/CHSH time series.
    Simulate(CommonArgs),
    /// Scan steady-state fidelity and CHSH over the (n̄, Ωⁿ̄/κ) grid.
    Sweep(SweepArgs),
    /// Steady-state fidelity as a function of the cavity truncation.
    Truncation(TruncationArgs),
    /// Run the analytic oracle suite and report each check.
    Oracles(CommonArgs),
    /// Print the operating-regime diagnostics without simulating.
    Validate(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file (TOML, flat keys; flags override file values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator step, nanoseconds.
    #[arg(long)]
    dt_ns: Option<f64>,
    /// End of the run, microseconds.
    #[arg(long)]
    t_final_us: Option<f64>,
    /// Cavity truncation dimension.
    #[arg(long)]
    ncav: Option<usize>,
    /// Sample stride in integrator steps.
    #[arg(long)]
    record_every: Option<usize>,
    /// Also emit SVG plots.
    #[arg(long)]
    emit_plots: bool,
    /// Initial state: gg0, ee0, phi_plus_0 or phi_minus_0.
    #[arg(long)]
    initial: Option<String>,

    /// Dispersive shift of qubit A, MHz (χ_A/2π).
    #[arg(long)]
    chi_a_mhz: Option<f64>,
    /// Dispersive shift of qubit B, MHz.
    #[arg(long)]
    chi_b_mhz: Option<f64>,
    /// Cavity linewidth, MHz (κ/2π).
    #[arg(long)]
    kappa_mhz: Option<f64>,
    /// Relaxation time of qubit A, µs ("inf" allowed).
    #[arg(long)]
    t1_a_us: Option<f64>,
    #[arg(long)]
    t1_b_us: Option<f64>,
    /// Coherence time of qubit A, µs (must satisfy T2 ≤ 2·T1).
    #[arg(long)]
    t2_a_us: Option<f64>,
    #[arg(long)]
    t2_b_us: Option<f64>,
    /// Target mean photon number of the cavity pointer states.
    #[arg(long)]
    nbar: Option<f64>,
    /// Bell-selection Rabi amplitude, MHz (default κ/2).
    #[arg(long)]
    omega0_mhz: Option<f64>,
    /// Repump Rabi amplitude, MHz (default κ).
    #[arg(long)]
    omega_nbar_mhz: Option<f64>,
    /// Cavity drive amplitude, MHz (default (κ/2)√n̄).
    #[arg(long)]
    epsilon_c_mhz: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// n̄ axis of the sweep (default 1..8).
    #[arg(long, value_delimiter = ',')]
    nbar_values: Option<Vec<f64>>,
    /// Ωⁿ̄/κ axis of the sweep (default 0.25..2.0 in steps of 0.25).
    #[arg(long, value_delimiter = ',')]
    omega_ratios: Option<Vec<f64>>,
}

#[derive(Args)]
struct TruncationArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// N_cav values of the convergence table (default 10,12,14,16,18,20).
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
}

impl CommonArgs {
    fn settings(&self) -> Settings {
        Settings {
            chi_a_mhz: self.chi_a_mhz,
            chi_b_mhz: self.chi_b_mhz,
            kappa_mhz: self.kappa_mhz,
            t1_a_us: self.t1_a_us,
            t1_b_us: self.t1_b_us,
            t2_a_us: self.t2_a_us,
            t2_b_us: self.t2_b_us,
            nbar: self.nbar,
            omega0_mhz: self.omega0_mhz,
            omega_nbar_mhz: self.omega_nbar_mhz,
            epsilon_c_mhz: self.epsilon_c_mhz,
            n_cav: self.ncav,
            dt_ns: self.dt_ns,
            t_final_us: self.t_final_us,
            record_every: self.record_every,
            initial_state: self.initial.clone(),
            out_dir: self.out.clone(),
            emit_plots: if self.emit_plots { Some(true) } else { None },
            nbar_values: None,
            omega_ratio_values: None,
            n_cav_values: None,
        }
    }
}

fn resolve(cli: Cli) -> bellstab::Result<RunConfig> {
    let (mode, common, mut settings) = match cli.command {
        Command::Simulate(c) => {
            let s = c.settings();
            (Mode::Simulate, c, s)
        }
        Command::Sweep(a) => {
            let mut s = a.common.settings();
            s.nbar_values = a.nbar_values;
            s.omega_ratio_values = a.omega_ratios;
            (Mode::Sweep, a.common, s)
        }
        Command::Truncation(a) => {
            let mut s = a.common.settings();
            s.n_cav_values = a.n_values;
            (Mode::Truncation, a.common, s)
        }
        Command::Oracles(c) => {
            let s = c.settings();
            (Mode::Oracles, c, s)
        }
        Command::Validate(c) => {
            let s = c.settings();
            (Mode::Validate, c, s)
        }
    };
    settings.out_dir = settings.out_dir.take().or_else(|| common.out.clone());
    parse_config(mode, common.config.as_deref(), settings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(cli) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_command(&config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
