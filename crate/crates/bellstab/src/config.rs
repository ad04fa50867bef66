//! Run configuration: flat key-value files (TOML) plus flag overrides.
//!
//! Files and flags speak the user units of the lab — ordinary frequencies in
//! MHz and times in µs — and the loader converts to the internal angular
//! rad/µs. Unknown keys are rejected outright so a typo never silently falls
//! back to a default.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::experiments::InitialState;
use crate::lindblad::EvolutionConfig;
use crate::system::{default_n_cav, epsilon_c_default, SystemParams};
use crate::{Error, Result};

/// 1 MHz of ordinary frequency = 2π rad/µs of angular frequency.
pub const MHZ_TO_RAD_PER_US: f64 = std::f64::consts::TAU;

pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    f_mhz * MHZ_TO_RAD_PER_US
}

pub fn angular_to_mhz(w: f64) -> f64 {
    w / MHZ_TO_RAD_PER_US
}

/// Execution mode, selected by the CLI subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Sweep,
    Truncation,
    Oracles,
    Validate,
}

/// Raw key-value settings as they appear in a config file or on the command
/// line. All fields optional; unset fields fall back to the shipped defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub chi_a_mhz: Option<f64>,
    pub chi_b_mhz: Option<f64>,
    pub kappa_mhz: Option<f64>,
    pub t1_a_us: Option<f64>,
    pub t1_b_us: Option<f64>,
    pub t2_a_us: Option<f64>,
    pub t2_b_us: Option<f64>,
    pub nbar: Option<f64>,
    pub omega0_mhz: Option<f64>,
    pub omega_nbar_mhz: Option<f64>,
    pub epsilon_c_mhz: Option<f64>,
    pub n_cav: Option<usize>,
    pub dt_ns: Option<f64>,
    pub t_final_us: Option<f64>,
    pub record_every: Option<usize>,
    pub initial_state: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub emit_plots: Option<bool>,
    pub nbar_values: Option<Vec<f64>>,
    pub omega_ratio_values: Option<Vec<f64>>,
    pub n_cav_values: Option<Vec<usize>>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Overlay `other` on top of `self` (set fields in `other` win).
    fn overlaid(self, other: Self) -> Self {
        macro_rules! pick {
            ($field:ident) => {
                other.$field.or(self.$field)
            };
        }
        Self {
            chi_a_mhz: pick!(chi_a_mhz),
            chi_b_mhz: pick!(chi_b_mhz),
            kappa_mhz: pick!(kappa_mhz),
            t1_a_us: pick!(t1_a_us),
            t1_b_us: pick!(t1_b_us),
            t2_a_us: pick!(t2_a_us),
            t2_b_us: pick!(t2_b_us),
            nbar: pick!(nbar),
            omega0_mhz: pick!(omega0_mhz),
            omega_nbar_mhz: pick!(omega_nbar_mhz),
            epsilon_c_mhz: pick!(epsilon_c_mhz),
            n_cav: pick!(n_cav),
            dt_ns: pick!(dt_ns),
            t_final_us: pick!(t_final_us),
            record_every: pick!(record_every),
            initial_state: pick!(initial_state),
            out_dir: pick!(out_dir),
            emit_plots: pick!(emit_plots),
            nbar_values: pick!(nbar_values),
            omega_ratio_values: pick!(omega_ratio_values),
            n_cav_values: pick!(n_cav_values),
        }
    }
}

/// Fully resolved run configuration, in internal units.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: SystemParams,
    pub evolution: EvolutionConfig,
    pub initial: InitialState,
    pub out_dir: PathBuf,
    pub emit_plots: bool,
    /// Sweep axes (sweep mode).
    pub nbar_values: Vec<f64>,
    pub omega_ratio_values: Vec<f64>,
    /// Truncation study grid (truncation mode).
    pub n_cav_values: Vec<usize>,
}

/// Resolve a config file (optional) and flag overrides into a run plan.
///
/// Defaults are the reference operating point of [`SystemParams::default`];
/// flags override file values which override defaults. Drive amplitudes left
/// unset are derived from the resolved κ and n̄ (Ω⁰ = κ/2, Ωⁿ̄ = κ,
/// ε_c = (κ/2)√n̄), and N_cav from the coherent-tail rule.
pub fn parse_config(mode: Mode, file: Option<&Path>, flags: Settings) -> Result<RunConfig> {
    let mut settings = Settings::default();
    if let Some(path) = file {
        settings = settings.overlaid(Settings::from_file(path)?);
    }
    let settings = settings.overlaid(flags);

    let defaults = SystemParams::default();
    let chi_a = settings.chi_a_mhz.map(mhz_to_angular).unwrap_or(defaults.chi_a);
    let chi_b = settings.chi_b_mhz.map(mhz_to_angular).unwrap_or(defaults.chi_b);
    let kappa = settings.kappa_mhz.map(mhz_to_angular).unwrap_or(defaults.kappa);
    let nbar = settings.nbar.unwrap_or(defaults.nbar);
    let params = SystemParams {
        chi_a,
        chi_b,
        kappa,
        t1_a: settings.t1_a_us.unwrap_or(defaults.t1_a),
        t1_b: settings.t1_b_us.unwrap_or(defaults.t1_b),
        t2_a: settings.t2_a_us.unwrap_or(defaults.t2_a),
        t2_b: settings.t2_b_us.unwrap_or(defaults.t2_b),
        nbar,
        omega0: settings.omega0_mhz.map(mhz_to_angular).unwrap_or(kappa / 2.0),
        omega_nbar: settings.omega_nbar_mhz.map(mhz_to_angular).unwrap_or(kappa),
        epsilon_c: match settings.epsilon_c_mhz {
            Some(f) => mhz_to_angular(f),
            None => epsilon_c_default(kappa, nbar)?,
        },
        n_cav: settings.n_cav.unwrap_or_else(|| default_n_cav(nbar)),
    };

    // Truncation mode deliberately runs under-truncated points; everything
    // else gets the strict checks up front.
    match mode {
        Mode::Truncation => params.validate_dynamics()?,
        _ => params.validate()?,
    }

    let evolution_defaults = EvolutionConfig::default();
    let evolution = EvolutionConfig {
        dt: settings.dt_ns.map(|ns| ns * 1e-3).unwrap_or(evolution_defaults.dt),
        t_final: settings.t_final_us.unwrap_or(evolution_defaults.t_final),
        record_every: settings.record_every.unwrap_or(evolution_defaults.record_every),
        enforce_invariants: true,
    };
    evolution.validate()?;

    let initial = match &settings.initial_state {
        Some(name) => InitialState::parse(name)?,
        None => InitialState::GroundGround,
    };

    let nbar_values = settings
        .nbar_values
        .unwrap_or_else(|| (1..=8).map(|n| n as f64).collect());
    let omega_ratio_values = settings
        .omega_ratio_values
        .unwrap_or_else(|| (1..=8).map(|n| n as f64 * 0.25).collect());
    if nbar_values.is_empty() || omega_ratio_values.is_empty() {
        return Err(Error::Config("sweep axes must be nonempty".into()));
    }
    let n_cav_values = settings.n_cav_values.unwrap_or_else(|| vec![10, 12, 14, 16, 18, 20]);

    Ok(RunConfig {
        mode,
        params,
        evolution,
        initial,
        out_dir: settings.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        emit_plots: settings.emit_plots.unwrap_or(false),
        nbar_values,
        omega_ratio_values,
        n_cav_values,
    })
}

/// Config echo in user units, for summaries and reproducibility.
pub fn echo_settings(params: &SystemParams, evolution: &EvolutionConfig) -> Vec<(String, String)> {
    vec![
        ("chi_a_mhz".into(), format!("{}", angular_to_mhz(params.chi_a))),
        ("chi_b_mhz".into(), format!("{}", angular_to_mhz(params.chi_b))),
        ("kappa_mhz".into(), format!("{}", angular_to_mhz(params.kappa))),
        ("t1_a_us".into(), format!("{}", params.t1_a)),
        ("t1_b_us".into(), format!("{}", params.t1_b)),
        ("t2_a_us".into(), format!("{}", params.t2_a)),
        ("t2_b_us".into(), format!("{}", params.t2_b)),
        ("nbar".into(), format!("{}", params.nbar)),
        ("omega0_mhz".into(), format!("{}", angular_to_mhz(params.omega0))),
        ("omega_nbar_mhz".into(), format!("{}", angular_to_mhz(params.omega_nbar))),
        ("epsilon_c_mhz".into(), format!("{}", angular_to_mhz(params.epsilon_c))),
        ("n_cav".into(), format!("{}", params.n_cav)),
        ("dt_ns".into(), format!("{}", evolution.dt * 1e3)),
        ("t_final_us".into(), format!("{}", evolution.t_final)),
        ("record_every".into(), format!("{}", evolution.record_every)),
    ]
}
