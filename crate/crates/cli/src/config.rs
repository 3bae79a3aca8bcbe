use std::path::{Path, PathBuf};

use clap::Args;
use coupled_stability::systems::Param;
use coupled_stability::{validate_params, QuadratureRule, QuadratureSpec, SystemId, SystemParams};
use serde::{Deserialize, Serialize};

/// How `simulate` picks its initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Uniform entries in [−1, 1] from the seeded generator.
    Random,
    Zero,
}

/// Everything a run depends on. Echoed verbatim into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemId,
    /// Missing gains default to 1.
    pub params: SystemParams,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub quad: QuadratureSpec,
    pub gamma_fraction: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub initial_state: InitialState,
    /// Random draws per check in `verify`.
    pub samples: usize,
    /// Evaluation time of the vop-vs-direct check in `verify`.
    pub verify_time: f64,
    /// Points of the uniform certificate grid over `[0, t_end]`.
    pub decay_points: usize,
    /// Horizon ladder for `admissibility`.
    pub horizons: Vec<f64>,
    pub admissibility_steps: usize,
    /// Resolutions visited by `sweep`.
    pub sweep_n: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemId::WaveWave2018,
            params: SystemParams::default(),
            n: 16,
            t_end: 10.0,
            dt: 0.1,
            quad: QuadratureSpec::gauss(64),
            gamma_fraction: 0.5,
            output_dir: PathBuf::from("out"),
            seed: 0,
            initial_state: InitialState::Random,
            samples: 20,
            verify_time: 1.0,
            decay_points: 50,
            horizons: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            admissibility_steps: 64,
            sweep_n: vec![8, 16, 32],
        }
    }
}

/// A partial config as read from `--config`; absent keys keep defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    system: Option<SystemId>,
    params: Option<SystemParams>,
    n: Option<usize>,
    t_end: Option<f64>,
    dt: Option<f64>,
    quad: Option<QuadratureSpec>,
    gamma_fraction: Option<f64>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    initial_state: Option<InitialState>,
    samples: Option<usize>,
    verify_time: Option<f64>,
    decay_points: Option<usize>,
    horizons: Option<Vec<f64>>,
    admissibility_steps: Option<usize>,
    sweep_n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RuleArg {
    Gauss,
    Trapezoid,
}

/// Run options shared by all subcommands. Flags override `--config`, which
/// overrides the built-in defaults.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; any subset of the keys echoed in artifacts
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// BeamBeam2008 | BeamBeam2017 | WaveWave2018 | KrsticWave [default: WaveWave2018]
    #[arg(long, global = true)]
    pub system: Option<String>,
    /// Gain c0 [default: 1 when required]
    #[arg(long = "c0", global = true, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    /// Gain c1 [default: 1 when required]
    #[arg(long = "c1", global = true, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    /// Gain c2 [default: 1 when required]
    #[arg(long = "c2", global = true, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    /// Gain c3 [default: 1 when required]
    #[arg(long = "c3", global = true, allow_negative_numbers = true)]
    pub c3: Option<f64>,
    /// Profile rate q, KrsticWave only [default: 1 when required]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Grid intervals on [0, 1] [default: 16]
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Final time of trajectories and certificate grids [default: 10]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Sampling step of trajectories [default: 0.1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Quadrature panels of the convolution integral [default: 64]
    #[arg(long, global = true)]
    pub panels: Option<usize>,
    /// Quadrature rule [default: gauss]
    #[arg(long, global = true, value_enum)]
    pub rule: Option<RuleArg>,
    /// Fraction of the fitted rate used as the certified rate γ [default: 0.5]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma_fraction: Option<f64>,
    /// Output directory, created if missing [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed of the random test states [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Initial state of `simulate` [default: random]
    #[arg(long, global = true, value_enum)]
    pub initial_state: Option<InitialState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn read_partial(path: &Path) -> Result<PartialConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl RunArgs {
    /// Merge defaults, the config file and flags, then validate.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let file = match &self.config {
            Some(p) => read_partial(p)?,
            None => PartialConfig::default(),
        };
        let mut c = RunConfig::default();
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = file.$field { c.$field = v; })* };
        }
        take!(system, n, t_end, dt, quad, gamma_fraction, output_dir, seed, initial_state, samples,
              verify_time, decay_points, horizons, admissibility_steps, sweep_n);
        let mut params = file.params.unwrap_or_default();

        if let Some(s) = &self.system {
            c.system = s.parse().map_err(|e: coupled_stability::Error| ConfigError(e.to_string()))?;
        }
        for (p, v) in [
            (Param::C0, self.c0),
            (Param::C1, self.c1),
            (Param::C2, self.c2),
            (Param::C3, self.c3),
            (Param::Q, self.q),
        ] {
            if let Some(v) = v {
                params.set(p, v);
            }
        }
        for &p in c.system.required_params() {
            if params.get(p).is_none() {
                params.set(p, 1.0);
            }
        }
        c.params = params;
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
        }
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.panels {
            c.quad.panels = v;
        }
        if let Some(r) = self.rule {
            c.quad.rule = match r {
                RuleArg::Gauss => QuadratureRule::GaussLegendre,
                RuleArg::Trapezoid => QuadratureRule::Trapezoid,
            };
        }
        if let Some(v) = self.gamma_fraction {
            c.gamma_fraction = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.initial_state {
            c.initial_state = v;
        }
        c.validate()?;
        Ok(c)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut bad = validate_params(self.system, &self.params);
        if self.n < 4 {
            bad.push(format!("n must be >= 4, got {}", self.n));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            bad.push(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt must be > 0, got {}", self.dt));
        }
        if self.quad.panels == 0 {
            bad.push("quad.panels must be >= 1".into());
        }
        if !(self.gamma_fraction > 0.0 && self.gamma_fraction < 1.0) {
            bad.push(format!("gamma_fraction must lie in (0, 1), got {}", self.gamma_fraction));
        }
        if self.samples == 0 {
            bad.push("samples must be >= 1".into());
        }
        if !(self.verify_time >= 0.0 && self.verify_time.is_finite()) {
            bad.push("verify_time must be >= 0".into());
        }
        if self.decay_points < 4 {
            bad.push("decay_points must be >= 4".into());
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            bad.push("horizons must be a nonempty list of positive times".into());
        }
        if self.admissibility_steps == 0 {
            bad.push("admissibility_steps must be >= 1".into());
        }
        if self.sweep_n.is_empty() || self.sweep_n.iter().any(|&n| n < 4) {
            bad.push("sweep_n must be a nonempty list of resolutions >= 4".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(bad.join("; ")))
        }
    }
}
