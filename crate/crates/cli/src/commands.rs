use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use coupled_stability::export::{eigenvalues_to_csv, energy_to_csv, trajectory_to_csv, write_atomic};
use coupled_stability::linalg::GramFactor;
use coupled_stability::semigroup::{
    complex_state, resolvent_identity_residual, semigroup_property_residual, Propagator,
};
use coupled_stability::stability::{
    admissibility_control, admissibility_observation, saturated_control, saturated_observation,
    uniform_grid, SaturatedConstant,
};
use coupled_stability::{
    catalog_lookup, coupled_from_spec, evolve_direct, evolve_vop, list_systems, par, spectral_abscissa,
    theorem_bound_certificate, AdmissibilityEstimate, AdmissibilityMethod, CoupledGenerator, DecayCertificate,
    Generator, Grid, Verdict,
};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{InitialState, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl From<coupled_stability::Error> for CliError {
    fn from(e: coupled_stability::Error) -> Self {
        use coupled_stability::Error as E;
        match e {
            E::UnknownSystem(_) | E::InvalidParams { .. } | E::GridTooCoarse { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Whether every check or certificate of the command passed.
pub type Outcome = Result<bool, CliError>;

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    result: T,
}

fn to_json<T: Serialize>(command: &'static str, config: &RunConfig, result: T) -> String {
    let a = Artifact {
        tool: "coupled-stability",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        result,
    };
    let mut s = serde_json::to_string_pretty(&a).expect("artifact serializes");
    s.push('\n');
    s
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn build(c: &RunConfig, n: usize) -> Result<CoupledGenerator, CliError> {
    let spec = catalog_lookup(c.system, &c.params)?;
    Ok(coupled_from_spec(&spec, &Grid::new(n)?)?)
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
}

pub fn list() -> Outcome {
    #[derive(Serialize)]
    struct Entry {
        id: String,
        description: &'static str,
        required_params: Vec<&'static str>,
        coupling_channels: usize,
    }
    let entries: Vec<Entry> = list_systems()
        .into_iter()
        .map(|e| Entry {
            id: e.id.name().to_string(),
            description: e.description,
            required_params: e.required_params,
            coupling_channels: e.id.coupling_channels(),
        })
        .collect();
    emit(&(serde_json::to_string_pretty(&entries).expect("entries serialize") + "\n"));
    Ok(true)
}

pub fn simulate(c: &RunConfig) -> Outcome {
    let cg = build(c, c.n)?;
    let x0 = match c.initial_state {
        InitialState::Random => random_vec(&mut ChaCha8Rng::seed_from_u64(c.seed), cg.dim()),
        InitialState::Zero => DVector::zeros(cg.dim()),
    };
    let tr = evolve_direct(&cg, &x0, c.t_end, c.dt)?;
    let traj = write(&c.output_dir, "trajectory.csv", &trajectory_to_csv(&tr))?;
    let energy = write(&c.output_dir, "energy.csv", &energy_to_csv(&tr))?;

    #[derive(Serialize)]
    struct Summary {
        state_dim: usize,
        dim1: usize,
        dim2: usize,
        samples: usize,
        initial_energy: f64,
        final_energy: f64,
        trajectory_csv: String,
        energy_csv: String,
    }
    let s = Summary {
        state_dim: cg.dim(),
        dim1: cg.dim1(),
        dim2: cg.dim2(),
        samples: tr.len(),
        initial_energy: tr.energies[0],
        final_energy: *tr.energies.last().unwrap(),
        trajectory_csv: "trajectory.csv".into(),
        energy_csv: "energy.csv".into(),
    };
    let json = to_json("simulate", c, s);
    write(&c.output_dir, "simulate.json", &json)?;
    eprintln!("wrote {} and {}", traj.display(), energy.display());
    emit(&json);
    Ok(true)
}

pub fn spectrum(c: &RunConfig) -> Outcome {
    let cg = build(c, c.n)?;
    let whole = spectral_abscissa(&cg)?;
    #[derive(Serialize)]
    struct Summary {
        state_dim: usize,
        abscissa: f64,
        abscissa_a1: f64,
        abscissa_a2: f64,
        stable: bool,
        eigenvalues_csv: String,
    }
    let s = Summary {
        state_dim: cg.dim(),
        abscissa: whole.abscissa,
        abscissa_a1: spectral_abscissa(&cg.a1)?.abscissa,
        abscissa_a2: spectral_abscissa(&cg.a2)?.abscissa,
        stable: whole.abscissa < 0.0,
        eigenvalues_csv: "eigenvalues.csv".into(),
    };
    write(&c.output_dir, "eigenvalues.csv", &eigenvalues_to_csv(&whole))?;
    let json = to_json("spectrum", c, s);
    write(&c.output_dir, "spectrum.json", &json)?;
    emit(&json);
    Ok(true)
}

fn certificate(c: &RunConfig, n: usize) -> Result<DecayCertificate, CliError> {
    let cg = build(c, n)?;
    let grid = uniform_grid(c.t_end, c.decay_points);
    Ok(theorem_bound_certificate(&cg, c.gamma_fraction, 1.0, &grid)?)
}

pub fn decay(c: &RunConfig) -> Outcome {
    let cert = certificate(c, c.n)?;
    let holds = cert.verdict == Verdict::Holds;
    let json = to_json("decay", c, &cert);
    write(&c.output_dir, "certificate.json", &json)?;
    emit(&format!(
        "{}\n",
        serde_json::json!({
            "verdict": cert.verdict,
            "bound_const": cert.bound_const,
            "gamma": cert.gamma,
            "worst_ratio": cert.worst_ratio,
            "certificate_json": "certificate.json",
        })
    ));
    Ok(holds)
}

pub fn admissibility(c: &RunConfig) -> Outcome {
    let cg = build(c, c.n)?;
    let methods = [AdmissibilityMethod::GramianEig, AdmissibilityMethod::InputMapSVD];
    let mut control: Vec<AdmissibilityEstimate> = Vec::new();
    let mut observation: Vec<AdmissibilityEstimate> = Vec::new();
    for &t0 in &c.horizons {
        for m in methods {
            control.push(admissibility_control(&cg.a1, &cg.b.columns, t0, c.admissibility_steps, m)?);
            observation.push(admissibility_observation(&cg.a2, &cg.c.rows, t0, c.admissibility_steps, m)?);
        }
    }
    #[derive(Serialize)]
    struct Summary {
        control_w: Vec<AdmissibilityEstimate>,
        observation_v: Vec<AdmissibilityEstimate>,
        k_saturated: SaturatedConstant,
        n_saturated: SaturatedConstant,
    }
    let s = Summary {
        control_w: control,
        observation_v: observation,
        k_saturated: saturated_control(&cg.a1, &cg.b.columns, 0.0, c.horizons[0], c.admissibility_steps)?,
        n_saturated: saturated_observation(&cg.a2, &cg.c.rows, 0.0, c.horizons[0], c.admissibility_steps)?,
    };
    let json = to_json("admissibility", c, s);
    write(&c.output_dir, "admissibility.json", &json)?;
    emit(&json);
    Ok(true)
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub tolerance: f64,
    /// Worst measured value over all draws; compared against `tolerance`.
    pub residual: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, tolerance: f64, residuals: &[f64]) -> Self {
        let residual = residuals.iter().copied().fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        Check {
            name,
            tolerance,
            residual,
            samples: residuals.len(),
            passed: residual <= tolerance,
        }
    }
}

/// The property checks run by `verify`, drawing states from `rng`.
pub fn run_checks(cg: &CoupledGenerator, c: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let (d1, d2) = (cg.dim1(), cg.dim2());
    let f1 = GramFactor::new(&cg.a1.gram)?;
    let f2 = GramFactor::new(&cg.a2.gram)?;
    let whole = Propagator::new(cg)?;
    let free2 = Propagator::new(&cg.a2)?;

    let mut resolvent = Vec::new();
    for lam in [Complex64::new(1.0, 0.0), Complex64::new(1.0, 5.0), Complex64::new(10.0, 0.0)] {
        for _ in 0..c.samples {
            let f = random_vec(rng, d1);
            let g = random_vec(rng, d2);
            let r = resolvent_identity_residual(cg.blocks(), lam, &complex_state(&f), &complex_state(&g))?;
            resolvent.push(r / (f1.norm(&f) + f2.norm(&g)));
        }
    }

    let mut vop = Vec::new();
    for _ in 0..c.samples {
        let f = random_vec(rng, d1);
        let g = random_vec(rng, d2);
        let x = DVector::from_iterator(d1 + d2, f.iter().chain(g.iter()).copied());
        let direct = whole.apply(c.verify_time, &x);
        let v = evolve_vop(cg.blocks(), &f, &g, c.verify_time, c.quad)?;
        vop.push(whole.factor.norm(&(v - &direct)) / whole.factor.norm(&direct));
    }

    let mut law = Vec::new();
    for (t, s) in [(0.5, 0.5), (1.0, 2.0)] {
        for _ in 0..c.samples {
            let x = random_vec(rng, d1 + d2);
            law.push(semigroup_property_residual(cg, t, s, &x)? / whole.factor.norm(&x));
        }
    }

    let mut triangular = Vec::new();
    for t in [0.1, 1.0, 5.0] {
        for _ in 0..c.samples {
            let x = random_vec(rng, d1 + d2);
            let y = whole.apply(t, &x);
            let g = x.rows(d1, d2).into_owned();
            let diff = y.rows(d1, d2).into_owned() - free2.apply(t, &g);
            triangular.push(f2.norm(&diff) / whole.factor.norm(&x));
        }
    }

    Ok(vec![
        Check::new("resolvent_identity", 1e-9, &resolvent),
        Check::new("vop_vs_direct", 1e-6, &vop),
        Check::new("semigroup_law", 1e-9, &law),
        Check::new("triangular_invariance", 1e-10, &triangular),
    ])
}

pub fn verify(c: &RunConfig) -> Outcome {
    let cg = build(c, c.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let checks = run_checks(&cg, c, &mut rng)?;
    let passed = checks.iter().all(|k| k.passed);

    #[derive(Serialize)]
    struct Report<'a> {
        passed: bool,
        checks: &'a [Check],
    }
    let json = to_json("verify", c, Report { passed, checks: &checks });
    write(&c.output_dir, "verify.json", &json)?;
    emit(&json);
    Ok(passed)
}

pub fn sweep(c: &RunConfig) -> Outcome {
    #[derive(Serialize)]
    struct Row {
        n: usize,
        state_dim: usize,
        abscissa: f64,
        certificate: DecayCertificate,
    }
    let rows: Vec<Result<Row, CliError>> = par::map(&c.sweep_n, |&n| {
        let cg = build(c, n)?;
        Ok(Row {
            n,
            state_dim: cg.dim(),
            abscissa: spectral_abscissa(&cg)?.abscissa,
            certificate: certificate(c, n)?,
        })
    });
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut csv = String::from("n,state_dim,abscissa,m_a1,omega_a1,m_a2,omega_a2,k1,n1,gamma,bound_const,worst_ratio,verdict\n");
    for r in &rows {
        let k = &r.certificate;
        let verdict = match k.verdict {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
        };
        let _ = writeln!(
            csv,
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{verdict}",
            r.n, r.state_dim, r.abscissa, k.m_a1, k.omega_a1, k.m_a2, k.omega_a2, k.k1, k.n1, k.gamma,
            k.bound_const, k.worst_ratio
        );
    }
    write(&c.output_dir, "sweep.csv", &csv)?;
    let holds = rows.iter().all(|r| r.certificate.verdict == Verdict::Holds);
    write(&c.output_dir, "sweep.json", &to_json("sweep", c, &rows))?;
    emit(&csv);
    Ok(holds)
}
