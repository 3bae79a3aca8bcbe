//! Catalog of the four boundary-coupled systems and their parameters.
//!
//! Every entry is stored in block-triangular form: subsystem 1 receives the
//! boundary trace of subsystem 2 through `B·C`, while subsystem 2 evolves
//! freely.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretize::{BoundaryFunctional, BoundaryWeight, SpaceKind, SpaceSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemId {
    /// Two Euler–Bernoulli beams; tip shear of beam 1 driven by the tip
    /// velocity of beam 2.
    BeamBeam2008,
    /// Two beams; moment at the left end of beam 1 driven by the bending
    /// moment at the clamped end of beam 2.
    BeamBeam2017,
    /// Two strings; left flux of string 1 driven by the left slope of string 2.
    WaveWave2018,
    /// Two strings with a two-channel coupling: a distributed exponential
    /// profile plus a right-end flux injection.
    KrsticWave,
}

impl SystemId {
    pub const ALL: [SystemId; 4] = [
        SystemId::BeamBeam2008,
        SystemId::BeamBeam2017,
        SystemId::WaveWave2018,
        SystemId::KrsticWave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::BeamBeam2008 => "BeamBeam2008",
            SystemId::BeamBeam2017 => "BeamBeam2017",
            SystemId::WaveWave2018 => "WaveWave2018",
            SystemId::KrsticWave => "KrsticWave",
        }
    }

    /// Gains that must be present (and positive) for this system.
    pub fn required_params(self) -> &'static [Param] {
        match self {
            SystemId::BeamBeam2008 | SystemId::BeamBeam2017 => &[Param::C1, Param::C2, Param::C3],
            SystemId::WaveWave2018 => &[Param::C0, Param::C1, Param::C2],
            SystemId::KrsticWave => &[Param::C0, Param::C1, Param::C2, Param::Q],
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            SystemId::BeamBeam2008 => {
                "clamped beam with tip shear c1·w_t(1) coupled to a pinned beam with \
                 rotational damper (c2, c3); B = δ(x−1) on velocity, C = c1·δ(x−1) on \
                 velocity; 1 coupling channel"
            }
            SystemId::BeamBeam2017 => {
                "pinned beam with rotational damper (c2, c3) whose end moment receives \
                 the clamped-end moment of a tip-damped beam (c1); B = δ′(x) on velocity, \
                 C = δ″(x) on displacement; 1 coupling channel"
            }
            SystemId::WaveWave2018 => {
                "string with left damper c2 and right spring c1 whose left flux receives \
                 the left slope of a Dirichlet–damped string (c0); B = δ(x), C = δ′(x); \
                 1 coupling channel"
            }
            SystemId::KrsticWave => {
                "string with left damper c2 and right spring c1 forced by \
                 (c1+q)e^{q(1−x)} and a right-end flux, both driven by q·d(1)+c0·d_t(1) \
                 of a Dirichlet–damped string (c0); 2 coupling channels"
            }
        }
    }

    pub fn coupling_channels(self) -> usize {
        match self {
            SystemId::KrsticWave => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    C0,
    C1,
    C2,
    C3,
    Q,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::C0 => "c0",
            Param::C1 => "c1",
            Param::C2 => "c2",
            Param::C3 => "c3",
            Param::Q => "q",
        }
    }
}

/// Boundary damping/coupling gains. Absent gains are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl SystemParams {
    /// All required gains of `id` set to one.
    pub fn unit(id: SystemId) -> Self {
        let mut p = SystemParams::default();
        for &k in id.required_params() {
            p.set(k, 1.0);
        }
        p
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        match p {
            Param::C0 => self.c0,
            Param::C1 => self.c1,
            Param::C2 => self.c2,
            Param::C3 => self.c3,
            Param::Q => self.q,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        let slot = match p {
            Param::C0 => &mut self.c0,
            Param::C1 => &mut self.c1,
            Param::C2 => &mut self.c2,
            Param::C3 => &mut self.c3,
            Param::Q => &mut self.q,
        };
        *slot = Some(v);
    }

    pub fn with(mut self, p: Param, v: f64) -> Self {
        self.set(p, v);
        self
    }

    /// Value of a gain that validation has already guaranteed.
    pub(crate) fn req(&self, p: Param) -> Result<f64> {
        self.get(p)
            .ok_or_else(|| Error::InvalidArgument(format!("{} required", p.name())))
    }
}

/// Where a coupling input enters subsystem 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum InjectionKind {
    /// Force/flux injected through the boundary condition at `x0`.
    Delta { x0: f64 },
    /// Moment injected through the bending-moment condition at `x0`.
    DeltaPrime { x0: f64 },
    /// Distributed forcing `amplitude · e^{rate·(1−x)}` on the velocity rows.
    Profile { amplitude: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Displacement,
    Velocity,
}

/// A boundary trace of subsystem 2 read by the observation operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ObservationKind {
    PointValue { component: Component, x0: f64, gain: f64 },
    FirstDerivative { component: Component, x0: f64, gain: f64 },
    SecondDerivative { component: Component, x0: f64, gain: f64 },
    Combination { terms: Vec<ObservationKind> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystemSpec {
    pub id: SystemId,
    pub params: SystemParams,
    /// Space of the driven subsystem.
    pub space1: SpaceSpec,
    /// Space of the free subsystem.
    pub space2: SpaceSpec,
    /// One entry per column of `B`.
    pub injection: Vec<InjectionKind>,
    /// One entry per row of `C`.
    pub observation: Vec<ObservationKind>,
    pub coupling_channels: usize,
}

/// Check that every gain `id` needs is present and strictly positive.
///
/// Never fails; an empty list means the parameters are valid.
pub fn validate_params(id: SystemId, params: &SystemParams) -> Vec<String> {
    let mut violations = Vec::new();
    let required = id.required_params();
    for &p in required {
        match params.get(p) {
            None => violations.push(format!("{} required", p.name())),
            Some(v) if !v.is_finite() => violations.push(format!("{} must be finite", p.name())),
            Some(v) if v <= 0.0 => violations.push(format!("{} must be > 0", p.name())),
            Some(_) => {}
        }
    }
    // q only parametrizes the exponential profile.
    if !required.contains(&Param::Q) && params.q.is_some() {
        violations.push(format!("q is only used by {}", SystemId::KrsticWave));
    }
    for p in [Param::C0, Param::C1, Param::C2, Param::C3] {
        if !required.contains(&p) {
            if let Some(v) = params.get(p) {
                if !(v.is_finite() && v > 0.0) {
                    violations.push(format!("{} must be > 0", p.name()));
                }
            }
        }
    }
    violations
}

/// Resolve a catalog entry into spaces, `B`/`C` descriptors and channel count.
pub fn catalog_lookup(id: SystemId, params: &SystemParams) -> Result<CoupledSystemSpec> {
    let violations = validate_params(id, params);
    if !violations.is_empty() {
        return Err(Error::InvalidParams { id, violations });
    }
    let p = *params;
    let c1 = p.req(Param::C1)?;
    let spec = match id {
        SystemId::BeamBeam2008 => CoupledSystemSpec {
            id,
            params: p,
            space1: beam_free_tip(&p)?,
            space2: beam_clamped_free(&p)?,
            injection: vec![InjectionKind::Delta { x0: 1.0 }],
            observation: vec![ObservationKind::PointValue {
                component: Component::Velocity,
                x0: 1.0,
                gain: c1,
            }],
            coupling_channels: 1,
        },
        SystemId::BeamBeam2017 => CoupledSystemSpec {
            id,
            params: p,
            space1: beam_clamped_free(&p)?,
            space2: beam_free_tip(&p)?,
            injection: vec![InjectionKind::DeltaPrime { x0: 0.0 }],
            observation: vec![ObservationKind::SecondDerivative {
                component: Component::Displacement,
                x0: 0.0,
                gain: 1.0,
            }],
            coupling_channels: 1,
        },
        SystemId::WaveWave2018 => CoupledSystemSpec {
            id,
            params: p,
            space1: wave_robin(&p)?,
            space2: wave_dirichlet_left(&p)?,
            injection: vec![InjectionKind::Delta { x0: 0.0 }],
            observation: vec![ObservationKind::FirstDerivative {
                component: Component::Displacement,
                x0: 0.0,
                gain: 1.0,
            }],
            coupling_channels: 1,
        },
        SystemId::KrsticWave => {
            let q = p.req(Param::Q)?;
            let c0 = p.req(Param::C0)?;
            let row = ObservationKind::Combination {
                terms: vec![
                    ObservationKind::PointValue {
                        component: Component::Displacement,
                        x0: 1.0,
                        gain: q,
                    },
                    ObservationKind::PointValue {
                        component: Component::Velocity,
                        x0: 1.0,
                        gain: c0,
                    },
                ],
            };
            CoupledSystemSpec {
                id,
                params: p,
                space1: wave_robin(&p)?,
                space2: wave_dirichlet_left(&p)?,
                injection: vec![
                    InjectionKind::Profile {
                        amplitude: c1 + q,
                        rate: q,
                    },
                    InjectionKind::Delta { x0: 1.0 },
                ],
                observation: vec![row.clone(), row],
                coupling_channels: 2,
            }
        }
    };
    Ok(spec)
}

/// Clamped at 0, free at 1 with tip shear `c1·g(1)`; energy `∫|f″|² + |g|²`.
fn beam_free_tip(p: &SystemParams) -> Result<SpaceSpec> {
    Ok(SpaceSpec {
        kind: SpaceKind::BeamFreeTip,
        params: SystemParams {
            c1: Some(p.req(Param::C1)?),
            ..Default::default()
        },
        boundary_weights: vec![],
    })
}

/// Pinned at 0 with moment `c2·g′(0) + c3·f′(0)`, free at 1; energy
/// `∫|f″|² + |g|² + c3|f′(0)|²`.
fn beam_clamped_free(p: &SystemParams) -> Result<SpaceSpec> {
    let c3 = p.req(Param::C3)?;
    Ok(SpaceSpec {
        kind: SpaceKind::BeamClampedFree,
        params: SystemParams {
            c2: Some(p.req(Param::C2)?),
            c3: Some(c3),
            ..Default::default()
        },
        boundary_weights: vec![BoundaryWeight {
            functional: BoundaryFunctional::SlopeAtLeft,
            coefficient: c3,
        }],
    })
}

/// `f′(0) = c2·g(0)`, `f′(1) = −c1·f(1)`; energy `∫|f′|² + |g|² + c1|f(1)|²`.
fn wave_robin(p: &SystemParams) -> Result<SpaceSpec> {
    let c1 = p.req(Param::C1)?;
    Ok(SpaceSpec {
        kind: SpaceKind::WaveRobin,
        params: SystemParams {
            c1: Some(c1),
            c2: Some(p.req(Param::C2)?),
            ..Default::default()
        },
        boundary_weights: vec![BoundaryWeight {
            functional: BoundaryFunctional::DisplacementAtRight,
            coefficient: c1,
        }],
    })
}

/// `f(0) = 0`, `f′(1) = −c0·g(1)`; energy `∫|f′|² + |g|²`.
fn wave_dirichlet_left(p: &SystemParams) -> Result<SpaceSpec> {
    Ok(SpaceSpec {
        kind: SpaceKind::WaveDirichletLeft,
        params: SystemParams {
            c0: Some(p.req(Param::C0)?),
            ..Default::default()
        },
        boundary_weights: vec![],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub id: SystemId,
    pub description: &'static str,
    pub required_params: Vec<&'static str>,
}

/// All catalog entries in a fixed order.
pub fn list_systems() -> Vec<CatalogEntry> {
    SystemId::ALL
        .into_iter()
        .map(|id| CatalogEntry {
            id,
            description: id.description(),
            required_params: id.required_params().iter().map(|p| p.name()).collect(),
        })
        .collect()
}
