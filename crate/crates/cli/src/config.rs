//! Experiment configs. Every subcommand has its own schema; unknown fields
//! are rejected everywhere.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use cyclelab::asymptotic::{CircleMap, ClosingScheme, Hypersurface, OneForm, Route, RouteOptions};
use cyclelab::calibration::CalibratorDescriptor;
use cyclelab::curve::{CounterexampleSpec, DisplacementTerm, OscillatorSpec, SpeedFunction};
use cyclelab::homology::Window;
use cyclelab::ksolenoid::TrappingConstants;
use cyclelab::solenoid::{ClassWeight, Parametrization, ScalarWeight, TransversalSystem};
use cyclelab::torus::GeometryDescriptor;
use cyclelab::trig::TrigPoly;

use crate::ConfigError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum ExperimentConfig {
    Asymptotic(AsymptoticConfig),
    Cluster(ClusterConfig),
    Counterexample(CounterexampleConfig),
    Solenoid(SolenoidConfig),
    Ksolenoid(KSolenoidConfig),
    Stablenorm(StableNormConfig),
}

fn flat2() -> GeometryDescriptor {
    GeometryDescriptor { dim: 2, gram: None, conformal: Vec::new() }
}

// ---------------------------------------------------------------------------
// curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum CurveConfig {
    /// `x0 + t v`; with `arcLength` the curve is reparametrized to unit speed.
    Linear {
        velocity: Vec<f64>,
        #[serde(default)]
        start: Option<Vec<f64>>,
        #[serde(default, rename = "arcLength")]
        arc_length: bool,
    },
    /// Trajectory of `x' = X(x)` with trigonometric components.
    Ode {
        field: Vec<TrigPoly>,
        start: Vec<f64>,
        #[serde(rename = "tBack")]
        t_back: f64,
        #[serde(rename = "tForward")]
        t_forward: f64,
        tol: f64,
    },
    Polyline {
        times: Vec<f64>,
        points: Vec<Vec<f64>>,
    },
    Oscillator(OscillatorSpec),
    Counterexample(CounterexampleSpec),
    /// `base + Σ a_j sin(ω_j t + φ_j)` with `Σ |a_j| <= bound`.
    Perturbed {
        base: Box<CurveConfig>,
        terms: Vec<DisplacementTerm>,
        bound: f64,
    },
    Reparametrized {
        base: Box<CurveConfig>,
        speed: SpeedFunction,
    },
}

// ---------------------------------------------------------------------------
// asymptotic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `count` symmetric windows doubling up to total length `span`.
    Symmetric { span: f64, count: usize },
    /// `(-s0 r^j, t0 r^j)`.
    Geometric { s0: f64, t0: f64, ratio: f64, count: usize },
    Explicit { windows: Vec<Window> },
}

/// Optional payload overrides; the coordinate payloads are used otherwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct PayloadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closing: Option<ClosingScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrator: Option<CalibratorDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forms: Option<Vec<OneForm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circles: Option<Vec<CircleMap>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypersurfaces: Option<Vec<Hypersurface>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AsymptoticExpect {
    /// Every route must converge.
    #[serde(default)]
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_tol: Option<f64>,
    /// Maximum pairwise distance between route estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routes_agree: Option<f64>,
    /// Expected verdict of the two-sided Schwartzman test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schwartzman_converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AsymptoticConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "flat2")]
    pub geometry: GeometryDescriptor,
    pub curve: CurveConfig,
    #[serde(default = "all_routes")]
    pub routes: Vec<Route>,
    #[serde(default)]
    pub payload: PayloadConfig,
    pub schedule: ScheduleConfig,
    pub tol: f64,
    #[serde(default)]
    pub options: RouteOptions,
    /// Also run the two-sided Schwartzman test on the schedule.
    #[serde(default)]
    pub schwartzman: bool,
    #[serde(default)]
    pub expect: AsymptoticExpect,
}

fn all_routes() -> Vec<Route> {
    Route::ALL.to_vec()
}

// ---------------------------------------------------------------------------
// cluster

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum GridConfig {
    Geometric {
        #[serde(rename = "tMin")]
        t_min: f64,
        #[serde(rename = "tMax")]
        t_max: f64,
        #[serde(rename = "perDecade")]
        per_decade: usize,
    },
    Explicit {
        #[serde(rename = "tValues")]
        t_values: Vec<f64>,
        #[serde(rename = "sValues")]
        s_values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ClusterExpect {
    /// Balanced samples lie in the additive hull of the one-sided samples.
    #[serde(default)]
    pub balanced_in_hull: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
    /// Some full-cluster sample within this distance of `point`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_near: Option<PointExpect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointExpect {
    pub point: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ClusterConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "flat2")]
    pub geometry: GeometryDescriptor,
    pub curve: CurveConfig,
    pub grid: GridConfig,
    pub stability_tol: f64,
    pub balanced_tol: f64,
    #[serde(default = "default_angular")]
    pub angular_tol: f64,
    #[serde(default = "default_min_norm")]
    pub min_norm: f64,
    /// Reparametrizations for the unparametrized cluster; none skips it.
    #[serde(default)]
    pub speeds: Vec<SpeedFunction>,
    #[serde(default)]
    pub expect: ClusterExpect,
}

fn default_angular() -> f64 {
    0.05
}

fn default_min_norm() -> f64 {
    1e-3
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CounterexampleExpect {
    /// Deepest balanced samples within this distance of `(a_n + b_n)/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_balanced_tol: Option<f64>,
    /// Some full-cluster sample within this distance of 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_reaches_zero: Option<f64>,
    /// Every balanced sample at least this far from 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balanced_separation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CounterexampleConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Standard targets `n = 1..=depth`, unless `spec` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CounterexampleSpec>,
    pub stability_tol: f64,
    #[serde(default)]
    pub expect: CounterexampleExpect,
}

// ---------------------------------------------------------------------------
// solenoids

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedConfig {
    Grid { count: usize },
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RealizeConfig {
    pub parametrization: Parametrization,
    pub t_max: f64,
    #[serde(default = "cross_only")]
    pub routes: Vec<Route>,
    #[serde(default)]
    pub options: RouteOptions,
}

fn cross_only() -> Vec<Route> {
    vec![Route::Cross]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SolenoidExpect {
    /// Largest leaf-class distance to the Ruelle–Sullivan class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    /// Required fraction of seeds within `max_deviation` (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SolenoidConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub base: TransversalSystem,
    pub roof: ScalarWeight,
    pub phi: ClassWeight,
    pub seeds: SeedConfig,
    #[serde(rename = "N")]
    pub n: usize,
    pub tol: f64,
    /// Orbit length for the empirical transversal measures; none skips them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_n: Option<usize>,
    #[serde(default)]
    pub growth_radii: Vec<f64>,
    /// Realize a rotation base as a linear flow on T^2 and compare routes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realize: Option<RealizeConfig>,
    #[serde(default)]
    pub expect: SolenoidExpect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum TrappingConfig {
    /// Slabs in T^3 over a rotation, with intersection-count checking.
    T3 {
        alpha: f64,
        #[serde(default, rename = "wrapCell")]
        wrap_cell: Option<[f64; 2]>,
        #[serde(default = "yes", rename = "areaRoof")]
        area_roof: bool,
    },
    /// Segment slabs of length `roof` (k = 1).
    Roof {
        base: TransversalSystem,
        roof: ScalarWeight,
        class: ClassWeight,
    },
    /// Symbolic slabs.
    Slabs {
        base: TransversalSystem,
        volume: ScalarWeight,
        class: ClassWeight,
        separation: ScalarWeight,
        diameter: ScalarWeight,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct DyadicWindows {
    pub j0: u32,
    pub j1: u32,
    #[serde(default)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct KSolenoidExpect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    /// No exhaustion-bound violations on any seed.
    #[serde(default)]
    pub exhaustion_bound: bool,
    /// Defect ratios non-increasing over the radii.
    #[serde(default)]
    pub defect_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct KSolenoidConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub k: usize,
    pub solenoid: TrappingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<TrappingConstants>,
    #[serde(default = "default_epsilon")]
    pub epsilon0: f64,
    pub seeds: SeedConfig,
    pub windows: DyadicWindows,
    #[serde(default)]
    pub cap_volume: f64,
    pub tol: f64,
    #[serde(default)]
    pub radii: Vec<f64>,
    /// Additional exhaustion checks from random seeds and radius offsets.
    #[serde(default)]
    pub random_exhaustions: usize,
    #[serde(default)]
    pub expect: KSolenoidExpect,
}

fn default_epsilon() -> f64 {
    0.25
}

// ---------------------------------------------------------------------------
// stable norm

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct StableNormExpect {
    /// Expected norms per class, with tolerance `normTol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_tol: Option<f64>,
    /// Relative tolerance for `‖2a‖ = 2‖a‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<f64>,
    #[serde(default)]
    pub audit_clean: bool,
    /// Relative change of `l(a)` when the resolution doubles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct StableNormConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometryDescriptor,
    pub classes: Vec<Vec<i64>>,
    pub n_max: usize,
    pub resolution: usize,
    /// Random class pairs in `[-pairRange, pairRange]^n` for the audit.
    #[serde(default)]
    pub audit_pairs: usize,
    #[serde(default = "default_pair_range")]
    pub pair_range: i64,
    #[serde(default)]
    pub expect: StableNormExpect,
}

fn default_pair_range() -> i64 {
    5
}

// ---------------------------------------------------------------------------

impl ExperimentConfig {
    pub fn subcommand(&self) -> &'static str {
        match self {
            ExperimentConfig::Asymptotic(_) => "asymptotic",
            ExperimentConfig::Cluster(_) => "cluster",
            ExperimentConfig::Counterexample(_) => "counterexample",
            ExperimentConfig::Solenoid(_) => "solenoid",
            ExperimentConfig::Ksolenoid(_) => "ksolenoid",
            ExperimentConfig::Stablenorm(_) => "stablenorm",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Asymptotic(c) => c.seed,
            ExperimentConfig::Cluster(c) => c.seed,
            ExperimentConfig::Counterexample(c) => c.seed,
            ExperimentConfig::Solenoid(c) => c.seed,
            ExperimentConfig::Ksolenoid(c) => c.seed,
            ExperimentConfig::Stablenorm(c) => c.seed,
        }
    }

    fn schema_version(&self) -> u32 {
        match self {
            ExperimentConfig::Asymptotic(c) => c.schema_version,
            ExperimentConfig::Cluster(c) => c.schema_version,
            ExperimentConfig::Counterexample(c) => c.schema_version,
            ExperimentConfig::Solenoid(c) => c.schema_version,
            ExperimentConfig::Ksolenoid(c) => c.schema_version,
            ExperimentConfig::Stablenorm(c) => c.schema_version,
        }
    }

    /// Parses and validates a config. The `subcommand` tag is dispatched by
    /// hand so that error paths survive into the variant.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::new("(root)", e.to_string()))?;
        let obj = value.as_object_mut().ok_or_else(|| ConfigError::new("(root)", "expected a JSON object"))?;
        let sub = match obj.remove("subcommand") {
            Some(serde_json::Value::String(s)) => s,
            Some(_) => return Err(ConfigError::new("subcommand", "expected a string")),
            None => return Err(ConfigError::new("subcommand", "missing field")),
        };
        let cfg = match sub.as_str() {
            "asymptotic" => ExperimentConfig::Asymptotic(variant(value)?),
            "cluster" => ExperimentConfig::Cluster(variant(value)?),
            "counterexample" => ExperimentConfig::Counterexample(variant(value)?),
            "solenoid" => ExperimentConfig::Solenoid(variant(value)?),
            "ksolenoid" => ExperimentConfig::Ksolenoid(variant(value)?),
            "stablenorm" => ExperimentConfig::Stablenorm(variant(value)?),
            other => return Err(ConfigError::new("subcommand", format!("unknown subcommand {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::from_json(&text)?)
    }

    /// Checks the constraints serde cannot express; errors name the field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version() != SCHEMA_VERSION {
            return Err(ConfigError::new("schemaVersion", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version())));
        }
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("must be positive, got {v}")))
            }
        };
        let optional = |field: &str, v: Option<f64>| v.map_or(Ok(()), |x| positive(field, x));
        match self {
            ExperimentConfig::Asymptotic(c) => {
                positive("tol", c.tol)?;
                positive("options.quadratureStep", c.options.quadrature_step)?;
                positive("options.sampleStep", c.options.sample_step)?;
                positive("options.transversalityTol", c.options.transversality_tol)?;
                optional("expect.classTol", c.expect.class_tol)?;
                optional("expect.routesAgree", c.expect.routes_agree)?;
                if c.routes.is_empty() {
                    return Err(ConfigError::new("routes", "at least one route is required"));
                }
                if c.routes.contains(&Route::Birkhoff) {
                    return Err(ConfigError::new("routes", "the birkhoff route applies to solenoids only"));
                }
                if c.expect.rays.is_some() && !c.schwartzman {
                    return Err(ConfigError::new("expect.rays", "ray counts need schwartzman = true"));
                }
                if c.expect.schwartzman_converged.is_some() && !c.schwartzman {
                    return Err(ConfigError::new("expect.schwartzmanConverged", "needs schwartzman = true"));
                }
                if c.expect.class.is_some() != c.expect.class_tol.is_some() {
                    return Err(ConfigError::new("expect.class", "class and classTol go together"));
                }
            }
            ExperimentConfig::Cluster(c) => {
                positive("stabilityTol", c.stability_tol)?;
                positive("balancedTol", c.balanced_tol)?;
                positive("angularTol", c.angular_tol)?;
                positive("minNorm", c.min_norm)?;
                if let Some(p) = &c.expect.full_near {
                    positive("expect.fullNear.tol", p.tol)?;
                }
            }
            ExperimentConfig::Counterexample(c) => {
                positive("stabilityTol", c.stability_tol)?;
                if c.depth.is_some() == c.spec.is_some() {
                    return Err(ConfigError::new("depth", "give exactly one of depth and spec"));
                }
                if c.depth == Some(0) {
                    return Err(ConfigError::new("depth", "must be at least 1"));
                }
                optional("expect.deepBalancedTol", c.expect.deep_balanced_tol)?;
                optional("expect.fullReachesZero", c.expect.full_reaches_zero)?;
                optional("expect.balancedSeparation", c.expect.balanced_separation)?;
            }
            ExperimentConfig::Solenoid(c) => {
                positive("tol", c.tol)?;
                if c.n < 8 {
                    return Err(ConfigError::new("N", "must be at least 8"));
                }
                optional("expect.maxDeviation", c.expect.max_deviation)?;
                optional("expect.empiricalDistance", c.expect.empirical_distance)?;
                optional("expect.realizedAgreement", c.expect.realized_agreement)?;
                if let Some(f) = c.expect.pass_fraction {
                    if !(0.0..=1.0).contains(&f) {
                        return Err(ConfigError::new("expect.passFraction", "must lie in [0, 1]"));
                    }
                }
                if let Some(r) = &c.realize {
                    positive("realize.tMax", r.t_max)?;
                }
                check_seeds("seeds", &c.seeds)?;
            }
            ExperimentConfig::Ksolenoid(c) => {
                positive("tol", c.tol)?;
                optional("expect.maxDeviation", c.expect.max_deviation)?;
                if c.k == 0 {
                    return Err(ConfigError::new("k", "must be at least 1"));
                }
                match c.solenoid {
                    TrappingConfig::T3 { .. } if c.k != 2 => {
                        return Err(ConfigError::new("k", "the T^3 realization has k = 2"));
                    }
                    TrappingConfig::Roof { .. } if c.k != 1 => {
                        return Err(ConfigError::new("k", "roof slabs have k = 1"));
                    }
                    _ => {}
                }
                if c.windows.j1 < c.windows.j0 + 2 || c.windows.j1 > 40 {
                    return Err(ConfigError::new("windows", "need j0 + 2 <= j1 <= 40"));
                }
                if c.cap_volume.is_nan() || c.cap_volume < 0.0 {
                    return Err(ConfigError::new("capVolume", "must be non-negative"));
                }
                check_seeds("seeds", &c.seeds)?;
            }
            ExperimentConfig::Stablenorm(c) => {
                if c.classes.is_empty() {
                    return Err(ConfigError::new("classes", "at least one class is required"));
                }
                if c.n_max < 4 {
                    return Err(ConfigError::new("nMax", "must be at least 4"));
                }
                if c.resolution < 2 {
                    return Err(ConfigError::new("resolution", "must be at least 2"));
                }
                if c.pair_range < 1 {
                    return Err(ConfigError::new("pairRange", "must be at least 1"));
                }
                optional("expect.normTol", c.expect.norm_tol)?;
                optional("expect.homogeneity", c.expect.homogeneity)?;
                optional("expect.refinement", c.expect.refinement)?;
                if let Some(n) = &c.expect.norms {
                    if n.len() != c.classes.len() || c.expect.norm_tol.is_none() {
                        return Err(ConfigError::new("expect.norms", "one norm per class, with normTol"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn variant<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { "(root)".to_string() } else { path }, e.into_inner().to_string())
    })
}

fn check_seeds(field: &str, s: &SeedConfig) -> Result<(), ConfigError> {
    match s {
        SeedConfig::Grid { count } if *count == 0 => Err(ConfigError::new(field, "seed count must be positive")),
        SeedConfig::List(v) if v.is_empty() || v.iter().any(|x| !(0.0..1.0).contains(x)) => {
            Err(ConfigError::new(field, "seeds must be a non-empty list in [0, 1)"))
        }
        _ => Ok(()),
    }
}
