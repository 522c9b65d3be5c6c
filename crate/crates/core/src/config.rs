//! Experiment configuration in TOML.
//!
//! A config has a `[summand]`, a `[counting]` and an `[experiment]` table,
//! each selected by its `kind` key, plus optional `[output]` and
//! `[optimizer]` tables. Unknown keys are rejected. Defaults are filled at
//! parse time so that serializing a parsed config gives the effective one.

use serde::{Deserialize, Serialize};

use crate::counting::{CountingModel, IntensityShape, InterArrival, TabulatedCgf, ZLaw};
use crate::dual::DualVector;
use crate::error::{Error, Result};
use crate::montecarlo::{
    EventMode, HalfSpaceEvent, Method, ScalingFamily, DEFAULT_PLAIN_REPS, DEFAULT_TILTED_REPS,
};
use crate::special::MittagLefflerParams;
use crate::summand::{Kernel, SummandModel};
use crate::variational::OptimizerSettings;

pub const DEFAULT_OUTPUT_DIR: &str = "out";
pub const DEFAULT_RATE_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_LDP_BAND: f64 = 0.15;
pub const DEFAULT_MD_BAND: f64 = 0.02;
pub const DEFAULT_SE_BAND: f64 = 4.0;
pub const DEFAULT_ML_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_CROSSOVER_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MC_REPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub summand: SummandConfig,
    pub counting: CountingConfig,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SummandConfig {
    FiniteSupport {
        atoms: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    /// `±1` with `P(+1) = p`.
    Rademacher {
        #[serde(default = "half")]
        p: f64,
    },
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// Gaussian function values on a grid.
    GridGaussian {
        grid: Vec<f64>,
        mean: Vec<f64>,
        kernel: KernelConfig,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    SquaredExponential { variance: f64, length_scale: f64 },
    Brownian { variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CountingConfig {
    Poisson {
        rate: f64,
    },
    /// Intensity `base + amplitude·sin(2πs/period)`.
    PoissonPeriodic {
        base: f64,
        amplitude: f64,
        period: f64,
    },
    /// Intensity `base + boost·e^{−s/scale}`.
    PoissonDecaying {
        base: f64,
        boost: f64,
        scale: f64,
    },
    FractionalPoisson {
        nu: f64,
        lambda: f64,
    },
    BernoulliConstant {
        p: f64,
    },
    BernoulliRuns {
        lambda: f64,
        c: f64,
    },
    /// Sum of i.i.d. copies of a finitely supported `Z`.
    IidSum {
        values: Vec<u64>,
        probs: Vec<f64>,
    },
    /// Sum of i.i.d. Poisson copies.
    IidSumPoisson {
        mean: f64,
    },
    RenewalExponential {
        rate: f64,
    },
    RenewalGamma {
        shape: f64,
        rate: f64,
    },
    /// Inter-arrival cumulant given by samples `(eta, kappa)`.
    RenewalTabulated {
        eta: Vec<f64>,
        kappa: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub mode: EventMode,
    pub level: f64,
    /// Direction `v` for sum-coordinate events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Rates on the product grid `xs × ys`.
    RateEval {
        xs: Vec<Vec<f64>>,
        ys: Vec<f64>,
        #[serde(default = "yes")]
        variational_check: bool,
        #[serde(default = "rate_tol")]
        tolerance: f64,
    },
    LdpCheck {
        event: EventConfig,
        ns: Vec<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reps: Option<usize>,
        #[serde(default = "tilted")]
        method: Method,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        /// Relative band around the rate infimum.
        #[serde(default = "ldp_band")]
        band: f64,
    },
    MdCheck {
        scaling: ScalingFamily,
        etas: Vec<f64>,
        ns: Vec<u64>,
        /// Only used when the count law has no exact finite-n cumulant.
        #[serde(default = "mc_reps")]
        reps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        /// Relative band at the largest `n`.
        #[serde(default = "md_band")]
        band: f64,
    },
    MomentsCheck {
        ns: Vec<u64>,
        #[serde(default = "mc_reps")]
        reps: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        /// Band in standard errors.
        #[serde(default = "se_band")]
        band: f64,
    },
    CltCheck {
        n: u64,
        #[serde(default = "mc_reps")]
        reps: usize,
        v: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default = "se_band")]
        band: f64,
    },
    /// `E_{ν,β}(x)` on a list of arguments with recurrence and branch
    /// crossover checks.
    MlEval {
        nu: f64,
        beta: f64,
        xs: Vec<f64>,
        #[serde(default = "ml_tol")]
        tolerance: f64,
        #[serde(default = "crossover_tol")]
        crossover_tolerance: f64,
    },
}

fn yes() -> bool {
    true
}
fn rate_tol() -> f64 {
    DEFAULT_RATE_TOLERANCE
}
fn tilted() -> Method {
    Method::Tilted
}
fn ldp_band() -> f64 {
    DEFAULT_LDP_BAND
}
fn md_band() -> f64 {
    DEFAULT_MD_BAND
}
fn se_band() -> f64 {
    DEFAULT_SE_BAND
}
fn mc_reps() -> usize {
    DEFAULT_MC_REPS
}
fn ml_tol() -> f64 {
    DEFAULT_ML_TOLERANCE
}
fn crossover_tol() -> f64 {
    DEFAULT_CROSSOVER_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    DEFAULT_OUTPUT_DIR.into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::RateEval { .. } => "rate-eval",
            ExperimentSpec::LdpCheck { .. } => "ldp-check",
            ExperimentSpec::MdCheck { .. } => "md-check",
            ExperimentSpec::MomentsCheck { .. } => "moments-check",
            ExperimentSpec::CltCheck { .. } => "clt-check",
            ExperimentSpec::MlEval { .. } => "ml-eval",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ExperimentSpec::LdpCheck { seed, .. }
            | ExperimentSpec::MdCheck { seed, .. }
            | ExperimentSpec::MomentsCheck { seed, .. }
            | ExperimentSpec::CltCheck { seed, .. } => *seed,
            _ => None,
        }
    }

    /// Sets the seed of a stochastic experiment; ignored otherwise.
    pub fn set_seed(&mut self, value: u64) {
        match self {
            ExperimentSpec::LdpCheck { seed, .. }
            | ExperimentSpec::MdCheck { seed, .. }
            | ExperimentSpec::MomentsCheck { seed, .. }
            | ExperimentSpec::CltCheck { seed, .. } => *seed = Some(value),
            _ => {}
        }
    }
}

impl SummandConfig {
    pub fn build(&self) -> Result<SummandModel> {
        match self {
            SummandConfig::FiniteSupport { atoms, probs } => {
                SummandModel::finite_support(atoms.clone(), probs.clone())
            }
            SummandConfig::Rademacher { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Validation(format!("p = {p} must lie in [0, 1]")));
                }
                SummandModel::rademacher(*p)
            }
            SummandConfig::Gaussian { mean, cov } => {
                SummandModel::gaussian(mean.clone(), cov.clone())
            }
            SummandConfig::GridGaussian { grid, mean, kernel } => {
                let kernel = match *kernel {
                    KernelConfig::SquaredExponential {
                        variance,
                        length_scale,
                    } => Kernel::SquaredExponential {
                        variance,
                        length_scale,
                    },
                    KernelConfig::Brownian { variance } => Kernel::Brownian { variance },
                };
                Ok(SummandModel::GridFunction(
                    crate::summand::GridFunction::gaussian(grid.clone(), mean.clone(), kernel)?,
                ))
            }
        }
    }
}

impl CountingConfig {
    pub fn build(&self) -> Result<CountingModel> {
        match self {
            CountingConfig::Poisson { rate } => CountingModel::poisson(*rate),
            CountingConfig::PoissonPeriodic {
                base,
                amplitude,
                period,
            } => CountingModel::poisson_inhomogeneous(IntensityShape::Periodic {
                base: *base,
                amplitude: *amplitude,
                period: *period,
            }),
            CountingConfig::PoissonDecaying { base, boost, scale } => {
                CountingModel::poisson_inhomogeneous(IntensityShape::DecayingBoost {
                    base: *base,
                    boost: *boost,
                    scale: *scale,
                })
            }
            CountingConfig::FractionalPoisson { nu, lambda } => {
                CountingModel::fractional_poisson(*nu, *lambda)
            }
            CountingConfig::BernoulliConstant { p } => CountingModel::bernoulli_constant(*p),
            CountingConfig::BernoulliRuns { lambda, c } => {
                CountingModel::bernoulli_runs(*lambda, *c)
            }
            CountingConfig::IidSum { values, probs } => CountingModel::iid_sum(ZLaw::Finite {
                values: values.clone(),
                probs: probs.clone(),
            }),
            CountingConfig::IidSumPoisson { mean } => {
                CountingModel::iid_sum(ZLaw::Poisson { mean: *mean })
            }
            CountingConfig::RenewalExponential { rate } => {
                CountingModel::renewal_exponential(*rate)
            }
            CountingConfig::RenewalGamma { shape, rate } => {
                CountingModel::renewal(InterArrival::Gamma {
                    shape: *shape,
                    rate: *rate,
                })
            }
            CountingConfig::RenewalTabulated { eta, kappa } => CountingModel::renewal(
                InterArrival::Tabulated(TabulatedCgf::new(eta.clone(), kappa.clone())?),
            ),
        }
    }
}

impl EventConfig {
    pub fn build(&self, dim: usize) -> Result<HalfSpaceEvent> {
        match self.mode {
            EventMode::CountCoordinate => HalfSpaceEvent::count(self.level, dim),
            EventMode::SumCoordinate => {
                let v = self.direction.clone().ok_or_else(|| {
                    Error::Validation("sum-coordinate events need a direction".into())
                })?;
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
                HalfSpaceEvent::sum(DualVector::new(v)?, self.level)
            }
        }
    }
}

/// Parsed models of a validated config.
pub struct Models {
    pub summand: SummandModel,
    pub counting: CountingModel,
}

impl ExperimentConfig {
    /// Builds the models, or fails with every validation problem found.
    pub fn validate(&self) -> Result<Models> {
        let mut errors = Vec::new();
        let summand = self
            .summand
            .build()
            .map_err(|e| errors.push(format!("summand: {e}")))
            .ok();
        let counting = self
            .counting
            .build()
            .map_err(|e| errors.push(format!("counting: {e}")))
            .ok();
        if let Err(e) = self.optimizer.validate() {
            errors.push(format!("optimizer: {e}"));
        }
        if self.output.dir.is_empty() {
            errors.push("output.dir must not be empty".into());
        }
        self.validate_experiment(summand.as_ref(), counting.as_ref(), &mut errors);
        match (summand, counting) {
            (Some(summand), Some(counting)) if errors.is_empty() => {
                Ok(Models { summand, counting })
            }
            _ => Err(Error::Config(errors.join("; "))),
        }
    }

    fn validate_experiment(
        &self,
        mx: Option<&SummandModel>,
        mn: Option<&CountingModel>,
        errors: &mut Vec<String>,
    ) {
        let exp = &self.experiment;
        let kind = exp.kind();
        let mut err = |msg: String| errors.push(format!("experiment ({kind}): {msg}"));
        let dim = mx.map(SummandModel::dim);
        let check_dim = |v: &[f64], name: &str, err: &mut dyn FnMut(String)| {
            if let Some(h) = dim {
                if v.len() != h {
                    err(format!(
                        "{name} has length {} but the summand dimension is {h}",
                        v.len()
                    ));
                }
            }
        };
        let check_ns = |ns: &[u64], min_len: usize, err: &mut dyn FnMut(String)| {
            if ns.len() < min_len {
                err(format!("ns needs at least {min_len} entries"));
            }
            if ns.contains(&0) {
                err("ns entries must be at least 1".into());
            }
            if ns.windows(2).any(|w| w[0] >= w[1]) {
                err("ns must be strictly increasing".into());
            }
        };
        let check_reps = |reps: usize, err: &mut dyn FnMut(String)| {
            if reps == 0 {
                err("reps must be at least 1".into());
            }
        };
        let positive = |v: f64, name: &str, err: &mut dyn FnMut(String)| {
            if !(v > 0.0 && v.is_finite()) {
                err(format!("{name} = {v} must be positive and finite"));
            }
        };
        if exp.seed().is_none() && self.is_stochastic(mn) {
            err("seed is required for stochastic experiments".into());
        }
        match exp {
            ExperimentSpec::RateEval {
                xs, ys, tolerance, ..
            } => {
                if xs.is_empty() || ys.is_empty() {
                    err("xs and ys must be nonempty".into());
                }
                for x in xs {
                    check_dim(x, "an entry of xs", &mut err);
                    if x.iter().any(|c| !c.is_finite()) {
                        err("xs entries must be finite".into());
                    }
                }
                if ys.iter().any(|y| !y.is_finite()) {
                    err("ys entries must be finite".into());
                }
                positive(*tolerance, "tolerance", &mut err);
            }
            ExperimentSpec::LdpCheck {
                event,
                ns,
                reps,
                band,
                ..
            } => {
                check_ns(ns, 2, &mut err);
                check_reps(reps.unwrap_or(1), &mut err);
                positive(*band, "band", &mut err);
                if let Some(h) = dim {
                    if let Err(e) = event.build(h) {
                        err(format!("event: {e}"));
                    }
                }
                if event.mode == EventMode::CountCoordinate && event.direction.is_some() {
                    err("count-coordinate events take no direction".into());
                }
            }
            ExperimentSpec::MdCheck {
                scaling,
                etas,
                ns,
                reps,
                band,
                ..
            } => {
                check_ns(ns, 1, &mut err);
                check_reps(*reps, &mut err);
                positive(*band, "band", &mut err);
                if etas.is_empty() || etas.iter().any(|e| !e.is_finite()) {
                    err("etas must be nonempty and finite".into());
                }
                if let Err(e) = scaling.validate(ns) {
                    err(format!("scaling: {e}"));
                }
            }
            ExperimentSpec::MomentsCheck {
                ns,
                reps,
                u,
                v,
                band,
                ..
            } => {
                check_ns(ns, 1, &mut err);
                check_reps(*reps, &mut err);
                check_dim(u, "u", &mut err);
                check_dim(v, "v", &mut err);
                positive(*band, "band", &mut err);
            }
            ExperimentSpec::CltCheck {
                n, reps, v, band, ..
            } => {
                if *n == 0 {
                    err("n must be at least 1".into());
                }
                if *reps < 2 {
                    err("reps must be at least 2".into());
                }
                check_dim(v, "v", &mut err);
                positive(*band, "band", &mut err);
            }
            ExperimentSpec::MlEval {
                nu,
                beta,
                xs,
                tolerance,
                crossover_tolerance,
            } => {
                if xs.is_empty() {
                    err("xs must be nonempty".into());
                }
                for &x in xs {
                    if let Err(e) = MittagLefflerParams::new(*nu, *beta, x) {
                        err(e.to_string());
                        break;
                    }
                }
                positive(*tolerance, "tolerance", &mut err);
                positive(*crossover_tolerance, "crossover_tolerance", &mut err);
            }
        }
        if let (
            Some(mn),
            ExperimentSpec::LdpCheck {
                method: Method::Tilted,
                ..
            },
        ) = (mn, exp)
        {
            if matches!(mn, CountingModel::Renewal { .. }) {
                err(
                    "tilted estimation is not available for renewal counts; use method = \"plain\""
                        .into(),
                );
            }
        }
    }

    fn is_stochastic(&self, mn: Option<&CountingModel>) -> bool {
        match &self.experiment {
            ExperimentSpec::LdpCheck { .. }
            | ExperimentSpec::MomentsCheck { .. }
            | ExperimentSpec::CltCheck { .. } => true,
            ExperimentSpec::MdCheck { .. } => matches!(mn, Some(CountingModel::Renewal { .. })),
            ExperimentSpec::RateEval { .. } | ExperimentSpec::MlEval { .. } => false,
        }
    }

    /// Fills defaults that depend on other fields.
    fn fill_defaults(&mut self) {
        if let ExperimentSpec::LdpCheck { reps, method, .. } = &mut self.experiment {
            if reps.is_none() {
                *reps = Some(match method {
                    Method::Tilted => DEFAULT_TILTED_REPS,
                    Method::Plain => DEFAULT_PLAIN_REPS,
                });
            }
        }
    }

    /// The effective config as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses a TOML config and fills defaults without checking domains.
pub fn parse_unvalidated(text: &str) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.fill_defaults();
    Ok(cfg)
}

/// Parses and validates a TOML config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[summand]
kind = "rademacher"

[counting]
kind = "poisson"
rate = 1.0

[experiment]
kind = "rate-eval"
xs = [[0.0], [0.5]]
ys = [1.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.summand, SummandConfig::Rademacher { p: 0.5 });
        assert_eq!(cfg.output.dir, "out");
        assert_eq!(cfg.optimizer, OptimizerSettings::default());
        match cfg.experiment {
            ExperimentSpec::RateEval {
                variational_check,
                tolerance,
                ..
            } => {
                assert!(variational_check);
                assert_eq!(tolerance, 1e-5);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn nu_outside_domain_is_reported() {
        let text = MINIMAL.replace(
            "kind = \"poisson\"\nrate = 1.0",
            "kind = \"fractional-poisson\"\nnu = 1.5\nlambda = 1.0",
        );
        let e = parse_config(&text).unwrap_err().to_string();
        assert!(e.contains("(0, 1]"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("rate = 1.0", "rate = 1.0\nrat = 2.0");
        let e = parse_config(&text).unwrap_err().to_string();
        assert!(e.contains("rat"), "{e}");
    }

    #[test]
    fn missing_seed_on_ldp_check() {
        let text = r#"
[summand]
kind = "rademacher"
[counting]
kind = "poisson"
rate = 1.0
[experiment]
kind = "ldp-check"
ns = [50, 100]
event = { mode = "count-coordinate", level = 2.0 }
"#;
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains("seed"), "{e}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = r#"
[summand]
kind = "rademacher"
p = 1.5
[counting]
kind = "fractional-poisson"
nu = 2.0
lambda = 1.0
[experiment]
kind = "clt-check"
n = 0
v = [1.0]
"#;
        let e = parse_config(text).unwrap_err().to_string();
        for needle in ["summand", "counting", "seed", "n must be"] {
            assert!(e.contains(needle), "missing {needle}: {e}");
        }
    }
}
