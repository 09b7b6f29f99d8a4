//! Run specifications: the JSON documents the CLI executes.
//!
//! A run spec names a solver, describes the problem (generated from a seed
//! or loaded from a file), and optionally tunes the solver through a block
//! keyed by the solver's own name. Parsing is strict — unknown keys are
//! rejected with their names — and [`parse_run_spec`] returns the spec with
//! every default filled in, so serializing it back yields a complete
//! document that parses to the same value (a fixed point).

use saddle_crn::baselines::BaselineMethod;
use saddle_crn::crn::{GammaRule, SolverConfig};
use saddle_crn::homotopy::HomotopyParams;
use saddle_crn::subproblem::SubproblemOptions;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a spec document was rejected.
#[derive(Debug, Error)]
pub enum SpecError {
    /// The document is not valid JSON or misses a required key; serde's
    /// message names the key and position.
    #[error("run spec is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    /// The document parsed but a value is out of range, missing, or
    /// inconsistent with the chosen solver.
    #[error("run spec key `{key}`: {detail}")]
    Invalid { key: String, detail: String },
}

fn invalid(key: impl Into<String>, detail: impl Into<String>) -> SpecError {
    SpecError::Invalid {
        key: key.into(),
        detail: detail.into(),
    }
}

/// Which algorithm a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Cubic-regularized Newton with the merit-decrease globalization.
    Crn,
    /// Homotopy continuation with a Lipschitz error bound (θ = 1).
    Hc,
    /// Homotopy continuation with a Hölder error bound (θ supplied).
    HcTheta,
    /// Extragradient.
    Eg,
    /// Optimistic gradient descent-ascent.
    Ogda,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Crn => "crn",
            SolverKind::Hc => "hc",
            SolverKind::HcTheta => "hc_theta",
            SolverKind::Eg => "eg",
            SolverKind::Ogda => "ogda",
        }
    }
}

/// The problem a run solves: either a file reference or a seeded generator.
///
/// Exactly one of `file` and `kind` must be present. Generators require
/// `n`, `m`, and `seed`; the logistic family adds `M1`/`M2` sample counts,
/// the quadratic family an optional `ridge` (default 1.0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "M1", default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<usize>,
    #[serde(rename = "M2", default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
}

impl ProblemSpec {
    /// A file-backed problem.
    pub fn from_file(path: impl Into<String>) -> Self {
        Self {
            file: Some(path.into()),
            kind: None,
            n: None,
            m: None,
            m1: None,
            m2: None,
            seed: None,
            ridge: None,
        }
    }

    /// A seeded quadratic generator (`ridge` defaults to 1.0 on finalize).
    pub fn quadratic(n: usize, m: usize, seed: u64) -> Self {
        Self {
            file: None,
            kind: Some("quadratic".into()),
            n: Some(n),
            m: Some(m),
            m1: None,
            m2: None,
            seed: Some(seed),
            ridge: None,
        }
    }

    /// A seeded logistic generator.
    pub fn logistic(n: usize, m: usize, m1: usize, m2: usize, seed: u64) -> Self {
        Self {
            file: None,
            kind: Some("logistic".into()),
            n: Some(n),
            m: Some(m),
            m1: Some(m1),
            m2: Some(m2),
            seed: Some(seed),
            ridge: None,
        }
    }

    fn require(value: Option<usize>, key: &str) -> Result<usize, SpecError> {
        let v = value.ok_or_else(|| invalid(key, "required for generated problems"))?;
        if v == 0 {
            return Err(invalid(key, "must be at least 1"));
        }
        Ok(v)
    }

    fn forbid<T>(value: &Option<T>, key: &str, detail: &str) -> Result<(), SpecError> {
        if value.is_some() {
            return Err(invalid(key, detail));
        }
        Ok(())
    }

    pub(crate) fn finalize(&mut self) -> Result<(), SpecError> {
        if self.file.is_some() {
            let clash = "cannot combine with problem.file";
            Self::forbid(&self.kind, "problem.kind", clash)?;
            Self::forbid(&self.n, "problem.n", clash)?;
            Self::forbid(&self.m, "problem.m", clash)?;
            Self::forbid(&self.m1, "problem.M1", clash)?;
            Self::forbid(&self.m2, "problem.M2", clash)?;
            Self::forbid(&self.seed, "problem.seed", clash)?;
            Self::forbid(&self.ridge, "problem.ridge", clash)?;
            return Ok(());
        }
        let kind = self.kind.as_deref().ok_or_else(|| {
            invalid("problem.kind", "either problem.file or problem.kind is required")
        })?;
        Self::require(self.n, "problem.n")?;
        Self::require(self.m, "problem.m")?;
        if self.seed.is_none() {
            return Err(invalid("problem.seed", "required for generated problems"));
        }
        match kind {
            "quadratic" => {
                let only_logistic = "only applies to logistic problems";
                Self::forbid(&self.m1, "problem.M1", only_logistic)?;
                Self::forbid(&self.m2, "problem.M2", only_logistic)?;
                let ridge = self.ridge.get_or_insert(1.0);
                if !(*ridge >= 0.0 && ridge.is_finite()) {
                    return Err(invalid(
                        "problem.ridge",
                        format!("must be finite and non-negative, got {ridge:e}"),
                    ));
                }
            }
            "logistic" => {
                Self::require(self.m1, "problem.M1")?;
                Self::require(self.m2, "problem.M2")?;
                Self::forbid(&self.ridge, "problem.ridge", "only applies to quadratic problems")?;
            }
            other => {
                return Err(invalid(
                    "problem.kind",
                    format!("unknown kind `{other}`; expected `quadratic` or `logistic`"),
                ));
            }
        }
        Ok(())
    }
}

/// Spelling of the cubic-weight rule in spec documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRuleName {
    #[default]
    ClosedForm,
    Backtracking,
}

impl From<GammaRuleName> for GammaRule {
    fn from(name: GammaRuleName) -> Self {
        match name {
            GammaRuleName::ClosedForm => GammaRule::ClosedForm,
            GammaRuleName::Backtracking => GammaRule::Backtracking,
        }
    }
}

fn d_crn_epsilon() -> f64 {
    1e-12
}
fn d_crn_max_iterations() -> usize {
    1000
}
fn d_alpha() -> f64 {
    0.1
}
fn d_one() -> f64 {
    1.0
}
fn d_rho() -> f64 {
    0.5
}
fn d_sub_tolerance() -> f64 {
    1e-5
}
fn d_sub_max_iterations() -> usize {
    100
}
fn d_true() -> bool {
    true
}
fn d_hc_epsilon() -> f64 {
    1e-6
}
fn d_guard_cap() -> f64 {
    1e6
}
fn d_max_steps() -> usize {
    100_000
}
fn d_phase1_max_iterations() -> usize {
    10_000
}
fn d_baseline_epsilon() -> f64 {
    1e-12
}
fn d_baseline_max_iterations() -> usize {
    100_000
}
fn d_divergence_factor() -> f64 {
    1e3
}
fn d_trace_path() -> String {
    "trace.csv".into()
}
fn d_summary_path() -> String {
    "summary.json".into()
}

/// Parameters of the cubic-regularized Newton solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrnBlock {
    /// Merit value that counts as solved.
    #[serde(default = "d_crn_epsilon")]
    pub epsilon: f64,
    #[serde(default = "d_crn_max_iterations")]
    pub max_iterations: usize,
    /// Short-step fraction α ∈ (0, 1].
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Cubic-weight cap γ̄ (0 means pure Newton steps).
    #[serde(default = "d_one")]
    pub gamma_bar: f64,
    /// Backtracking shrink factor ρ ∈ (0, 1).
    #[serde(default = "d_rho")]
    pub rho: f64,
    #[serde(default)]
    pub gamma_rule: GammaRuleName,
    /// Residual threshold of the inner two-variable Newton iteration.
    #[serde(default = "d_sub_tolerance")]
    pub sub_tolerance: f64,
    #[serde(default = "d_sub_max_iterations")]
    pub sub_max_iterations: usize,
    /// Start each model solve from the previous norm pair.
    #[serde(default = "d_true")]
    pub warm_start: bool,
}

impl Default for CrnBlock {
    fn default() -> Self {
        Self {
            epsilon: d_crn_epsilon(),
            max_iterations: d_crn_max_iterations(),
            alpha: d_alpha(),
            gamma_bar: d_one(),
            rho: d_rho(),
            gamma_rule: GammaRuleName::default(),
            sub_tolerance: d_sub_tolerance(),
            sub_max_iterations: d_sub_max_iterations(),
            warm_start: d_true(),
        }
    }
}

impl CrnBlock {
    /// The solver configuration this block describes. `timing` is supplied
    /// by the run spec's top-level flag.
    pub fn to_config(&self, timing: bool) -> SolverConfig<f64> {
        SolverConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            alpha: self.alpha,
            gamma_bar: self.gamma_bar,
            rho: self.rho,
            gamma_rule: self.gamma_rule.into(),
            sub: SubproblemOptions {
                tolerance: self.sub_tolerance,
                max_iterations: self.sub_max_iterations,
                ..SubproblemOptions::default()
            },
            warm_start: self.warm_start,
            timing,
        }
    }
}

/// Parameters of the homotopy continuation solver (θ = 1 when used as the
/// `hc` block; `hc_theta` layers a Hölder exponent on top).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HcBlock {
    /// Target distance to the saddle point of the unregularized problem.
    #[serde(default = "d_hc_epsilon")]
    pub epsilon: f64,
    /// Error-bound constant C of the regularization path.
    #[serde(default = "d_one")]
    pub error_bound_c: f64,
    /// Schedule aggressiveness τ ∈ (0, 1].
    #[serde(default = "d_one")]
    pub tau: f64,
    /// Initial regularization weight ν₀.
    #[serde(default = "d_one")]
    pub nu0: f64,
    /// Cap on the membership radius factor.
    #[serde(default = "d_guard_cap")]
    pub guard_cap: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    #[serde(default = "d_phase1_max_iterations")]
    pub phase1_max_iterations: usize,
    #[serde(default = "d_sub_tolerance")]
    pub sub_tolerance: f64,
    #[serde(default = "d_sub_max_iterations")]
    pub sub_max_iterations: usize,
}

impl Default for HcBlock {
    fn default() -> Self {
        Self {
            epsilon: d_hc_epsilon(),
            error_bound_c: d_one(),
            tau: d_one(),
            nu0: d_one(),
            guard_cap: d_guard_cap(),
            max_steps: d_max_steps(),
            phase1_max_iterations: d_phase1_max_iterations(),
            sub_tolerance: d_sub_tolerance(),
            sub_max_iterations: d_sub_max_iterations(),
        }
    }
}

impl HcBlock {
    /// The continuation parameters this block describes at exponent `theta`.
    pub fn to_params(&self, theta: f64, timing: bool) -> HomotopyParams<f64> {
        HomotopyParams {
            epsilon: self.epsilon,
            error_bound_c: self.error_bound_c,
            theta,
            tau: self.tau,
            nu0: self.nu0,
            guard_cap: self.guard_cap,
            max_steps: self.max_steps,
            phase1_max_iterations: self.phase1_max_iterations,
            sub: SubproblemOptions {
                tolerance: self.sub_tolerance,
                max_iterations: self.sub_max_iterations,
                ..SubproblemOptions::default()
            },
            timing,
        }
    }
}

/// Parameters of the Hölder-exponent continuation solver: the `hc` fields
/// plus the mandatory exponent θ ∈ (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HcThetaBlock {
    /// Hölder exponent of the error bound. Required; θ = 1 reproduces the
    /// plain `hc` solver.
    pub theta: f64,
    #[serde(default = "d_hc_epsilon")]
    pub epsilon: f64,
    #[serde(default = "d_one")]
    pub error_bound_c: f64,
    #[serde(default = "d_one")]
    pub tau: f64,
    #[serde(default = "d_one")]
    pub nu0: f64,
    #[serde(default = "d_guard_cap")]
    pub guard_cap: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    #[serde(default = "d_phase1_max_iterations")]
    pub phase1_max_iterations: usize,
    #[serde(default = "d_sub_tolerance")]
    pub sub_tolerance: f64,
    #[serde(default = "d_sub_max_iterations")]
    pub sub_max_iterations: usize,
}

impl HcThetaBlock {
    pub fn to_params(&self, timing: bool) -> HomotopyParams<f64> {
        HomotopyParams {
            epsilon: self.epsilon,
            error_bound_c: self.error_bound_c,
            theta: self.theta,
            tau: self.tau,
            nu0: self.nu0,
            guard_cap: self.guard_cap,
            max_steps: self.max_steps,
            phase1_max_iterations: self.phase1_max_iterations,
            sub: SubproblemOptions {
                tolerance: self.sub_tolerance,
                max_iterations: self.sub_max_iterations,
                ..SubproblemOptions::default()
            },
            timing,
        }
    }
}

/// Parameters of the first-order baselines. `eta` defaults to the step
/// size the method was benchmarked with (0.04 for `eg`, 0.02 for `ogda`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "d_baseline_epsilon")]
    pub epsilon: f64,
    #[serde(default = "d_baseline_max_iterations")]
    pub max_iterations: usize,
    /// Merit growth over the start value treated as divergence.
    #[serde(default = "d_divergence_factor")]
    pub divergence_factor: f64,
}

impl Default for BaselineBlock {
    fn default() -> Self {
        Self {
            eta: None,
            epsilon: d_baseline_epsilon(),
            max_iterations: d_baseline_max_iterations(),
            divergence_factor: d_divergence_factor(),
        }
    }
}

impl BaselineBlock {
    pub fn to_config(
        &self,
        method: BaselineMethod,
        timing: bool,
    ) -> saddle_crn::BaselineConfig<f64> {
        saddle_crn::BaselineConfig {
            method,
            eta: self.eta.expect("eta is filled during spec finalization"),
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            divergence_factor: self.divergence_factor,
            timing,
        }
    }
}

/// Where a run compares its iterates against a known solution, filling the
/// trace's distance column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// `exact` (closed-form saddle point of a quadratic), `refine` (a
    /// high-precision solver run), or `file` (a stored point).
    pub kind: String,
    /// Point file for `kind = "file"`: JSON `{"x": [...], "y": [...]}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Merit target of the refining run (`kind = "refine"`, default 1e-26).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl ReferenceSpec {
    fn finalize(&mut self) -> Result<(), SpecError> {
        match self.kind.as_str() {
            "exact" => {
                if self.path.is_some() {
                    return Err(invalid("reference.path", "only applies to kind `file`"));
                }
                if self.epsilon.is_some() {
                    return Err(invalid("reference.epsilon", "only applies to kind `refine`"));
                }
            }
            "refine" => {
                if self.path.is_some() {
                    return Err(invalid("reference.path", "only applies to kind `file`"));
                }
                let eps = self.epsilon.get_or_insert(1e-26);
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(invalid(
                        "reference.epsilon",
                        format!("must be positive and finite, got {eps:e}"),
                    ));
                }
            }
            "file" => {
                if self.path.is_none() {
                    return Err(invalid("reference.path", "required for kind `file`"));
                }
                if self.epsilon.is_some() {
                    return Err(invalid("reference.epsilon", "only applies to kind `refine`"));
                }
            }
            other => {
                return Err(invalid(
                    "reference.kind",
                    format!("unknown kind `{other}`; expected `exact`, `refine`, or `file`"),
                ));
            }
        }
        Ok(())
    }
}

/// Output locations. Relative paths resolve against the spec file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "d_trace_path")]
    pub trace: String,
    #[serde(default = "d_summary_path")]
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trace: d_trace_path(),
            summary: d_summary_path(),
        }
    }
}

/// An explicit starting point. Defaults to the origin when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// A complete run description.
///
/// The solver's parameter block is keyed by the solver name; blocks for
/// other solvers are rejected. [`RunSpec::finalize`] (called by
/// [`parse_run_spec`]) inserts the block when it is absent and fills every
/// default, so the spec always serializes with its effective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub solver: SolverKind,
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crn: Option<CrnBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc: Option<HcBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc_theta: Option<HcThetaBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eg: Option<BaselineBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ogda: Option<BaselineBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<StartSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Record wall-clock times in the trace (makes trace files
    /// non-reproducible byte-for-byte).
    #[serde(default)]
    pub timing: bool,
}

impl RunSpec {
    /// A run of `solver` on `problem` with all parameters at their
    /// defaults (finalized).
    pub fn new(solver: SolverKind, problem: ProblemSpec) -> Result<Self, SpecError> {
        let mut spec = Self {
            solver,
            problem,
            crn: None,
            hc: None,
            hc_theta: None,
            eg: None,
            ogda: None,
            reference: None,
            z0: None,
            output: OutputSpec::default(),
            timing: false,
        };
        spec.finalize()?;
        Ok(spec)
    }

    fn reject_foreign_block<T>(
        block: &Option<T>,
        name: &str,
        solver: SolverKind,
    ) -> Result<(), SpecError> {
        if block.is_some() && name != solver.as_str() {
            return Err(invalid(
                name,
                format!("parameter block does not apply to solver `{}`", solver.as_str()),
            ));
        }
        Ok(())
    }

    /// Validates the document and fills every default in place. Idempotent.
    pub fn finalize(&mut self) -> Result<(), SpecError> {
        self.problem.finalize()?;
        Self::reject_foreign_block(&self.crn, "crn", self.solver)?;
        Self::reject_foreign_block(&self.hc, "hc", self.solver)?;
        Self::reject_foreign_block(&self.hc_theta, "hc_theta", self.solver)?;
        Self::reject_foreign_block(&self.eg, "eg", self.solver)?;
        Self::reject_foreign_block(&self.ogda, "ogda", self.solver)?;

        let prefix = |key: &'static str| format!("{}.{}", self.solver.as_str(), key);
        match self.solver {
            SolverKind::Crn => {
                let block = self.crn.get_or_insert_with(CrnBlock::default);
                block
                    .to_config(false)
                    .validate()
                    .map_err(|e| invalid(prefix(e.key), e.detail))?;
            }
            SolverKind::Hc => {
                let block = self.hc.get_or_insert_with(HcBlock::default);
                block
                    .to_params(1.0, false)
                    .validate()
                    .map_err(|e| invalid(prefix(e.key), e.detail))?;
            }
            SolverKind::HcTheta => {
                let block = self.hc_theta.as_ref().ok_or_else(|| {
                    invalid(
                        "hc_theta",
                        "solver `hc_theta` needs an `hc_theta` block carrying `theta`",
                    )
                })?;
                block
                    .to_params(false)
                    .validate()
                    .map_err(|e| invalid(prefix(e.key), e.detail))?;
            }
            SolverKind::Eg | SolverKind::Ogda => {
                let (block, preset, method) = if self.solver == SolverKind::Eg {
                    (self.eg.get_or_insert_with(BaselineBlock::default), 0.04, BaselineMethod::Extragradient)
                } else {
                    (self.ogda.get_or_insert_with(BaselineBlock::default), 0.02, BaselineMethod::Ogda)
                };
                block.eta.get_or_insert(preset);
                block
                    .to_config(method, false)
                    .validate()
                    .map_err(|e| invalid(prefix(e.key), e.detail))?;
            }
        }
        if let Some(reference) = self.reference.as_mut() {
            reference.finalize()?;
        }
        if self.output.trace.is_empty() {
            return Err(invalid("output.trace", "must not be empty"));
        }
        if self.output.summary.is_empty() {
            return Err(invalid("output.summary", "must not be empty"));
        }
        Ok(())
    }

    /// The document with every effective value, pretty-printed.
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("run specs always serialize");
        text.push('\n');
        text
    }
}

/// Parses and finalizes a run spec document.
pub fn parse_run_spec(text: &str) -> Result<RunSpec, SpecError> {
    let mut spec: RunSpec = serde_json::from_str(text)?;
    spec.finalize()?;
    Ok(spec)
}

/// A problem plus a descending ν ladder for error-bound fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub problem: ProblemSpec,
    /// Strictly descending positive regularization weights (≥ 5 values).
    pub nus: Vec<f64>,
}

/// Parses and finalizes an error-bound fit spec.
pub fn parse_fit_spec(text: &str) -> Result<FitSpec, SpecError> {
    let mut spec: FitSpec = serde_json::from_str(text)?;
    spec.problem.finalize()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_reference_example_parses_with_defaults_filled() {
        let text = r#"{
            "solver": "crn",
            "problem": {"kind": "logistic", "n": 100, "m": 200, "M1": 1000, "M2": 1000, "seed": 7},
            "crn": {"epsilon": 1e-12, "gamma_bar": 1.0, "rho": 0.5, "alpha": 0.1}
        }"#;
        let spec = parse_run_spec(text).expect("the documented example must parse");
        assert_eq!(spec.solver, SolverKind::Crn);
        let block = spec.crn.as_ref().expect("block present");
        assert_eq!(block.max_iterations, 1000);
        assert_eq!(block.gamma_rule, GammaRuleName::ClosedForm);
        assert!(block.warm_start);
        assert_eq!(spec.output.trace, "trace.csv");
        assert_eq!(spec.output.summary, "summary.json");
        assert!(!spec.timing);
    }

    #[test]
    fn an_empty_document_reports_the_missing_solver_key() {
        let err = parse_run_spec("{}").expect_err("must fail");
        assert!(
            err.to_string().contains("`solver`"),
            "error must name the missing key, got: {err}"
        );
    }

    #[test]
    fn an_out_of_range_shrink_factor_reports_its_key() {
        let text = r#"{
            "solver": "crn",
            "problem": {"kind": "quadratic", "n": 2, "m": 2, "seed": 1},
            "crn": {"rho": 1.5}
        }"#;
        let err = parse_run_spec(text).expect_err("must fail");
        assert!(
            err.to_string().contains("rho"),
            "error must name the offending key, got: {err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let top = r#"{"solver": "crn", "problem": {"kind": "quadratic", "n": 2, "m": 2, "seed": 1}, "stepsize": 0.1}"#;
        let err = parse_run_spec(top).expect_err("unknown top-level key");
        assert!(err.to_string().contains("stepsize"), "got: {err}");

        let nested = r#"{"solver": "crn", "problem": {"kind": "quadratic", "n": 2, "m": 2, "seed": 1}, "crn": {"gamm_bar": 1.0}}"#;
        let err = parse_run_spec(nested).expect_err("unknown block key");
        assert!(err.to_string().contains("gamm_bar"), "got: {err}");
    }

    #[test]
    fn blocks_for_other_solvers_are_rejected() {
        let text = r#"{
            "solver": "crn",
            "problem": {"kind": "quadratic", "n": 2, "m": 2, "seed": 1},
            "eg": {"eta": 0.04}
        }"#;
        let err = parse_run_spec(text).expect_err("must fail");
        let msg = err.to_string();
        assert!(msg.contains("`eg`") && msg.contains("crn"), "got: {msg}");
    }

    #[test]
    fn the_theta_variant_requires_its_exponent() {
        let text = r#"{
            "solver": "hc_theta",
            "problem": {"kind": "quadratic", "n": 1, "m": 1, "seed": 1}
        }"#;
        let err = parse_run_spec(text).expect_err("missing block must fail");
        assert!(err.to_string().contains("theta"), "got: {err}");

        let no_theta = r#"{
            "solver": "hc_theta",
            "problem": {"kind": "quadratic", "n": 1, "m": 1, "seed": 1},
            "hc_theta": {"epsilon": 1e-4}
        }"#;
        let err = parse_run_spec(no_theta).expect_err("missing theta must fail");
        assert!(err.to_string().contains("theta"), "got: {err}");
    }

    #[test]
    fn generator_fields_are_cross_checked_by_kind() {
        let missing = r#"{"solver": "crn", "problem": {"kind": "logistic", "n": 3, "m": 4, "M2": 10, "seed": 1}}"#;
        let err = parse_run_spec(missing).expect_err("missing M1");
        assert!(err.to_string().contains("problem.M1"), "got: {err}");

        let stray = r#"{"solver": "crn", "problem": {"kind": "quadratic", "n": 3, "m": 4, "seed": 1, "M1": 5}}"#;
        let err = parse_run_spec(stray).expect_err("M1 on quadratic");
        assert!(err.to_string().contains("problem.M1"), "got: {err}");

        let both = r#"{"solver": "crn", "problem": {"file": "p.json", "kind": "quadratic"}}"#;
        let err = parse_run_spec(both).expect_err("file plus kind");
        assert!(err.to_string().contains("problem.kind"), "got: {err}");

        let neither = r#"{"solver": "crn", "problem": {}}"#;
        let err = parse_run_spec(neither).expect_err("no problem source");
        assert!(err.to_string().contains("problem"), "got: {err}");
    }

    #[test]
    fn serialization_is_a_parse_fixed_point_for_every_solver() {
        let texts = [
            r#"{"solver": "crn", "problem": {"kind": "logistic", "n": 4, "m": 5, "M1": 20, "M2": 25, "seed": 3}}"#,
            r#"{"solver": "hc", "problem": {"kind": "quadratic", "n": 1, "m": 1, "seed": 0}, "hc": {"epsilon": 1e-4}}"#,
            r#"{"solver": "hc_theta", "problem": {"kind": "quadratic", "n": 1, "m": 1, "seed": 0}, "hc_theta": {"theta": 0.5}}"#,
            r#"{"solver": "eg", "problem": {"kind": "quadratic", "n": 2, "m": 3, "seed": 9}, "timing": false}"#,
            r#"{"solver": "ogda", "problem": {"kind": "quadratic", "n": 2, "m": 3, "seed": 9}, "ogda": {"max_iterations": 10}}"#,
            r#"{"solver": "crn", "problem": {"kind": "quadratic", "n": 2, "m": 2, "seed": 4}, "reference": {"kind": "refine"}}"#,
        ];
        for text in texts {
            let spec = parse_run_spec(text).expect("fixture must parse");
            let echoed = spec.to_json();
            let respun = parse_run_spec(&echoed).expect("echoed spec must parse");
            assert_eq!(respun, spec, "round trip changed the spec for {text}");
            assert_eq!(respun.to_json(), echoed, "serialization must be stable");
        }
    }

    #[test]
    fn baseline_step_sizes_default_per_method() {
        let eg = parse_run_spec(
            r#"{"solver": "eg", "problem": {"kind": "quadratic", "n": 1, "m": 1, "seed": 0}}"#,
        )
        .unwrap();
        assert_eq!(eg.eg.unwrap().eta, Some(0.04));
        let ogda = parse_run_spec(
            r#"{"solver": "ogda", "problem": {"kind": "quadratic", "n": 1, "m": 1, "seed": 0}}"#,
        )
        .unwrap();
        assert_eq!(ogda.ogda.unwrap().eta, Some(0.02));
    }

    #[test]
    fn reference_specs_cross_check_their_fields() {
        let base = |rest: &str| {
            format!(
                r#"{{"solver": "crn", "problem": {{"kind": "quadratic", "n": 1, "m": 1, "seed": 0}}, "reference": {rest}}}"#
            )
        };
        let err = parse_run_spec(&base(r#"{"kind": "file"}"#)).expect_err("file needs path");
        assert!(err.to_string().contains("reference.path"), "got: {err}");
        let err =
            parse_run_spec(&base(r#"{"kind": "exact", "epsilon": 1e-20}"#)).expect_err("stray eps");
        assert!(err.to_string().contains("reference.epsilon"), "got: {err}");
        let err = parse_run_spec(&base(r#"{"kind": "polish"}"#)).expect_err("unknown kind");
        assert!(err.to_string().contains("reference.kind"), "got: {err}");
        let ok = parse_run_spec(&base(r#"{"kind": "refine"}"#)).expect("refine defaults");
        assert_eq!(ok.reference.unwrap().epsilon, Some(1e-26));
    }
}
