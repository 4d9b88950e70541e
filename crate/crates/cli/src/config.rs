//! Scenario file schema and its translation into engine inputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use piecewise_cm::engines::{AgeEngineOptions, CmConfig, StepReading};
use piecewise_cm::evaluators::{LindbladSpec, WeightOrdering};
use piecewise_cm::renewal::HazardSpec;
use piecewise_cm::tensor::DensityMatrix;
use piecewise_cm::CMatrix;
use serde::Deserialize;

use crate::CliError;

/// A matrix given inline as rows of `[re, im]` pairs, or a path (relative to
/// the scenario file) to a JSON file holding such rows.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(CMatrix),
    File { file: PathBuf },
}

impl MatrixSource {
    pub fn load(&self, base: &Path) -> Result<CMatrix, CliError> {
        match self {
            MatrixSource::Inline(m) => Ok(m.clone()),
            MatrixSource::File { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Seed of every stochastic run; `--seed` overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
    pub system: SystemConfig,
    /// Absent means φ ≡ 0.
    #[serde(default)]
    pub hazard: Option<HazardSpec>,
    pub tau: f64,
    pub n_steps: usize,
    #[serde(default = "default_runs")]
    pub runs: Vec<RunRequest>,
    #[serde(default)]
    pub comparisons: Vec<ComparisonRequest>,
    #[serde(default)]
    pub converge: Option<ConvergeConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_runs() -> Vec<RunRequest> {
    vec![RunRequest::Age {
        id: None,
        reading: StepReading::Age,
        weight_floor: None,
    }]
}

/// Operators and states of S ⊗ M and of the two subancillas. Missing
/// ancilla states default to the first basis state, a missing `v` to the
/// identity (so that 𝒵 = id).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub h_sm: MatrixSource,
    pub rho0: MatrixSource,
    #[serde(default)]
    pub v: Option<MatrixSource>,
    #[serde(default)]
    pub eta_bar: Option<MatrixSource>,
    #[serde(default)]
    pub eta: Option<MatrixSource>,
    #[serde(default)]
    pub xi: Option<MatrixSource>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory; `--out` overrides it.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// One engine or evaluator invocation.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunRequest {
    Age {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        reading: StepReading,
        #[serde(default)]
        weight_floor: Option<f64>,
    },
    FullChain {
        #[serde(default)]
        id: Option<String>,
        ancillas: usize,
        #[serde(default)]
        reading: StepReading,
    },
    Trajectories {
        #[serde(default)]
        id: Option<String>,
        n_trajectories: usize,
        #[serde(default)]
        reading: StepReading,
    },
    Sec3 {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        insert_jump_map: bool,
    },
    Memoryless {
        #[serde(default)]
        id: Option<String>,
    },
    Volterra {
        #[serde(default)]
        id: Option<String>,
        n_grid: usize,
        #[serde(default)]
        horizon: Option<f64>,
        #[serde(default)]
        ordering: WeightOrdering,
        #[serde(default)]
        max_jumps: Option<usize>,
        #[serde(default)]
        kernel_residual: bool,
    },
    McPiecewise {
        #[serde(default)]
        id: Option<String>,
        n_grid: usize,
        #[serde(default)]
        horizon: Option<f64>,
        #[serde(default)]
        ordering: WeightOrdering,
        n_trajectories: usize,
        /// Read out every this many grid points.
        #[serde(default = "one")]
        stride: usize,
    },
    Dyson {
        #[serde(default)]
        id: Option<String>,
        lindblad: LindbladSpec,
        times: Vec<f64>,
        j_max: usize,
        n_grid: usize,
        /// Trace-distance bound against the exact exponential.
        #[serde(default = "dyson_tolerance")]
        tolerance: f64,
    },
    Witness {
        #[serde(default)]
        id: Option<String>,
        second_rho0: MatrixSource,
    },
    Verify {
        #[serde(default)]
        id: Option<String>,
        #[serde(default = "verify_draws")]
        draws: usize,
    },
}

fn one() -> usize {
    1
}

fn dyson_tolerance() -> f64 {
    1e-6
}

fn verify_draws() -> usize {
    100
}

impl RunRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            RunRequest::Age { .. } => "age",
            RunRequest::FullChain { .. } => "full_chain",
            RunRequest::Trajectories { .. } => "trajectories",
            RunRequest::Sec3 { .. } => "sec3",
            RunRequest::Memoryless { .. } => "memoryless",
            RunRequest::Volterra { .. } => "volterra",
            RunRequest::McPiecewise { .. } => "mc_piecewise",
            RunRequest::Dyson { .. } => "dyson",
            RunRequest::Witness { .. } => "witness",
            RunRequest::Verify { .. } => "verify",
        }
    }

    pub fn id(&self) -> String {
        let explicit = match self {
            RunRequest::Age { id, .. }
            | RunRequest::FullChain { id, .. }
            | RunRequest::Trajectories { id, .. }
            | RunRequest::Sec3 { id, .. }
            | RunRequest::Memoryless { id }
            | RunRequest::Volterra { id, .. }
            | RunRequest::McPiecewise { id, .. }
            | RunRequest::Dyson { id, .. }
            | RunRequest::Witness { id, .. }
            | RunRequest::Verify { id, .. } => id.clone(),
        };
        explicit.unwrap_or_else(|| self.kind().to_string())
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            RunRequest::Trajectories { .. } | RunRequest::McPiecewise { .. } | RunRequest::Verify { .. }
        )
    }
}

/// Compare the reduced S states of two runs at their common times.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRequest {
    pub first: String,
    pub second: String,
    /// Bound on the trace distance. Defaults to 1e-12 when neither side is
    /// stochastic; unbounded otherwise.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Standard-error multiple for stochastic sides.
    #[serde(default = "three")]
    pub sigmas: f64,
}

fn three() -> f64 {
    3.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default)]
    pub tau_sweep: Option<TauSweep>,
    #[serde(default)]
    pub h_sweep: Option<HSweep>,
}

/// Collision model against the continuum series for `τ = horizon / 2^e`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSweep {
    pub horizon: f64,
    /// Inclusive exponent range `[lo, hi]`.
    pub exponents: [u32; 2],
    pub reference_grid: usize,
    /// When set, the fitted order must lie within `order_tolerance` of it and
    /// the errors must decrease monotonically.
    #[serde(default)]
    pub expected_order: Option<f64>,
    #[serde(default = "order_tolerance")]
    pub order_tolerance: f64,
}

fn order_tolerance() -> f64 {
    0.2
}

/// Memory-kernel residual of the Volterra solution under grid refinement.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HSweep {
    pub horizon: f64,
    pub grids: Vec<usize>,
    #[serde(default)]
    pub ordering: WeightOrdering,
    /// When set, the fitted order must be at least this.
    #[serde(default)]
    pub min_order: Option<f64>,
}

/// A parsed scenario with its matrices loaded and checked.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub cm: CmConfig,
    pub seed: Option<u64>,
    /// Loaded second initial states of witness runs, by run id.
    pub witness_states: Vec<(String, DensityMatrix<f64>)>,
    pub sha256: String,
}

fn schema(e: impl std::fmt::Display) -> CliError {
    CliError::Schema(e.to_string())
}

impl Scenario {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: ScenarioConfig = serde_json::from_slice(&bytes).map_err(schema)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let sha256 = crate::output::sha256_hex(&bytes);
        Self::build(config, base, seed_override, sha256)
    }

    fn build(config: ScenarioConfig, base: &Path, seed_override: Option<u64>, sha256: String) -> Result<Self, CliError> {
        let sys = &config.system;
        let h_sm = sys.h_sm.load(base)?;
        let rho0_m = sys.rho0.load(base)?;
        let d_s = rho0_m.rows();
        if d_s == 0 || h_sm.rows() % d_s != 0 {
            return Err(schema(format!(
                "H_SM of size {} is not a multiple of the system dimension {d_s}",
                h_sm.rows()
            )));
        }
        let d_m = h_sm.rows() / d_s;
        let state = |src: &Option<MatrixSource>, d: usize, label: &str| -> Result<DensityMatrix<f64>, CliError> {
            match src {
                Some(s) => DensityMatrix::with_label(s.load(base)?, label).map_err(schema),
                None => DensityMatrix::basis(d, 0, label).map_err(schema),
            }
        };
        let v = match &sys.v {
            Some(s) => s.load(base)?,
            None => CMatrix::identity(d_s * d_s),
        };
        let cm = CmConfig {
            h_sm,
            v,
            rho0: DensityMatrix::with_label(rho0_m, "S").map_err(schema)?,
            eta_bar: state(&sys.eta_bar, d_m, "M")?,
            eta: state(&sys.eta, d_m, "M")?,
            xi: state(&sys.xi, d_s, "n1")?,
            hazard: config.hazard.clone().unwrap_or_else(HazardSpec::none),
            tau: config.tau,
            n_steps: config.n_steps,
        };
        cm.validate().map_err(schema)?;
        if !(cm.tau > 0.0 && cm.tau.is_finite()) {
            return Err(schema(format!("tau = {} must be positive", cm.tau)));
        }

        let mut ids = BTreeSet::new();
        let mut witness_states = Vec::new();
        for run in &config.runs {
            let id = run.id();
            if !ids.insert(id.clone()) {
                return Err(schema(format!("duplicate run id `{id}`")));
            }
            if !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(schema(format!("run id `{id}` may only use [A-Za-z0-9_-]")));
            }
            match run {
                RunRequest::Witness { second_rho0, .. } => {
                    let rho = DensityMatrix::with_label(second_rho0.load(base)?, "S").map_err(schema)?;
                    if rho.dim() != d_s {
                        return Err(schema("witness state has the wrong dimension"));
                    }
                    witness_states.push((id, rho));
                }
                RunRequest::Dyson { lindblad, times, .. } => {
                    lindblad.validate().map_err(schema)?;
                    if lindblad.dim() != d_s {
                        return Err(schema("Lindblad generator must act on S"));
                    }
                    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                        return Err(schema("Dyson readout times must be finite and nonnegative"));
                    }
                }
                RunRequest::McPiecewise { stride, n_trajectories, .. } if *stride == 0 || *n_trajectories == 0 => {
                    return Err(schema("mc_piecewise needs positive stride and trajectory count"));
                }
                RunRequest::Sec3 { .. } if cm.hazard.constant_rate().is_none() => {
                    return Err(schema("the sec3 engine needs a constant hazard"));
                }
                RunRequest::FullChain { ancillas, .. } if *ancillas == 0 => {
                    return Err(schema("full_chain needs at least one ancilla"));
                }
                RunRequest::Trajectories { n_trajectories: 0, .. } => {
                    return Err(schema("trajectories needs a positive trajectory count"));
                }
                _ => {}
            }
        }
        for c in &config.comparisons {
            for side in [&c.first, &c.second] {
                if !ids.contains(side) {
                    return Err(schema(format!("comparison refers to unknown run `{side}`")));
                }
            }
        }
        if let Some(cv) = &config.converge {
            if let Some(ts) = &cv.tau_sweep {
                if ts.exponents[0] > ts.exponents[1] || ts.exponents[1] > 20 {
                    return Err(schema("tau_sweep exponents must satisfy lo ≤ hi ≤ 20"));
                }
            }
            if let Some(hs) = &cv.h_sweep {
                if hs.grids.len() < 2 || hs.grids.iter().any(|&n| n < 2) {
                    return Err(schema("h_sweep needs at least two grids of two or more intervals"));
                }
            }
        }

        let seed = seed_override.or(config.seed);
        if seed.is_none() && config.runs.iter().any(RunRequest::is_stochastic) {
            return Err(schema("stochastic runs need an explicit seed (config `seed` or --seed)"));
        }
        Ok(Self {
            config,
            cm,
            seed,
            witness_states,
            sha256,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.cm.tau * self.cm.n_steps as f64
    }

    pub fn age_options(reading: StepReading, weight_floor: Option<f64>) -> AgeEngineOptions {
        let mut o = AgeEngineOptions {
            reading,
            ..AgeEngineOptions::default()
        };
        if let Some(w) = weight_floor {
            o.weight_floor = w;
        }
        o
    }
}
