use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid group specification: {0}")]
    GroupSpec(String),

    #[error("invalid circle map: {0}")]
    CircleMap(String),

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("solver did not converge after {sweeps} sweeps (last residual {last_residual:.3e})")]
    NonConvergence { sweeps: usize, last_residual: f64, history: Vec<f64> },

    #[error("translation number iteration exhausted (bracket [{lo}, {hi}])")]
    TranslationBracket { lo: f64, hi: f64 },

    #[error("fiber measure is atomic at the grid scale (bin {bin} carries {fraction:.3} of the mass)")]
    AtomicMeasure { bin: usize, fraction: f64 },

    #[error("stage {stage} failed: {source}")]
    Stage { stage: &'static str, #[source] source: Box<LabError> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl LabError {
    pub fn in_stage(self, stage: &'static str) -> LabError {
        LabError::Stage { stage, source: Box::new(self) }
    }

    /// Process exit code per the CLI contract: 2 validation, 3 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) | LabError::GroupSpec(_) => 2,
            _ => 3,
        }
    }
}
