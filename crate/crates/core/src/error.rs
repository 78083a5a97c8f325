use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate Jacobian (condition number {condition:e})")]
    DegenerateJacobian { condition: f64 },

    #[error("operator is not a complex structure (|J² + 1| = {residual:e})")]
    NotComplexStructure { residual: f64 },

    #[error("form is not of type (1,1) for the given structure (asymmetry {asymmetry:e})")]
    NotType11 { asymmetry: f64 },

    #[error("metric is not compatible with {structure} (defect {defect:e})")]
    IncompatibleMetric { structure: &'static str, defect: f64 },

    #[error("complex structures define opposite orientations")]
    OppositeOrientation,

    #[error("metric is degenerate")]
    DegenerateMetric,

    #[error("chart {chart} is not valid for this surface")]
    InvalidChart { chart: usize },

    #[error("point is not representable in chart {chart} (pivot {pivot:e})")]
    Unrepresentable { chart: usize, pivot: f64 },

    #[error("section has {got} coefficients, expected {expected}")]
    CoefficientCount { expected: usize, got: usize },

    #[error("point lies on the anticanonical curve; the gradient of f is infinite there")]
    OnAnticanonicalCurve,

    #[error("point is too close to the anticanonical curve (|sigma| = {norm:e} < {cutoff:e})")]
    TooCloseToCurve { norm: f64, cutoff: f64 },

    #[error("integration exhausted {max_steps} steps at t = {t}")]
    StepLimit { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("flow time {t} exceeds the configured bound {bound}")]
    FlowTimeTooLarge { t: f64, bound: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("Newton iteration did not converge in {iterations} iterations (|s| = {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("singular point of the curve (|ds| = {grad:e})")]
    SingularCurvePoint { grad: f64 },

    #[error("degenerate anticanonical divisor: no smooth affine curve point reachable")]
    DegenerateDivisor,

    #[error("trajectory left the curve (|s| = {residual:e})")]
    DriftedOffCurve { residual: f64 },

    #[error("quadrature did not converge: n = {n} gives {coarse}, 2n gives {fine}")]
    QuadratureNotConverged { n: usize, coarse: f64, fine: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
