use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field}: x = {x} lies outside the domain ({lo}, {hi}){}", node_suffix(*node))]
    Domain {
        field: String,
        x: f64,
        lo: f64,
        hi: f64,
        node: Option<usize>,
    },

    #[error("{field}: requested interval [{requested_lo}, {requested_hi}] exceeds the admissible interval [{admissible_lo}, {admissible_hi}]")]
    NarrowDomain {
        field: String,
        requested_lo: f64,
        requested_hi: f64,
        admissible_lo: f64,
        admissible_hi: f64,
    },

    #[error("derivative order {0} is not supported")]
    UnsupportedOrder(usize),

    #[error("generator vanishes at x = {x}; the G recursion divides by g")]
    DivisionByGenerator { x: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("nonpositive mass {mass} at x = {x}")]
    MassSign { x: f64, mass: f64 },

    #[error("ordering exponents sum to {sum}, expected -1")]
    OrderingConstraint { sum: f64 },

    #[error("Cayley step {step} is singular")]
    StepSingular { step: usize },

    #[error("probe {probe} touches the grid boundary ({what})")]
    ProbeEscape { probe: usize, what: &'static str },

    #[error("flow from x0 = {x0} escaped at s = {time} (x = {x})")]
    FlowEscape { x0: f64, time: f64, x: f64 },

    #[error("inverse iteration stalled for level {level}")]
    IterationStall { level: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("gamma undefined: log argument {arg} is not positive")]
    GammaUndefined { arg: f64 },

    #[error("found {found} bound states below the threshold, {requested} requested")]
    InsufficientBoundStates { found: usize, requested: usize },

    #[error("sign/convention resolution is ambiguous: {0}")]
    AmbiguousResolution(String),
}

fn node_suffix(node: Option<usize>) -> String {
    match node {
        Some(i) => format!(" (grid node {i})"),
        None => String::new(),
    }
}
