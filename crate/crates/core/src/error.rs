use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside a box it is required to lie in.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("price problem has no feasible price at x = {x:?}")]
    InfeasiblePrice { x: String },

    #[error("evaluation produced a non-finite value: {0}")]
    Evaluation(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// The feasible set a solver searches is empty on the grid.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("player {player} has an own term that depends on rivals' actions; sum potential refused")]
    ConstructionRefused { player: usize },

    #[error("no potential: candidate violates the potential identity by {violation:e} at {witness}")]
    NoPotential { violation: f64, witness: String },

    #[error("point is not feasible: {0}")]
    NotFeasible(String),

    #[error("grid budget exceeded: {required} points required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("parse error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("invalid field `{path}`: {msg}")]
    Schema { path: String, msg: String },
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
