use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty product: at least one space is required")]
    EmptyProduct,

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid mechanism for team {team}: {reason}")]
    InvalidMechanism { team: usize, reason: String },

    #[error("profile has {got} mechanisms but the game has {expected} teams")]
    ProfileMismatch { expected: usize, got: usize },

    #[error("reward support violation at {location}: reward profile {reward} is not feasible")]
    SupportViolation { location: String, reward: usize },

    #[error("action deviation supplied while obedience is enforced")]
    ModeMismatch,

    #[error("agent {agent} out of range ({agents} agents)")]
    AgentOutOfRange { agent: usize, agents: usize },

    #[error("{count} deviation generators exceed the cap of {cap}")]
    GeneratorCap { count: u128, cap: u128 },

    #[error("outcome space has {cells} cells, above the cap of {cap}")]
    CellCap { cells: u128, cap: u128 },

    #[error("empty set of laws")]
    EmptySet,

    #[error("incentive-compatible set for team {team} is empty; no selection exists for this opponent profile")]
    InfeasibleIc { team: usize },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex did not terminate within {iterations} pivots")]
    SolverStalled { iterations: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
