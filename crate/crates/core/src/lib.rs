//! Price-coupling games.
//!
//! Each player's payoff is `h(p, x) + g_i(x)` where the price `p` is set by a
//! price-determining player. The crate builds such games from expression data,
//! computes candidate equilibria by maximizing surrogate problems, certifies
//! them by exhaustive deviation scans, and ships a generation expansion
//! planning model built on top.

pub mod catalog;
pub mod config;
pub mod error;
pub mod expr;
pub mod game;
pub mod gep;
pub mod grid;
pub mod io;
pub mod potential;
pub mod scalar;
pub mod solver;
pub mod verifier;

pub use config::{SolverConfig, Tolerances};
pub use error::{Error, Result};
pub use expr::{Env, Expr, Var};
pub use game::{
    evaluate_payoff, gamma_set, member_a, member_f1, member_f2, omega_set, solve_price_problem,
    ClosedFormPrice, FeasiblePoint, Formulation, GameInstance, PlayerSpec, PriceProblem, PriceRule,
    PriceSet, Prices, SetTag, SharedTerm,
};
pub use gep::{build_gep_game, solve_gep_anticipative, solve_gep_price_taking, GepScenario};
pub use grid::ActionBox;
pub use io::{parse_input, GameFile, Input};
pub use potential::{
    construct_sum_potential, construct_tm_potential, verify_full_potential, verify_potential,
    PotentialFunction, PotentialReport, PotentialScope,
};
pub use scalar::Scalar;
pub use solver::{solve_e1, solve_e2_consistent, solve_t1_best_response, solve_tm, Method, SolveResult};
pub use verifier::{
    check, check_e1, check_e2, check_e2_consistent, check_t, check_tm, enumerate_equilibria,
    EquilibriumCertificate, EquilibriumKind, Verdict, Witness,
};

pub type Game = GameInstance<f64>;
pub type Game32 = GameInstance<f32>;
