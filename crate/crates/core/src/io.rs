//! JSON input files: game instances and GEP scenarios.
//!
//! A document with a top-level `horizon` key is a GEP scenario; one with a
//! `players` key is a game. Game files look like
//!
//! ```json
//! {
//!   "formulation": "e2",
//!   "players": [
//!     {"lower": [0], "upper": [5], "grid_points": [21], "own_term": "-x1^2"},
//!     {"lower": [0], "upper": [5], "grid_points": [21], "own_term": "-x2^2"}
//!   ],
//!   "shared_term": "p * xi",
//!   "price": {
//!     "feasible": {"box": {"lower": ["-10"], "upper": ["10"]}},
//!     "lattice": {"lower": [-10], "upper": [10], "grid_points": [3]},
//!     "closed_form": ["10 - x1 - x2"]
//!   }
//! }
//! ```
//!
//! `price.objective` defaults to `0`. `price.feasible` is either a box whose
//! bounds are expressions of `x`, or `{"finite": [[...], ...]}`. Optional keys:
//! `name`, `potential` (a players-only potential used when the sum of own terms
//! is not one) and `candidate` (`{"x": [[...]], "p": [...]}`, the point checked in
//! verify mode).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::game::{Formulation, GameInstance, PlayerSpec, PriceProblem, PriceRule, PriceSet, SharedTerm};
use crate::gep::GepScenario;
use crate::grid::ActionBox;
use crate::scalar::Scalar;

fn zero() -> Expr {
    Expr::zero()
}

fn is_zero(e: &Expr) -> bool {
    *e == Expr::zero()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub grid_points: Vec<usize>,
    pub own_term: Expr,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub grid_points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FeasibleFile {
    Box { lower: Vec<Expr>, upper: Vec<Expr> },
    Finite(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceFile {
    #[serde(default = "zero", skip_serializing_if = "is_zero")]
    pub objective: Expr,
    pub feasible: FeasibleFile,
    pub lattice: LatticeFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateFile {
    pub x: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulation: Option<String>,
    pub players: Vec<PlayerFile>,
    pub shared_term: Expr,
    pub price: PriceFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandidateFile>,
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::lit(a)).collect()
}

fn with_prefix(e: Error, prefix: &str) -> Error {
    match e {
        Error::Schema { path, msg } => Error::Schema {
            path: format!("{prefix}{path}"),
            msg,
        },
        other => other,
    }
}

impl GameFile {
    pub fn from_json(src: &str) -> Result<Self> {
        let value = parse_value(src)?;
        from_value(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game file serializes")
    }

    /// The file's formulation, unless `over` replaces it.
    pub fn formulation(&self, over: Option<Formulation>) -> Result<Formulation> {
        if let Some(f) = over {
            return Ok(f);
        }
        match &self.formulation {
            Some(s) => s
                .parse()
                .map_err(|_| Error::schema("formulation", format!("unknown formulation `{s}`"))),
            None => Err(Error::schema(
                "formulation",
                "missing; give it in the file or on the command line",
            )),
        }
    }

    pub fn build<T: Scalar>(&self, over: Option<Formulation>) -> Result<GameInstance<T>> {
        let formulation = self.formulation(over)?;
        let players = self
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let b = ActionBox::new(cast(&p.lower), cast(&p.upper), p.grid_points.clone())
                    .map_err(|e| with_prefix(e, &format!("players[{i}].")))?;
                PlayerSpec::new(i, b, p.own_term.clone(), p.constraints.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let pf = &self.price;
        let lattice = ActionBox::new(
            cast(&pf.lattice.lower),
            cast(&pf.lattice.upper),
            pf.lattice.grid_points.clone(),
        )
        .map_err(|e| with_prefix(e, "price.lattice."))?;
        let feasible = match &pf.feasible {
            FeasibleFile::Box { lower, upper } => PriceSet::Box {
                lower: lower.clone(),
                upper: upper.clone(),
            },
            FeasibleFile::Finite(set) => PriceSet::Finite(set.iter().map(|p| cast(p)).collect()),
        };
        let closed = pf.closed_form.clone().map(PriceRule::Exprs);
        let price = PriceProblem::new(pf.objective.clone(), feasible, lattice, closed)?;
        GameInstance::new(players, SharedTerm::new(self.shared_term.clone()), price, formulation)
    }

    /// The candidate point as `(x, p)` in the game's scalar type.
    pub fn candidate<T: Scalar>(&self) -> Option<(Vec<Vec<T>>, Vec<T>)> {
        self.candidate
            .as_ref()
            .map(|c| (c.x.iter().map(|xi| cast(xi)).collect(), cast(&c.p)))
    }
}

/// A parsed input document.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Game(GameFile),
    Gep(GepScenario),
}

fn parse_value(src: &str) -> Result<Value> {
    serde_json::from_str(src).map_err(|e| {
        let offset = src
            .lines()
            .take(e.line().saturating_sub(1))
            .map(|l| l.len() + 1)
            .sum::<usize>()
            + e.column().saturating_sub(1);
        Error::Parse {
            offset,
            msg: e.to_string(),
        }
    })
}

fn from_value<D: serde::de::DeserializeOwned>(value: Value) -> Result<D> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })
}

/// Parses a game file or GEP scenario, telling them apart by their top-level keys.
pub fn parse_input(src: &str) -> Result<Input> {
    let value = parse_value(src)?;
    let Value::Object(map) = &value else {
        return Err(Error::schema(".", "expected a JSON object"));
    };
    if map.contains_key("horizon") {
        let s: GepScenario = from_value(value)?;
        s.validate()?;
        Ok(Input::Gep(s))
    } else if map.contains_key("players") {
        Ok(Input::Game(from_value(value)?))
    } else {
        Err(Error::schema(
            ".",
            "expected a game (`players`) or a GEP scenario (`horizon`)",
        ))
    }
}
