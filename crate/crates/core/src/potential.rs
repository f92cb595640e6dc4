//! Potential functions for the own terms `g_i` and for the full price-taking game.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::game::{Formulation, GameInstance};
use crate::scalar::{cmp_scalar, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PotentialKind {
    SumOfOwnTerms,
    UserSupplied,
    /// Built from the shared term, the price objective and a player potential.
    FullGameCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PotentialScope {
    /// `π(x)` for the own terms.
    PlayersOnly,
    /// `Π(x, p)` for the players plus the price player.
    FullGame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFunction {
    pub pi: Expr,
    pub kind: PotentialKind,
    pub scope: PotentialScope,
    verified: bool,
}

impl PotentialFunction {
    /// An unverified candidate; see [`PotentialFunction::verify`].
    pub fn user(pi: Expr, scope: PotentialScope) -> Self {
        PotentialFunction {
            pi,
            kind: PotentialKind::UserSupplied,
            scope,
            verified: false,
        }
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn eval<T: Scalar>(&self, x: &[Vec<T>], p: &[T]) -> T {
        self.pi.eval(&Env::new(x, p))
    }

    /// Runs the sampling check matching the scope and marks the candidate verified.
    pub fn verify<T: Scalar>(
        mut self,
        game: &GameInstance<T>,
        samples: usize,
        seed: u64,
        tol: &Tolerances,
    ) -> Result<Self> {
        let report = match self.scope {
            PotentialScope::PlayersOnly => verify_potential(&self, game, samples, seed, tol),
            PotentialScope::FullGame => verify_full_potential(&self, game, samples, seed, tol),
        };
        if !report.holds {
            return Err(report.into_error());
        }
        self.verified = true;
        Ok(self)
    }
}

/// One sampled unilateral change and how badly the identity failed on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialWitness<T> {
    /// Deviating player, or `None` for the price player.
    pub player: Option<usize>,
    pub x: Vec<Vec<T>>,
    pub p: Vec<T>,
    /// The deviating coordinates before and after.
    pub from: Vec<T>,
    pub to: Vec<T>,
    pub violation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport<T> {
    pub holds: bool,
    pub max_violation: T,
    pub witness: Option<PotentialWitness<T>>,
    pub samples: usize,
}

impl<T: Scalar> PotentialReport<T> {
    fn into_error(self) -> Error {
        let witness = match &self.witness {
            Some(w) => format!(
                "{} moving {:?} -> {:?} at x = {:?}, p = {:?}",
                w.player
                    .map(|i| format!("player {}", i + 1))
                    .unwrap_or_else(|| "price player".into()),
                w.from,
                w.to,
                w.x,
                w.p
            ),
            None => "no sample".into(),
        };
        Error::NoPotential {
            violation: self.max_violation.to_f64_lossy(),
            witness,
        }
    }
}

/// `π(x) = Σ_i g_i(x_i)`.
pub fn construct_sum_potential<T: Scalar>(game: &GameInstance<T>) -> Result<PotentialFunction> {
    if let Some(pl) = game
        .players()
        .iter()
        .find(|pl| !pl.own_term_depends_only_on_self())
    {
        return Err(Error::ConstructionRefused { player: pl.id + 1 });
    }
    let pi = game
        .players()
        .iter()
        .map(|pl| pl.own_term.clone())
        .reduce(|a, b| a + b)
        .unwrap_or_else(Expr::zero);
    Ok(PotentialFunction {
        pi,
        kind: PotentialKind::SumOfOwnTerms,
        scope: PotentialScope::PlayersOnly,
        verified: true,
    })
}

struct Sample<T> {
    player: Option<usize>,
    x: Vec<Vec<T>>,
    p: Vec<T>,
    from: Vec<T>,
    to: Vec<T>,
}

fn random_profile<T: Scalar>(game: &GameInstance<T>, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    (0..game.n_players())
        .map(|i| {
            let g = game.player_grid(i);
            g[rng.gen_range(0..g.len())].clone()
        })
        .collect()
}

fn random_price<T: Scalar>(game: &GameInstance<T>, rng: &mut ChaCha8Rng) -> Vec<T> {
    let lat = &game.price_problem().lattice;
    (0..lat.dim())
        .map(|k| {
            let axis = lat.axis(k);
            axis[rng.gen_range(0..axis.len())]
        })
        .collect()
}

fn player_sample<T: Scalar>(game: &GameInstance<T>, rng: &mut ChaCha8Rng, with_price: bool) -> Sample<T> {
    let i = rng.gen_range(0..game.n_players());
    let x = random_profile(game, rng);
    let g = game.player_grid(i);
    let from = g[rng.gen_range(0..g.len())].clone();
    let to = g[rng.gen_range(0..g.len())].clone();
    let p = if with_price { random_price(game, rng) } else { Vec::new() };
    Sample {
        player: Some(i),
        x,
        p,
        from,
        to,
    }
}

fn summarize<T: Scalar>(
    samples: Vec<Sample<T>>,
    violation: impl Fn(&Sample<T>) -> T + Sync,
    tol: &Tolerances,
) -> PotentialReport<T>
where
    Sample<T>: Send + Sync,
{
    let n = samples.len();
    let violations: Vec<T> = samples.par_iter().map(&violation).collect();
    let worst = violations
        .iter()
        .enumerate()
        .fold(None::<(usize, T)>, |best, (k, &v)| match best {
            Some((_, b)) if cmp_scalar(v, b) != std::cmp::Ordering::Greater => best,
            _ => Some((k, v)),
        });
    let (max_violation, witness) = match worst {
        Some((k, v)) => {
            let s = &samples[k];
            (
                v,
                Some(PotentialWitness {
                    player: s.player,
                    x: s.x.clone(),
                    p: s.p.clone(),
                    from: s.from.clone(),
                    to: s.to.clone(),
                    violation: v,
                }),
            )
        }
        None => (T::zero(), None),
    };
    PotentialReport {
        holds: !max_violation.is_nan() && max_violation <= T::lit(tol.pot),
        max_violation,
        witness,
        samples: n,
    }
}

/// Samples unilateral changes `x̂_i -> x̃_i` and compares the change in `g_i` with the change in `π`.
pub fn verify_potential<T: Scalar>(
    candidate: &PotentialFunction,
    game: &GameInstance<T>,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> PotentialReport<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Sample<T>> = if game.n_players() == 0 {
        Vec::new()
    } else {
        (0..samples.max(1))
            .map(|_| player_sample(game, &mut rng, false))
            .collect()
    };
    summarize(
        draws,
        |s| {
            let i = s.player.unwrap();
            let a = GameInstance::with_action(&s.x, i, &s.to);
            let b = GameInstance::with_action(&s.x, i, &s.from);
            let dg = game.g(i, &a) - game.g(i, &b);
            let dpi = candidate.eval(&a, &[]) - candidate.eval(&b, &[]);
            (dg - dpi).abs()
        },
        tol,
    )
}

/// Checks `Π` for the full game: player moves change `Π` like `h + g_i`, price moves like `-f`.
pub fn verify_full_potential<T: Scalar>(
    candidate: &PotentialFunction,
    game: &GameInstance<T>,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> PotentialReport<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Sample<T>> = (0..samples.max(1))
        .map(|k| {
            if game.n_players() > 0 && k % 2 == 0 {
                player_sample(game, &mut rng, true)
            } else {
                let x = random_profile(game, &mut rng);
                let p = random_price(game, &mut rng);
                let from = random_price(game, &mut rng);
                let to = random_price(game, &mut rng);
                Sample {
                    player: None,
                    x,
                    p,
                    from,
                    to,
                }
            }
        })
        .collect();
    summarize(
        draws,
        |s| match s.player {
            Some(i) => {
                let a = GameInstance::with_action(&s.x, i, &s.to);
                let b = GameInstance::with_action(&s.x, i, &s.from);
                let du = game.payoff(i, &a, &s.p) - game.payoff(i, &b, &s.p);
                let dpi = candidate.eval(&a, &s.p) - candidate.eval(&b, &s.p);
                (du - dpi).abs()
            }
            None => {
                let pp = game.price_problem();
                let df = pp.f(&s.x, &s.to) - pp.f(&s.x, &s.from);
                let dpi = candidate.eval(&s.x, &s.to) - candidate.eval(&s.x, &s.from);
                (df + dpi).abs()
            }
        },
        tol,
    )
}

/// Candidate `Π(x, p) = π(x) + H(p, x) - H(p, x0) - f(x0, p)` with `x0` the lower corner
/// of the joint box and `H` the shared term summed over the players it is evaluated for.
/// Returned only when sampling confirms it.
pub fn construct_tm_potential<T: Scalar>(
    game: &GameInstance<T>,
    pi_players: &PotentialFunction,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<PotentialFunction> {
    if game.formulation() != Formulation::TakingTm {
        return Err(Error::Usage(format!(
            "the full-game potential needs the taking-tm formulation, game is {}",
            game.formulation()
        )));
    }
    if pi_players.scope != PotentialScope::PlayersOnly {
        return Err(Error::Usage("expected a players-only potential".into()));
    }
    let h = &game.shared_term().h;
    let big_h = if h.uses_own() {
        (0..game.n_players())
            .map(|j| h.bind_own(j))
            .reduce(|a, b| a + b)
            .unwrap_or_else(Expr::zero)
    } else {
        h.clone()
    };
    let corner = |e: &Expr| {
        e.map_vars(&|v| match *v {
            Var::Player { player, coord } => {
                Expr::c(game.players()[player].action_box.lower[coord].to_f64_lossy())
            }
            other => Expr::Var(other),
        })
    };
    let pi = pi_players.pi.clone() + big_h.clone()
        - corner(&big_h)
        - corner(&game.price_problem().objective);
    let candidate = PotentialFunction {
        pi,
        kind: PotentialKind::FullGameCandidate,
        scope: PotentialScope::FullGame,
        verified: false,
    };
    candidate.verify(game, samples, seed, tol)
}
