//! The price-coupling game model.
//!
//! Every player `i` maximizes `h(p, x) + g_i(x)` over its action set `X_i`; the
//! shared term `h` is identical across players and the price `p` is chosen by an
//! extra price-determining player who minimizes `f(x, p)` over `M(x)` (or applies
//! a closed-form price rule). This module holds the instance types and the
//! membership tests for the feasibility sets `F1`, `F2` and `A`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::grid::{unrank, ActionBox};
use crate::scalar::{cmp_scalar, Scalar};

/// Profiles checked at construction for a nonempty price set.
const VALIDATION_SAMPLES: usize = 4096;

/// Slack for box and constraint membership, relative to the magnitude compared.
pub(crate) fn feas_slack<T: Scalar>(scale: T) -> T {
    let base = T::lit(1e-9) + T::epsilon() * T::lit(8.0);
    base * scale.abs().max(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Formulation {
    AnticipativeE1,
    AnticipativeE2Consistent,
    TakingT1,
    TakingTm,
}

impl Formulation {
    pub fn is_taking(self) -> bool {
        matches!(self, Formulation::TakingT1 | Formulation::TakingTm)
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Formulation::AnticipativeE1 => "anticipative-e1",
            Formulation::AnticipativeE2Consistent => "anticipative-e2",
            Formulation::TakingT1 => "taking-t1",
            Formulation::TakingTm => "taking-tm",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anticipative-e1" | "e1" => Ok(Formulation::AnticipativeE1),
            "anticipative-e2" | "e2" => Ok(Formulation::AnticipativeE2Consistent),
            "taking-t1" | "t1" => Ok(Formulation::TakingT1),
            "taking-tm" | "tm" => Ok(Formulation::TakingTm),
            other => Err(Error::Usage(format!("unknown formulation `{other}`"))),
        }
    }
}

/// One player: action box, coupling-free own constraints and own payoff term `g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSpec<T> {
    pub id: usize,
    pub action_box: ActionBox<T>,
    /// `g_i`, with `xi` references already bound to this player.
    pub own_term: Expr,
    /// Each expression must be `<= 0` for the action to be feasible.
    pub constraints: Vec<Expr>,
    own_term_depends_only_on_self: bool,
}

impl<T: Scalar> PlayerSpec<T> {
    pub fn new(
        id: usize,
        action_box: ActionBox<T>,
        own_term: Expr,
        constraints: Vec<Expr>,
    ) -> Result<Self> {
        let own_term = own_term.bind_own(id);
        let constraints: Vec<Expr> = constraints.iter().map(|c| c.bind_own(id)).collect();
        if let Some(k) = constraints.iter().position(|c| c.uses_rival_of(id) || c.uses_price()) {
            return Err(Error::schema(
                format!("players[{id}].constraints[{k}]"),
                "constraints may only reference the player's own decision",
            ));
        }
        Ok(PlayerSpec {
            id,
            own_term_depends_only_on_self: !own_term.uses_rival_of(id),
            action_box,
            own_term,
            constraints,
        })
    }

    pub fn own_term_depends_only_on_self(&self) -> bool {
        self.own_term_depends_only_on_self
    }

    pub fn dim(&self) -> usize {
        self.action_box.dim()
    }

    fn satisfies_constraints(&self, x: &[Vec<T>]) -> bool {
        let env = Env::new(x, &[]);
        self.constraints
            .iter()
            .all(|c| c.eval(&env) <= feas_slack(T::one()))
    }
}

/// The term `h` shared by all players.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedTerm {
    pub h: Expr,
    depends_only_on_own_action: bool,
}

impl SharedTerm {
    pub fn new(h: Expr) -> Self {
        SharedTerm {
            depends_only_on_own_action: !h.uses_any_player(),
            h,
        }
    }

    /// True when `h` reads the evaluating player's action only (class E2).
    pub fn depends_only_on_own_action(&self) -> bool {
        self.depends_only_on_own_action
    }

    pub fn eval<T: Scalar>(&self, player: usize, x: &[Vec<T>], p: &[T]) -> T {
        self.h.eval(&Env::new(x, p).with_own(player))
    }
}

/// A closed-form price rule implemented in code rather than as expressions.
pub trait ClosedFormPrice<T>: Send + Sync {
    fn price(&self, x: &[Vec<T>]) -> Vec<T>;
    fn describe(&self) -> String;
}

#[derive(Clone)]
pub enum PriceRule<T> {
    /// One expression of `x` per price coordinate.
    Exprs(Vec<Expr>),
    Custom(Arc<dyn ClosedFormPrice<T>>),
}

impl<T: Scalar> PriceRule<T> {
    pub fn eval(&self, x: &[Vec<T>]) -> Vec<T> {
        match self {
            PriceRule::Exprs(es) => {
                let env = Env::new(x, &[]);
                es.iter().map(|e| e.eval(&env)).collect()
            }
            PriceRule::Custom(r) => r.price(x),
        }
    }
}

impl<T> fmt::Debug for PriceRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceRule::Exprs(es) => f.debug_tuple("Exprs").field(es).finish(),
            PriceRule::Custom(r) => write!(f, "Custom({})", r.describe()),
        }
    }
}

/// The feasibility map `M(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceSet<T> {
    /// Coordinatewise bounds, each an expression of `x`.
    Box { lower: Vec<Expr>, upper: Vec<Expr> },
    /// A fixed finite set of price vectors.
    Finite(Vec<Vec<T>>),
}

/// The price-determining player's problem `S(x)`: minimize `f(x, p)` over `M(x)`.
#[derive(Debug, Clone)]
pub struct PriceProblem<T> {
    pub objective: Expr,
    pub feasible: PriceSet<T>,
    /// Bounding box of every `M(x)` and the price discretization used by searches.
    pub lattice: ActionBox<T>,
    pub closed_form: Option<PriceRule<T>>,
    depends_on_x: bool,
}

impl<T: Scalar> PriceProblem<T> {
    pub fn new(
        objective: Expr,
        feasible: PriceSet<T>,
        lattice: ActionBox<T>,
        closed_form: Option<PriceRule<T>>,
    ) -> Result<Self> {
        let dim = lattice.dim();
        let depends_on_x = match &feasible {
            PriceSet::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::schema(
                        "price.feasible",
                        format!("bounds must have {dim} entries"),
                    ));
                }
                if lower.iter().chain(upper).any(Expr::uses_price) {
                    return Err(Error::schema("price.feasible", "bounds may not reference p"));
                }
                lower.iter().chain(upper).any(Expr::uses_any_player)
            }
            PriceSet::Finite(set) => {
                if set.is_empty() {
                    return Err(Error::schema("price.feasible", "finite price set is empty"));
                }
                if let Some(k) = set.iter().position(|p| p.len() != dim) {
                    return Err(Error::schema(
                        format!("price.feasible[{k}]"),
                        format!("price vector must have {dim} entries"),
                    ));
                }
                false
            }
        };
        if let Some(PriceRule::Exprs(es)) = &closed_form {
            if es.len() != dim {
                return Err(Error::schema(
                    "price.closed_form",
                    format!("expected {dim} expressions"),
                ));
            }
            if es.iter().any(Expr::uses_price) {
                return Err(Error::schema("price.closed_form", "rule may not reference p"));
            }
        }
        Ok(PriceProblem {
            objective,
            feasible,
            lattice,
            closed_form,
            depends_on_x,
        })
    }

    /// A fixed box with no optimization: `M = lattice box`, `f == 0`, price `r(x)`.
    pub fn closed_form_only(lattice: ActionBox<T>, rule: PriceRule<T>) -> Result<Self> {
        let lower = lattice.lower.iter().map(|v| Expr::c(v.to_f64_lossy())).collect();
        let upper = lattice.upper.iter().map(|v| Expr::c(v.to_f64_lossy())).collect();
        Self::new(Expr::zero(), PriceSet::Box { lower, upper }, lattice, Some(rule))
    }

    pub fn depends_on_x(&self) -> bool {
        self.depends_on_x
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn f(&self, x: &[Vec<T>], p: &[T]) -> T {
        self.objective.eval(&Env::new(x, p))
    }

    /// Bounds of `M(x)` for the box form.
    fn bounds(&self, x: &[Vec<T>]) -> Option<(Vec<T>, Vec<T>)> {
        match &self.feasible {
            PriceSet::Box { lower, upper } => {
                let env = Env::new(x, &[]);
                Some((
                    lower.iter().map(|e| e.eval(&env)).collect(),
                    upper.iter().map(|e| e.eval(&env)).collect(),
                ))
            }
            PriceSet::Finite(_) => None,
        }
    }

    /// `p ∈ M(x)`.
    pub fn admits(&self, x: &[Vec<T>], p: &[T]) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        match &self.feasible {
            PriceSet::Box { .. } => {
                let (lo, hi) = self.bounds(x).unwrap();
                p.iter().enumerate().all(|(k, &v)| {
                    v >= lo[k] - feas_slack(lo[k]) && v <= hi[k] + feas_slack(hi[k])
                })
            }
            PriceSet::Finite(set) => set.iter().any(|s| {
                s.iter()
                    .zip(p)
                    .all(|(&a, &b)| (a - b).abs() <= feas_slack(a))
            }),
        }
    }

    /// The grid of `M(x)`: lattice points inside the bounds, or the finite set.
    pub fn candidates(&self, x: &[Vec<T>]) -> Vec<Vec<T>> {
        match &self.feasible {
            PriceSet::Finite(set) => set.clone(),
            PriceSet::Box { .. } => {
                let (lo, hi) = self.bounds(x).unwrap();
                let axes: Vec<Vec<T>> = (0..self.dim())
                    .map(|k| {
                        self.lattice
                            .axis(k)
                            .into_iter()
                            .filter(|&v| {
                                v >= lo[k] - feas_slack(lo[k]) && v <= hi[k] + feas_slack(hi[k])
                            })
                            .collect()
                    })
                    .collect();
                cartesian(&axes)
            }
        }
    }
}

pub(crate) fn cartesian<T: Copy>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let radices: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = radices.iter().product();
    (0..total)
        .map(|idx| {
            unrank(idx, &radices)
                .iter()
                .enumerate()
                .map(|(k, &j)| axes[k][j])
                .collect()
        })
        .collect()
}

/// A complete price-coupling game.
#[derive(Debug, Clone)]
pub struct GameInstance<T> {
    players: Vec<PlayerSpec<T>>,
    shared_term: SharedTerm,
    price_problem: PriceProblem<T>,
    formulation: Formulation,
    grids: Vec<Vec<Vec<T>>>,
    /// Box rank of every grid point in `grids`, ascending.
    ranks: Vec<Vec<usize>>,
}

impl<T: Scalar> GameInstance<T> {
    pub fn new(
        players: Vec<PlayerSpec<T>>,
        shared_term: SharedTerm,
        price_problem: PriceProblem<T>,
        formulation: Formulation,
    ) -> Result<Self> {
        for (i, pl) in players.iter().enumerate() {
            if pl.id != i {
                return Err(Error::schema(format!("players[{i}].id"), "ids must be 0..N in order"));
            }
        }
        if players.is_empty() && !formulation.is_taking() {
            return Err(Error::schema("players", "anticipative games need at least one player"));
        }
        let dims: Vec<usize> = players.iter().map(PlayerSpec::dim).collect();
        let pdim = price_problem.dim();
        let check = |path: String, e: &Expr, own_ok: bool, price_ok: bool| -> Result<()> {
            let mut bad = None;
            e.visit_vars(&mut |v| {
                let ok = match *v {
                    Var::Player { player, coord } => player < dims.len() && coord < dims[player],
                    Var::Own { coord } => own_ok && dims.iter().all(|&d| coord < d),
                    Var::Price { coord } => price_ok && coord < pdim,
                    Var::Arg => false,
                };
                if !ok && bad.is_none() {
                    bad = Some(*v);
                }
            });
            match bad {
                Some(v) => Err(Error::schema(path, format!("variable `{v}` is not available here"))),
                None => Ok(()),
            }
        };
        for (i, pl) in players.iter().enumerate() {
            check(format!("players[{i}].own_term"), &pl.own_term, false, false)?;
            for (k, c) in pl.constraints.iter().enumerate() {
                check(format!("players[{i}].constraints[{k}]"), c, false, false)?;
            }
        }
        let own_ok = formulation != Formulation::AnticipativeE1;
        check("shared_term".into(), &shared_term.h, own_ok, true)?;
        check("price.objective".into(), &price_problem.objective, false, true)?;
        if let PriceSet::Box { lower, upper } = &price_problem.feasible {
            for (k, e) in lower.iter().chain(upper).enumerate() {
                check(format!("price.feasible[{k}]"), e, false, false)?;
            }
        }
        if let Some(PriceRule::Exprs(es)) = &price_problem.closed_form {
            for (k, e) in es.iter().enumerate() {
                check(format!("price.closed_form[{k}]"), e, false, false)?;
            }
        }
        if formulation == Formulation::AnticipativeE2Consistent
            && !shared_term.depends_only_on_own_action()
        {
            return Err(Error::schema(
                "shared_term",
                "the consistent-conjecture formulation needs h to depend on p and the own action only",
            ));
        }
        if formulation == Formulation::TakingT1 && price_problem.depends_on_x() {
            return Err(Error::schema(
                "price.feasible",
                "the T1 formulation needs a price set independent of x",
            ));
        }

        let mut grids = Vec::with_capacity(players.len());
        let mut ranks = Vec::with_capacity(players.len());
        for (i, pl) in players.iter().enumerate() {
            let mut scratch: Vec<Vec<T>> = dims.iter().map(|&d| vec![T::zero(); d]).collect();
            let (rank, grid): (Vec<usize>, Vec<Vec<T>>) = pl
                .action_box
                .points()
                .into_iter()
                .enumerate()
                .filter(|(_, xi)| {
                    scratch[i].clone_from(xi);
                    pl.satisfies_constraints(&scratch)
                })
                .unzip();
            if grid.is_empty() {
                return Err(Error::schema(
                    format!("players[{i}].constraints"),
                    "no grid point of the action box satisfies the constraints",
                ));
            }
            grids.push(grid);
            ranks.push(rank);
        }

        let game = GameInstance {
            players,
            shared_term,
            price_problem,
            formulation,
            grids,
            ranks,
        };
        game.validate_price_sets()?;
        Ok(game)
    }

    fn validate_price_sets(&self) -> Result<()> {
        let pp = &self.price_problem;
        for x in self.sample_profiles(VALIDATION_SAMPLES, 0) {
            if let Some(rule) = &pp.closed_form {
                let r = rule.eval(&x);
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Evaluation(format!("closed-form price at x = {x:?}")));
                }
                if !pp.admits(&x, &r) {
                    return Err(Error::schema(
                        "price.closed_form",
                        format!("rule gives {r:?} outside M(x) at x = {x:?}"),
                    ));
                }
            } else if pp.candidates(&x).is_empty() {
                return Err(Error::schema(
                    "price.feasible",
                    format!("M(x) has no grid point at x = {x:?}"),
                ));
            }
        }
        Ok(())
    }

    pub fn players(&self) -> &[PlayerSpec<T>] {
        &self.players
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn shared_term(&self) -> &SharedTerm {
        &self.shared_term
    }

    pub fn price_problem(&self) -> &PriceProblem<T> {
        &self.price_problem
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn price_dimension(&self) -> usize {
        self.price_problem.dim()
    }

    /// Same game under another formulation tag, revalidated.
    pub fn with_formulation(&self, formulation: Formulation) -> Result<Self> {
        GameInstance::new(
            self.players.clone(),
            self.shared_term.clone(),
            self.price_problem.clone(),
            formulation,
        )
    }

    /// Grid of `X_i`: box grid points satisfying the player's constraints.
    pub fn player_grid(&self, i: usize) -> &[Vec<T>] {
        &self.grids[i]
    }

    /// Box rank of each point of [`GameInstance::player_grid`].
    pub fn player_grid_ranks(&self, i: usize) -> &[usize] {
        &self.ranks[i]
    }

    pub fn joint_radices(&self) -> Vec<usize> {
        self.grids.iter().map(Vec::len).collect()
    }

    pub fn joint_size(&self) -> u128 {
        self.grids.iter().map(|g| g.len() as u128).product()
    }

    /// Joint profile at a mixed-radix index; player 1 is most significant.
    pub fn profile_at(&self, idx: usize) -> Vec<Vec<T>> {
        let digits = unrank(idx, &self.joint_radices());
        digits
            .iter()
            .enumerate()
            .map(|(i, &d)| self.grids[i][d].clone())
            .collect()
    }

    /// Every joint grid profile when there are at most `max`, else a seeded sample.
    pub fn sample_profiles(&self, max: usize, seed: u64) -> Vec<Vec<Vec<T>>> {
        let total = self.joint_size();
        if total <= max as u128 {
            return (0..total as usize).map(|k| self.profile_at(k)).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..max)
            .map(|_| {
                self.grids
                    .iter()
                    .map(|g| g[rng.gen_range(0..g.len())].clone())
                    .collect()
            })
            .collect()
    }

    /// `x_i ∈ X_i`: inside the box (with slack) and satisfying the constraints.
    pub fn in_action_set(&self, i: usize, x: &[Vec<T>]) -> bool {
        let pl = &self.players[i];
        let slack = feas_slack(pl.action_box.max_step().max(T::one()));
        pl.action_box.contains(&x[i], slack) && pl.satisfies_constraints(x)
    }

    /// `x ∈ X`.
    pub fn in_joint_set(&self, x: &[Vec<T>]) -> bool {
        x.len() == self.n_players() && (0..self.n_players()).all(|i| self.in_action_set(i, x))
    }

    pub fn g(&self, i: usize, x: &[Vec<T>]) -> T {
        self.players[i].own_term.eval(&Env::new(x, &[]))
    }

    pub fn h(&self, i: usize, x: &[Vec<T>], p: &[T]) -> T {
        self.shared_term.eval(i, x, p)
    }

    /// `h(p, x) + g_i(x)` without domain checks.
    pub fn payoff(&self, i: usize, x: &[Vec<T>], p: &[T]) -> T {
        self.h(i, x, p) + self.g(i, x)
    }

    /// `x` with player `i`'s action replaced.
    pub fn with_action(x: &[Vec<T>], i: usize, xi: &[T]) -> Vec<Vec<T>> {
        let mut y = x.to_vec();
        y[i] = xi.to_vec();
        y
    }
}

fn domain_check<T: Scalar>(game: &GameInstance<T>, x: &[Vec<T>]) -> Result<()> {
    if x.len() != game.n_players() {
        return Err(Error::Domain(format!(
            "expected {} player actions, got {}",
            game.n_players(),
            x.len()
        )));
    }
    for (i, pl) in game.players().iter().enumerate() {
        let slack = feas_slack(pl.action_box.max_step().max(T::one()));
        if let Err(k) = pl.action_box.check(&x[i], slack) {
            return Err(Error::Domain(format!(
                "player {} coordinate {} = {:?} outside [{}, {}]",
                i + 1,
                k + 1,
                x[i].get(k),
                pl.action_box.lower.get(k).copied().unwrap_or_else(T::nan),
                pl.action_box.upper.get(k).copied().unwrap_or_else(T::nan),
            )));
        }
    }
    Ok(())
}

/// `h(p, x) + g_i(x)` for player `i` (zero-based).
pub fn evaluate_payoff<T: Scalar>(
    game: &GameInstance<T>,
    i: usize,
    x: &[Vec<T>],
    p: &[T],
) -> Result<T> {
    if i >= game.n_players() {
        return Err(Error::Domain(format!("no player {}", i + 1)));
    }
    domain_check(game, x)?;
    let lat = &game.price_problem().lattice;
    if let Err(k) = lat.check(p, feas_slack(lat.max_step().max(T::one()))) {
        return Err(Error::Domain(format!(
            "price coordinate {} = {:?} outside the price box",
            k + 1,
            p.get(k)
        )));
    }
    let v = game.payoff(i, x, p);
    if !v.is_finite() {
        return Err(Error::Evaluation(format!("payoff of player {} at x = {x:?}", i + 1)));
    }
    Ok(v)
}

/// `SOL[S(x)]` on the price grid: every grid price within `tol.sol` of the minimum of `f(x, ·)`.
pub fn solve_price_problem<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    tol: &Tolerances,
) -> Result<Vec<Vec<T>>> {
    domain_check(game, x)?;
    price_solutions(game, x, tol)
}

pub(crate) fn price_solutions<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    tol: &Tolerances,
) -> Result<Vec<Vec<T>>> {
    let pp = game.price_problem();
    if let Some(rule) = &pp.closed_form {
        return Ok(vec![rule.eval(x)]);
    }
    let cands = pp.candidates(x);
    if cands.is_empty() {
        return Err(Error::InfeasiblePrice { x: format!("{x:?}") });
    }
    let values: Vec<T> = cands.iter().map(|p| pp.f(x, p)).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!(
            "f(x, p) at x = {x:?}, p = {:?}",
            cands[k]
        )));
    }
    let best = values
        .iter()
        .copied()
        .min_by(|a, b| cmp_scalar(*a, *b))
        .unwrap();
    let cut = best + T::lit(tol.sol);
    Ok(cands
        .into_iter()
        .zip(values)
        .filter(|(_, v)| *v <= cut)
        .map(|(p, _)| p)
        .collect())
}

fn close<T: Scalar>(a: &[T], b: &[T], eps: T) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&u, &v)| (u - v).abs() <= eps)
}

/// `p ∈ SOL[S(x)]` within `tol.sol`, for any `p` (not only grid prices).
pub(crate) fn price_optimal<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    tol: &Tolerances,
) -> bool {
    let pp = game.price_problem();
    if let Some(rule) = &pp.closed_form {
        return close(p, &rule.eval(x), T::lit(tol.sol));
    }
    if !pp.admits(x, p) {
        return false;
    }
    let Ok(sol) = price_solutions(game, x, tol) else {
        return false;
    };
    let fmin = sol
        .iter()
        .map(|q| pp.f(x, q))
        .min_by(|a, b| cmp_scalar(*a, *b))
        .unwrap();
    pp.f(x, p) <= fmin + T::lit(tol.sol)
}

/// Membership in `F1 = {(x, p) | x ∈ X, p ∈ SOL[S(x)]}`.
pub fn member_f1<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    tol: &Tolerances,
) -> bool {
    game.in_joint_set(x) && price_optimal(game, x, p, tol)
}

/// `(x_i, p_i) ∈ Ω̄_i(x^{-i}, p^{-i})`: own action feasible, `p_i` optimal, and equal to every rival conjecture.
pub fn in_omega_bar<T: Scalar>(
    game: &GameInstance<T>,
    i: usize,
    x: &[Vec<T>],
    conjectures: &[Vec<T>],
    tol: &Tolerances,
) -> bool {
    let eq = T::lit(tol.eq);
    game.in_action_set(i, x)
        && price_optimal(game, x, &conjectures[i], tol)
        && conjectures
            .iter()
            .enumerate()
            .all(|(j, pj)| j == i || close(&conjectures[i], pj, eq))
}

/// Membership in `F2`, tested through each player's consistent-conjecture feasible set.
pub fn member_f2<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    conjectures: &[Vec<T>],
    tol: &Tolerances,
) -> Result<bool> {
    if game.formulation() != Formulation::AnticipativeE2Consistent {
        return Err(Error::Usage(format!(
            "F2 membership needs the anticipative-e2 formulation, game is {}",
            game.formulation()
        )));
    }
    if x.len() != game.n_players() || conjectures.len() != game.n_players() {
        return Ok(false);
    }
    Ok((0..game.n_players()).all(|i| in_omega_bar(game, i, x, conjectures, tol)))
}

/// Membership in `A = {(x, p) | x ∈ X, p ∈ M(x)}`.
pub fn member_a<T: Scalar>(game: &GameInstance<T>, x: &[Vec<T>], p: &[T]) -> bool {
    game.in_joint_set(x) && game.price_problem().admits(x, p)
}

/// `Γ_i(p, x^{-i})`: grid actions of player `i` that keep `p ∈ M(x)`.
/// The entry `x[i]` is ignored.
pub fn gamma_set<T: Scalar>(
    game: &GameInstance<T>,
    p: &[T],
    i: usize,
    x: &[Vec<T>],
) -> Result<Vec<Vec<T>>> {
    if !game.formulation().is_taking() {
        return Err(Error::Usage(format!(
            "Γ sets belong to price-taking games, game is {}",
            game.formulation()
        )));
    }
    let grid = game.player_grid(i);
    if !game.price_problem().depends_on_x() {
        return Ok(grid.to_vec());
    }
    let mut y = x.to_vec();
    Ok(grid
        .iter()
        .filter(|xi| {
            y[i].clone_from(xi);
            game.price_problem().admits(&y, p)
        })
        .cloned()
        .collect())
}

/// `Ω_i(x^{-i})` on the grid: pairs `(x_i, p_i)` with `p_i ∈ SOL[S(x_i, x^{-i})]`.
pub fn omega_set<T: Scalar>(
    game: &GameInstance<T>,
    i: usize,
    x: &[Vec<T>],
    tol: &Tolerances,
) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    let mut out = Vec::new();
    for xi in game.player_grid(i) {
        let y = GameInstance::with_action(x, i, xi);
        for p in price_solutions(game, &y, tol)? {
            out.push((xi.clone(), p));
        }
    }
    Ok(out)
}

/// Which feasibility set a point was validated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SetTag {
    F1,
    F2,
    A,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prices<T> {
    Single(Vec<T>),
    Conjectures(Vec<Vec<T>>),
}

/// A joint point `(x, p)` or `(x, p_1..p_N)` tagged with its feasibility set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePoint<T> {
    pub x: Vec<Vec<T>>,
    pub prices: Prices<T>,
    pub set_tag: SetTag,
}

impl<T: Scalar> FeasiblePoint<T> {
    pub fn single(x: Vec<Vec<T>>, p: Vec<T>, set_tag: SetTag) -> Result<Self> {
        if set_tag == SetTag::F2 {
            return Err(Error::Usage("F2 points carry one conjecture per player".into()));
        }
        Ok(FeasiblePoint {
            x,
            prices: Prices::Single(p),
            set_tag,
        })
    }

    /// An `F2` point; conjectures must be pairwise equal within `eq`.
    pub fn consistent(x: Vec<Vec<T>>, conjectures: Vec<Vec<T>>, eq: f64) -> Result<Self> {
        let eq = T::lit(eq);
        if conjectures.len() != x.len() {
            return Err(Error::Usage("one conjecture per player required".into()));
        }
        if conjectures.windows(2).any(|w| !close(&w[0], &w[1], eq)) {
            return Err(Error::Usage("conjectures are not pairwise equal".into()));
        }
        Ok(FeasiblePoint {
            x,
            prices: Prices::Conjectures(conjectures),
            set_tag: SetTag::F2,
        })
    }

    /// The (common) price.
    pub fn price(&self) -> &[T] {
        match &self.prices {
            Prices::Single(p) => p,
            Prices::Conjectures(ps) => ps.first().map(Vec::as_slice).unwrap_or(&[]),
        }
    }

    pub fn conjectures(&self) -> Vec<Vec<T>> {
        match &self.prices {
            Prices::Single(p) => vec![p.clone(); self.x.len()],
            Prices::Conjectures(ps) => ps.clone(),
        }
    }

    /// Re-runs the membership test named by the tag.
    pub fn validate(&self, game: &GameInstance<T>, tol: &Tolerances) -> bool {
        match self.set_tag {
            SetTag::F1 => member_f1(game, &self.x, self.price(), tol),
            SetTag::F2 => {
                let gate = if game.formulation() == Formulation::AnticipativeE2Consistent {
                    member_f2(game, &self.x, &self.conjectures(), tol).unwrap_or(false)
                } else {
                    false
                };
                gate
            }
            SetTag::A => member_a(game, &self.x, self.price()),
        }
    }
}
