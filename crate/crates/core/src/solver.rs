//! Surrogate maximization and best-response iteration.
//!
//! `solve_e1`, `solve_e2_consistent` and `solve_tm` maximize a surrogate over the
//! joint grid. Each joint profile contributes its best admissible price, so the
//! search runs over `x` only. Grids within `joint_budget` are searched
//! exhaustively (optionally coarse-to-fine); larger ones fall back to block
//! coordinate ascent from seeded starts.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::game::{gamma_set, price_solutions, FeasiblePoint, Formulation, GameInstance, PriceSet, SetTag};
use crate::grid::{rank, unrank};
use crate::potential::{PotentialFunction, PotentialScope};
use crate::scalar::{cmp_scalar, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    P1Max,
    P2Max,
    PtMax,
    BestResponse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub point: FeasiblePoint<T>,
    pub surrogate_value: T,
    pub method: Method,
    /// Refinement passes, ascent sweeps or best-response sweeps.
    pub iterations: usize,
    pub evaluations: u64,
    pub converged: bool,
    /// Per player, whether `Γ_i(p*, x*^{-i})` is the whole grid (`solve_tm` only).
    pub gamma_full: Vec<bool>,
}

#[derive(Debug, Clone)]
struct Cand<T> {
    value: T,
    idx: usize,
    price_pos: usize,
    price: Vec<T>,
}

fn better<T: Scalar>(a: &Cand<T>, b: &Cand<T>) -> bool {
    match cmp_scalar(a.value, b.value) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.idx, a.price_pos) < (b.idx, b.price_pos),
    }
}

fn pick<T: Scalar>(a: Option<Cand<T>>, b: Option<Cand<T>>) -> Option<Cand<T>> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if better(&b, &a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

type PriceFn<'a, T> = dyn Fn(&[Vec<T>]) -> Result<Vec<Vec<T>>> + Sync + 'a;
type ObjFn<'a, T> = dyn Fn(&[Vec<T>], &[T]) -> T + Sync + 'a;

struct Search<'a, T> {
    game: &'a GameInstance<T>,
    prices: &'a PriceFn<'a, T>,
    objective: &'a ObjFn<'a, T>,
}

struct Found<T> {
    best: Cand<T>,
    iterations: usize,
    evaluations: u64,
    converged: bool,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn at(&self, idx: usize) -> Result<(Option<Cand<T>>, u64)> {
        let x = self.game.profile_at(idx);
        self.at_profile(&x, idx)
    }

    fn at_profile(&self, x: &[Vec<T>], idx: usize) -> Result<(Option<Cand<T>>, u64)> {
        let prices = (self.prices)(x)?;
        let mut best: Option<Cand<T>> = None;
        for (k, p) in prices.iter().enumerate() {
            let v = (self.objective)(x, p);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("surrogate at x = {x:?}, p = {p:?}")));
            }
            let c = Cand {
                value: v,
                idx,
                price_pos: k,
                price: p.clone(),
            };
            best = pick(best, Some(c));
        }
        Ok((best, prices.len() as u64))
    }

    fn scan(&self, indices: &[usize]) -> Result<(Vec<Cand<T>>, u64)> {
        let found: Vec<(Option<Cand<T>>, u64)> = indices
            .par_iter()
            .map(|&idx| self.at(idx))
            .collect::<Result<_>>()?;
        let evals = found.iter().map(|f| f.1).sum();
        Ok((found.into_iter().filter_map(|f| f.0).collect(), evals))
    }

    fn exhaustive(&self) -> Result<Found<T>> {
        let total = self.game.joint_size() as usize;
        let (best, evals) = (0..total)
            .into_par_iter()
            .map(|idx| self.at(idx))
            .try_reduce(
                || (None, 0u64),
                |a, b| Ok((pick(a.0, b.0), a.1 + b.1)),
            )?;
        let best = best.ok_or_else(|| Error::Infeasible("no grid point admits a price".into()))?;
        Ok(Found {
            best,
            iterations: 1,
            evaluations: evals,
            converged: true,
        })
    }

    /// Passes with strides `2^R, ..., 1` over box indices, refining around the best `k`.
    fn coarse_to_fine(&self, refinements: u32, k: usize) -> Result<Found<T>> {
        let n = self.game.n_players();
        let radices: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                self.game.players()[i]
                    .action_box
                    .axes()
                    .iter()
                    .map(Vec::len)
                    .collect()
            })
            .collect();
        let joint_radices = self.game.joint_radices();
        let position = |i: usize, digits: &[usize]| {
            let r = rank(digits, &radices[i]);
            self.game.player_grid_ranks(i).binary_search(&r).ok()
        };

        let mut stride = 1usize << refinements;
        let coarse: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                self.game
                    .player_grid_ranks(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| {
                        unrank(r, &radices[i])
                            .iter()
                            .zip(&radices[i])
                            .all(|(&d, &m)| d % stride == 0 || d + 1 == m)
                    })
                    .map(|(pos, _)| pos)
                    .collect()
            })
            .collect();
        let mut indices: Vec<usize> = cartesian_indices(&coarse)
            .into_iter()
            .map(|digits| rank(&digits, &joint_radices))
            .collect();
        let mut kept: Vec<Cand<T>> = Vec::new();
        let mut evaluations = 0;
        let mut iterations = 0;
        loop {
            indices.sort_unstable();
            indices.dedup();
            let (found, evals) = self.scan(&indices)?;
            evaluations += evals;
            iterations += 1;
            kept.extend(found);
            kept.sort_by(|a, b| {
                if better(a, b) {
                    Ordering::Less
                } else if better(b, a) {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            });
            kept.dedup_by_key(|c| c.idx);
            kept.truncate(k);
            if stride == 1 {
                break;
            }
            stride /= 2;
            indices.clear();
            for c in &kept {
                let digits = unrank(c.idx, &joint_radices);
                let per_player: Vec<Vec<usize>> = (0..n)
                    .map(|i| {
                        let r = self.game.player_grid_ranks(i)[digits[i]];
                        let centre = unrank(r, &radices[i]);
                        let axes: Vec<Vec<usize>> = centre
                            .iter()
                            .zip(&radices[i])
                            .map(|(&d, &m)| {
                                let mut v = vec![d];
                                if d >= stride {
                                    v.push(d - stride);
                                }
                                if d + stride < m {
                                    v.push(d + stride);
                                }
                                v
                            })
                            .collect();
                        cartesian_indices(&axes)
                            .into_iter()
                            .filter_map(|box_digits| position(i, &box_digits))
                            .collect()
                    })
                    .collect();
                indices.extend(
                    cartesian_indices(&per_player)
                        .into_iter()
                        .map(|d| rank(&d, &joint_radices)),
                );
            }
        }
        let best = kept
            .into_iter()
            .next()
            .ok_or_else(|| Error::Infeasible("no grid point admits a price".into()))?;
        Ok(Found {
            best,
            iterations,
            evaluations,
            converged: true,
        })
    }

    /// Block-coordinate ascent on the surrogate from `starts` seeded profiles.
    fn block_ascent(&self, cfg: &SolverConfig) -> Result<Found<T>> {
        let radices = self.game.joint_radices();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let starts: Vec<Vec<usize>> = (0..cfg.multistarts)
            .map(|s| {
                if s == 0 {
                    vec![0; radices.len()]
                } else {
                    radices.iter().map(|&m| rng.gen_range(0..m)).collect()
                }
            })
            .collect();
        let mut evaluations = 0;
        let mut iterations = 0;
        let mut converged = true;
        let mut overall: Option<Cand<T>> = None;
        for start in starts {
            let mut digits = start;
            let (mut current, ev) = self.at(rank(&digits, &radices))?;
            evaluations += ev;
            let mut done = false;
            for _ in 0..cfg.max_br_iterations {
                iterations += 1;
                let mut moved = false;
                for i in 0..radices.len() {
                    let cands: Vec<usize> = (0..radices[i])
                        .map(|d| {
                            let mut e = digits.clone();
                            e[i] = d;
                            rank(&e, &radices)
                        })
                        .collect();
                    let (found, ev) = self.scan(&cands)?;
                    evaluations += ev;
                    let best = found.into_iter().fold(None, |a, c| pick(a, Some(c)));
                    if let Some(b) = best {
                        let improves = match &current {
                            None => true,
                            Some(c) => cmp_scalar(b.value, c.value) == Ordering::Greater,
                        };
                        if improves {
                            digits = unrank(b.idx, &radices);
                            current = Some(b);
                            moved = true;
                        }
                    }
                }
                if !moved {
                    done = true;
                    break;
                }
            }
            converged &= done;
            overall = pick(overall, current);
        }
        let best =
            overall.ok_or_else(|| Error::Infeasible("no visited grid point admits a price".into()))?;
        Ok(Found {
            best,
            iterations,
            evaluations,
            converged,
        })
    }

    fn run(&self, cfg: &SolverConfig) -> Result<Found<T>> {
        if self.game.joint_size() > cfg.joint_budget {
            self.block_ascent(cfg)
        } else if cfg.grid_refinements == 0 {
            self.exhaustive()
        } else {
            self.coarse_to_fine(cfg.grid_refinements, cfg.multistarts)
        }
    }
}

fn cartesian_indices(axes: &[Vec<usize>]) -> Vec<Vec<usize>> {
    crate::game::cartesian(axes)
}

fn require_verified(pi: &PotentialFunction, scope: PotentialScope) -> Result<()> {
    if pi.scope != scope {
        return Err(Error::Usage(format!("expected a {scope:?} potential, got {:?}", pi.scope)));
    }
    if !pi.is_verified() {
        return Err(Error::Usage("potential has not been verified".into()));
    }
    Ok(())
}

fn require_formulation<T: Scalar>(game: &GameInstance<T>, f: Formulation) -> Result<()> {
    if game.formulation() != f {
        return Err(Error::Usage(format!(
            "this solver needs the {f} formulation, game is {}",
            game.formulation()
        )));
    }
    Ok(())
}

/// Maximizes `h(p, x) + π(x)` over the grid of `F1`.
pub fn solve_e1<T: Scalar>(
    game: &GameInstance<T>,
    pi: &PotentialFunction,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    require_formulation(game, Formulation::AnticipativeE1)?;
    require_verified(pi, PotentialScope::PlayersOnly)?;
    let tol = cfg.tol;
    let prices = |x: &[Vec<T>]| price_solutions(game, x, &tol);
    let objective = |x: &[Vec<T>], p: &[T]| game.h(0, x, p) + pi.eval(x, &[]);
    let found = Search {
        game,
        prices: &prices,
        objective: &objective,
    }
    .run(cfg)?;
    let x = game.profile_at(found.best.idx);
    Ok(SolveResult {
        point: FeasiblePoint::single(x, found.best.price, SetTag::F1)?,
        surrogate_value: found.best.value,
        method: Method::P1Max,
        iterations: found.iterations,
        evaluations: found.evaluations,
        converged: found.converged,
        gamma_full: Vec::new(),
    })
}

/// Maximizes `Σ_i h(p, x_i) + π(x)` over the grid of `F2` (one common price).
pub fn solve_e2_consistent<T: Scalar>(
    game: &GameInstance<T>,
    pi: &PotentialFunction,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    require_formulation(game, Formulation::AnticipativeE2Consistent)?;
    require_verified(pi, PotentialScope::PlayersOnly)?;
    let tol = cfg.tol;
    let prices = |x: &[Vec<T>]| price_solutions(game, x, &tol);
    let objective = |x: &[Vec<T>], p: &[T]| {
        (0..game.n_players()).map(|i| game.h(i, x, p)).sum::<T>() + pi.eval(x, &[])
    };
    let found = Search {
        game,
        prices: &prices,
        objective: &objective,
    }
    .run(cfg)?;
    let x = game.profile_at(found.best.idx);
    let conj = vec![found.best.price; game.n_players()];
    Ok(SolveResult {
        point: FeasiblePoint::consistent(x, conj, tol.eq)?,
        surrogate_value: found.best.value,
        method: Method::P2Max,
        iterations: found.iterations,
        evaluations: found.evaluations,
        converged: found.converged,
        gamma_full: Vec::new(),
    })
}

/// Maximizes `Π(x, p)` over the grid of `A` and reports where `Γ_i` is the whole grid.
pub fn solve_tm<T: Scalar>(
    game: &GameInstance<T>,
    big_pi: &PotentialFunction,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    require_formulation(game, Formulation::TakingTm)?;
    require_verified(big_pi, PotentialScope::FullGame)?;
    let prices = |x: &[Vec<T>]| Ok(game.price_problem().candidates(x));
    let objective = |x: &[Vec<T>], p: &[T]| big_pi.eval(x, p);
    let found = Search {
        game,
        prices: &prices,
        objective: &objective,
    }
    .run(cfg)?;
    let x = game.profile_at(found.best.idx);
    let gamma_full = (0..game.n_players())
        .map(|i| {
            gamma_set(game, &found.best.price, i, &x).map(|g| g.len() == game.player_grid(i).len())
        })
        .collect::<Result<_>>()?;
    Ok(SolveResult {
        point: FeasiblePoint::single(x, found.best.price, SetTag::A)?,
        surrogate_value: found.best.value,
        method: Method::PtMax,
        iterations: found.iterations,
        evaluations: found.evaluations,
        converged: found.converged,
        gamma_full,
    })
}

fn box_digits<T: Scalar>(game: &GameInstance<T>, i: usize, xi: &[T]) -> Vec<usize> {
    let b = &game.players()[i].action_box;
    (0..b.dim())
        .map(|k| {
            let step = b.step(k);
            if step == T::zero() {
                0
            } else {
                ((xi[k] - b.lower[k]) / step)
                    .round()
                    .to_usize()
                    .unwrap_or(0)
                    .min(b.grid_points[k] - 1)
            }
        })
        .collect()
}

fn price_response<T: Scalar>(game: &GameInstance<T>, x: &[Vec<T>]) -> Result<Vec<T>> {
    let pp = game.price_problem();
    if let Some(rule) = &pp.closed_form {
        return Ok(rule.eval(x));
    }
    let cands = pp.candidates(x);
    let mut best: Option<(T, Vec<T>)> = None;
    for p in cands {
        let v = pp.f(x, &p);
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("f(x, p) at x = {x:?}, p = {p:?}")));
        }
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, p));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::InfeasiblePrice { x: format!("{x:?}") })
}

fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| (u - v).abs())
        .fold(T::zero(), T::max)
}

/// Damped Gauss-Seidel best responses for the players, then the price player, per sweep.
pub fn solve_t1_best_response<T: Scalar>(
    game: &GameInstance<T>,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    require_formulation(game, Formulation::TakingT1)?;
    let lambda = T::lit(cfg.br_damping);
    let one = T::one();
    let mut x: Vec<Vec<T>> = (0..game.n_players())
        .map(|i| game.player_grid(i)[0].clone())
        .collect();
    let mut p = price_response(game, &x)?;
    let finite_prices = matches!(game.price_problem().feasible, PriceSet::Finite(_));
    let mut evaluations = 0u64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_br_iterations {
        iterations += 1;
        let mut movement = T::zero();
        for i in 0..game.n_players() {
            let mut best: Option<(T, usize)> = None;
            for (k, xi) in game.player_grid(i).iter().enumerate() {
                let y = GameInstance::with_action(&x, i, xi);
                let v = game.payoff(i, &y, &p);
                evaluations += 1;
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!("payoff of player {} at x = {y:?}", i + 1)));
                }
                if best.map_or(true, |(b, _)| v > b) {
                    best = Some((v, k));
                }
            }
            let target = game.player_grid(i)[best.unwrap().1].clone();
            let next = if cfg.br_damping >= 1.0 {
                target
            } else {
                let b = &game.players()[i].action_box;
                let from = box_digits(game, i, &x[i]);
                let to = box_digits(game, i, &target);
                let digits: Vec<usize> = from
                    .iter()
                    .zip(&to)
                    .map(|(&a, &c)| {
                        let v = (one - lambda) * T::lit(a as f64) + lambda * T::lit(c as f64);
                        v.round().to_usize().unwrap_or(0)
                    })
                    .collect();
                let axes = b.axes();
                let cand: Vec<T> = digits.iter().enumerate().map(|(k, &d)| axes[k][d]).collect();
                let y = GameInstance::with_action(&x, i, &cand);
                if game.in_action_set(i, &y) {
                    cand
                } else {
                    target
                }
            };
            movement = movement.max(sup_distance(&x[i], &next));
            x[i] = next;
        }
        let response = price_response(game, &x)?;
        let next_p = if cfg.br_damping >= 1.0 || finite_prices {
            response
        } else {
            p.iter()
                .zip(&response)
                .map(|(&a, &b)| (one - lambda) * a + lambda * b)
                .collect()
        };
        movement = movement.max(sup_distance(&p, &next_p));
        p = next_p;
        if movement <= T::lit(cfg.tol.dev) {
            converged = true;
            break;
        }
    }
    let value = (0..game.n_players()).map(|i| game.payoff(i, &x, &p)).sum();
    Ok(SolveResult {
        point: FeasiblePoint::single(x, p, SetTag::A)?,
        surrogate_value: value,
        method: Method::BestResponse,
        iterations,
        evaluations,
        converged,
        gamma_full: vec![true; game.n_players()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::expr::Expr;
    use crate::game::{member_a, member_f1, member_f2, PlayerSpec, PriceProblem, PriceRule, SharedTerm};
    use crate::grid::ActionBox;
    use crate::potential::{construct_sum_potential, construct_tm_potential};

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn closed_form_game(
        gs: &[&str],
        lo: f64,
        hi: f64,
        n: usize,
        h: &str,
        rule: &str,
        formulation: Formulation,
    ) -> GameInstance<f64> {
        let players = gs
            .iter()
            .enumerate()
            .map(|(i, g)| PlayerSpec::new(i, ActionBox::uniform(1, lo, hi, n).unwrap(), e(g), vec![]).unwrap())
            .collect();
        let lattice = ActionBox::uniform(1, -100.0, 100.0, 2).unwrap();
        let price = PriceProblem::closed_form_only(lattice, PriceRule::Exprs(vec![e(rule)])).unwrap();
        GameInstance::new(players, SharedTerm::new(e(h)), price, formulation).unwrap()
    }

    #[test]
    fn e1_single_player_calculus() {
        // maximize 10x - 2x^2 on [0, 10]: x = 2.5, p = 7.5
        let g = closed_form_game(&["-x1^2"], 0.0, 10.0, 21, "p * x1", "10 - x1", Formulation::AnticipativeE1);
        let pi = construct_sum_potential(&g).unwrap();
        let r = solve_e1(&g, &pi, &SolverConfig::default()).unwrap();
        assert_eq!(r.point.x, vec![vec![2.5]]);
        assert_eq!(r.point.price(), &[7.5]);
        assert_eq!(r.surrogate_value, 12.5);
        assert!(member_f1(&g, &r.point.x, r.point.price(), &Tolerances::default()));
    }

    #[test]
    fn flat_objective_returns_lexicographic_minimum() {
        let g = closed_form_game(&["0", "0"], 0.0, 1.0, 3, "3", "1", Formulation::AnticipativeE1);
        let pi = construct_sum_potential(&g).unwrap();
        let r = solve_e1(&g, &pi, &SolverConfig::default()).unwrap();
        assert_eq!(r.point.x, vec![vec![0.0], vec![0.0]]);
        assert_eq!(r.surrogate_value, 3.0);
    }

    #[test]
    fn e2_two_player_calculus() {
        // (10 - s) s - Σx_i^2 peaks at x = (5/3, 5/3), p = 20/3; grid step 1/6
        let g = closed_form_game(
            &["-x1^2", "-x2^2"],
            0.0,
            5.0,
            31,
            "p * xi",
            "10 - (x1 + x2)",
            Formulation::AnticipativeE2Consistent,
        );
        let pi = construct_sum_potential(&g).unwrap();
        let r = solve_e2_consistent(&g, &pi, &SolverConfig::default()).unwrap();
        for xi in &r.point.x {
            assert!((xi[0] - 5.0 / 3.0).abs() <= 1.0 / 6.0 + 1e-12);
        }
        assert!((r.point.price()[0] - 20.0 / 3.0).abs() <= 2.0 / 6.0 + 1e-12);
        assert!(member_f2(&g, &r.point.x, &r.point.conjectures(), &Tolerances::default()).unwrap());
    }

    #[test]
    fn e2_matches_e1_for_one_player() {
        let a = closed_form_game(&["-x1^2"], 0.0, 10.0, 21, "p * x1", "10 - x1", Formulation::AnticipativeE1);
        let b = closed_form_game(
            &["-x1^2"],
            0.0,
            10.0,
            21,
            "p * xi",
            "10 - x1",
            Formulation::AnticipativeE2Consistent,
        );
        let ra = solve_e1(&a, &construct_sum_potential(&a).unwrap(), &SolverConfig::default()).unwrap();
        let rb =
            solve_e2_consistent(&b, &construct_sum_potential(&b).unwrap(), &SolverConfig::default()).unwrap();
        assert_eq!(ra.point.x, rb.point.x);
        assert_eq!(ra.point.price(), rb.point.price());
        assert_eq!(ra.surrogate_value, rb.surrogate_value);
    }

    #[test]
    fn refinement_and_fallback_agree_on_concave_instance() {
        let g = closed_form_game(
            &["-x1^2", "-x2^2"],
            0.0,
            5.0,
            31,
            "p * xi",
            "10 - (x1 + x2)",
            Formulation::AnticipativeE2Consistent,
        );
        let pi = construct_sum_potential(&g).unwrap();
        let full = solve_e2_consistent(&g, &pi, &SolverConfig::default()).unwrap();
        let coarse = SolverConfig {
            grid_refinements: 3,
            multistarts: 4,
            ..Default::default()
        };
        let rc = solve_e2_consistent(&g, &pi, &coarse).unwrap();
        assert_eq!(rc.point, full.point);
        assert!(rc.evaluations < full.evaluations);
        let ascent = SolverConfig {
            joint_budget: 10,
            multistarts: 3,
            ..Default::default()
        };
        let ra = solve_e2_consistent(&g, &pi, &ascent).unwrap();
        assert!(ra.converged);
        for (a, b) in ra.point.x.iter().zip(&full.point.x) {
            assert!((a[0] - b[0]).abs() <= 1.0 / 6.0 + 1e-12);
        }
    }

    #[test]
    fn constant_shift_keeps_argmax() {
        let g = closed_form_game(&["-x1^2"], 0.0, 10.0, 21, "p * x1", "10 - x1", Formulation::AnticipativeE1);
        let pi = construct_sum_potential(&g).unwrap();
        let shifted = PotentialFunction::user(pi.pi.clone() + Expr::c(1234.5), PotentialScope::PlayersOnly)
            .verify(&g, 200, 0, &Tolerances::default())
            .unwrap();
        let a = solve_e1(&g, &pi, &SolverConfig::default()).unwrap();
        let b = solve_e1(&g, &shifted, &SolverConfig::default()).unwrap();
        assert_eq!(a.point, b.point);
    }

    #[test]
    fn unverified_potential_refused() {
        let g = closed_form_game(&["-x1^2"], 0.0, 10.0, 21, "p * x1", "10 - x1", Formulation::AnticipativeE1);
        let cand = PotentialFunction::user(e("-x1^2"), PotentialScope::PlayersOnly);
        assert!(matches!(solve_e1(&g, &cand, &SolverConfig::default()), Err(Error::Usage(_))));
    }

    fn tm_game(upper: &str, f: &str) -> GameInstance<f64> {
        let players = (0..2)
            .map(|i| PlayerSpec::new(i, ActionBox::uniform(1, 0.0, 4.0, 9).unwrap(), e("-(xi - 1)^2"), vec![]).unwrap())
            .collect();
        let lattice = ActionBox::uniform(1, 0.0, 8.0, 17).unwrap();
        let price = PriceProblem::new(
            e(f),
            PriceSet::Box {
                lower: vec![e("0")],
                upper: vec![e(upper)],
            },
            lattice,
            None,
        )
        .unwrap();
        GameInstance::new(players, SharedTerm::new(e("0")), price, Formulation::TakingTm).unwrap()
    }

    #[test]
    fn tm_separable_splits() {
        let g = tm_game("8", "(p - 3)^2");
        let pi = construct_sum_potential(&g).unwrap();
        let big = construct_tm_potential(&g, &pi, 1000, 0, &Tolerances::default()).unwrap();
        let r = solve_tm(&g, &big, &SolverConfig::default()).unwrap();
        assert_eq!(r.point.x, vec![vec![1.0], vec![1.0]]);
        assert_eq!(r.point.price(), &[3.0]);
        assert_eq!(r.gamma_full, vec![true, true]);
    }

    #[test]
    fn tm_gamma_report_matches_enumeration() {
        let g = tm_game("x1 + x2", "-p");
        let pi = construct_sum_potential(&g).unwrap();
        let big = construct_tm_potential(&g, &pi, 1000, 0, &Tolerances::default()).unwrap();
        let r = solve_tm(&g, &big, &SolverConfig::default()).unwrap();
        assert!(member_a(&g, &r.point.x, r.point.price()));
        for i in 0..2 {
            let full = gamma_set(&g, r.point.price(), i, &r.point.x).unwrap().len() == g.player_grid(i).len();
            assert_eq!(r.gamma_full[i], full);
        }
    }

    fn t1_game(gs: &[&str], h: &str, n: usize) -> GameInstance<f64> {
        let players = gs
            .iter()
            .enumerate()
            .map(|(i, g)| PlayerSpec::new(i, ActionBox::uniform(1, 0.0, 1.0, n).unwrap(), e(g), vec![]).unwrap())
            .collect();
        let lattice = ActionBox::uniform(1, 0.0, 4.0, 9).unwrap();
        let price = PriceProblem::new(
            e("(p - 2)^2"),
            PriceSet::Box {
                lower: vec![e("0")],
                upper: vec![e("4")],
            },
            lattice,
            None,
        )
        .unwrap();
        GameInstance::new(players, SharedTerm::new(e(h)), price, Formulation::TakingT1).unwrap()
    }

    #[test]
    fn best_response_concave_two_sweeps() {
        let g = t1_game(&["-(x1 - 0.3)^2"], "0", 11);
        let r = solve_t1_best_response(&g, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!((r.point.x[0][0] - 0.3).abs() < 1e-12);
        assert_eq!(r.point.price(), &[2.0]);
    }

    #[test]
    fn best_response_cycles_without_pure_equilibrium() {
        let g = t1_game(&["(2*x1 - 1) * (2*x2 - 1)", "-(2*x1 - 1) * (2*x2 - 1)"], "0", 2);
        let cfg = SolverConfig {
            max_br_iterations: 25,
            ..Default::default()
        };
        let r = solve_t1_best_response(&g, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 25);
    }

    #[test]
    fn damped_best_response_still_converges() {
        let g = t1_game(&["-x1^2"], "p * x1", 21);
        let cfg = SolverConfig {
            br_damping: 0.5,
            ..Default::default()
        };
        let r = solve_t1_best_response(&g, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.point.x, vec![vec![1.0]]);
    }
}
