//! Equilibrium certificates by exhaustive unilateral deviation scans.
//!
//! A certificate lists, per player, the largest payoff gain over that player's
//! deviation set and, for price-taking games, the price player's gap. A point is
//! certified when every gap is at most `tol.dev + L * step`, where `step` is the
//! largest grid spacing and `L` the configured Lipschitz bound.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{SolverConfig, Tolerances};
use crate::error::{Error, Result};
use crate::game::{
    feas_slack, gamma_set, member_a, member_f1, member_f2, price_solutions, FeasiblePoint, Formulation,
    GameInstance, SetTag,
};
use crate::grid::{rank, unrank};
use crate::scalar::{cmp_scalar, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

/// Which equilibrium notion a certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EquilibriumKind {
    /// Deviations `(x_i, p_i)` with `p_i` optimal for the price player.
    E1,
    /// As `E1`, with the payoff `h(p, x_i) + g_i(x)`.
    E2,
    /// As `E2`, with `p_i` also equal to the rivals' conjectures.
    E2Consistent,
    /// Deviations over the whole `X_i` at the fixed price, plus the price player.
    T,
    /// Deviations over `Γ_i(p, x^{-i})`, plus the price player.
    Tm,
}

impl EquilibriumKind {
    pub fn for_formulation(f: Formulation) -> Self {
        match f {
            Formulation::AnticipativeE1 => EquilibriumKind::E1,
            Formulation::AnticipativeE2Consistent => EquilibriumKind::E2Consistent,
            Formulation::TakingT1 => EquilibriumKind::T,
            Formulation::TakingTm => EquilibriumKind::Tm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EquilibriumKind::E1 => "e1",
            EquilibriumKind::E2 => "e2",
            EquilibriumKind::E2Consistent => "e2-consistent",
            EquilibriumKind::T => "t",
            EquilibriumKind::Tm => "tm",
        }
    }
}

/// The best deviation found.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    /// Deviating player, or `None` for the price player.
    pub player: Option<usize>,
    /// The deviating action (players) or price (price player).
    pub action: Vec<T>,
    /// Price at which the deviation is evaluated.
    pub price: Vec<T>,
    pub gain: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCertificate<T> {
    pub kind: EquilibriumKind,
    pub point: FeasiblePoint<T>,
    pub per_player_gap: Vec<T>,
    /// Price-taking checks only.
    pub price_player_gap: Option<T>,
    pub tolerances: Tolerances,
    /// `tol.dev + L * step`.
    pub threshold: T,
    pub verdict: Verdict,
    pub witness: Option<Witness<T>>,
    /// Per player, whether the deviation set of a `Tm` check was the whole grid.
    pub gamma_full: Option<Vec<bool>>,
}

impl<T: Scalar> EquilibriumCertificate<T> {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    /// Structured record with the fixed fields `point`, `gaps`, `verdict`, `witness`, `tolerances`.
    pub fn to_record(&self) -> Value {
        let v = |xs: &[T]| xs.iter().map(|a| a.to_f64_lossy()).collect::<Vec<f64>>();
        let point = json!({
            "x": self.point.x.iter().map(|xi| v(xi)).collect::<Vec<_>>(),
            "p": v(self.point.price()),
            "set": format!("{:?}", self.point.set_tag),
        });
        let gaps = json!({
            "players": v(&self.per_player_gap),
            "price_player": self.price_player_gap.map(|g| g.to_f64_lossy()),
        });
        let witness = self.witness.as_ref().map(|w| {
            json!({
                "player": w.player.map(|i| i + 1),
                "action": v(&w.action),
                "price": v(&w.price),
                "gain": w.gain.to_f64_lossy(),
            })
        });
        let mut tolerances = serde_json::to_value(self.tolerances).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut tolerances {
            m.insert("threshold".into(), json!(self.threshold.to_f64_lossy()));
        }
        let mut record = json!({
            "check": self.kind.name(),
            "point": point,
            "gaps": gaps,
            "verdict": format!("{:?}", self.verdict),
            "witness": witness,
            "tolerances": tolerances,
        });
        if let Some(g) = &self.gamma_full {
            record["gamma_full"] = json!(g);
        }
        record
    }
}

/// Largest grid spacing over the players' boxes and the price lattice.
pub fn grid_step<T: Scalar>(game: &GameInstance<T>) -> T {
    game.players()
        .iter()
        .map(|pl| pl.action_box.max_step())
        .fold(game.price_problem().lattice.max_step(), T::max)
}

fn threshold<T: Scalar>(game: &GameInstance<T>, cfg: &SolverConfig) -> T {
    T::lit(cfg.tol.dev) + T::lit(cfg.lipschitz) * grid_step(game)
}

/// Per-player scan outcome.
struct Scan<T> {
    best: Option<Witness<T>>,
    complete: bool,
}

fn keep_best<T: Scalar>(best: &mut Option<Witness<T>>, cand: Witness<T>) {
    let replace = match best {
        None => true,
        Some(b) => cmp_scalar(cand.gain, b.gain) == std::cmp::Ordering::Greater,
    };
    if replace {
        *best = Some(cand);
    }
}

/// Positions in player `i`'s grid to scan: all of them, or a seeded sample of `budget`.
fn scan_positions(len: usize, budget: u128, seed: u64) -> (Vec<usize>, bool) {
    if len as u128 <= budget {
        ((0..len).collect(), true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, len, budget as usize).into_vec();
        picked.sort_unstable();
        (picked, false)
    }
}

/// Optimal prices at joint grid profiles, shared across checks during enumeration.
struct SolTable<T> {
    radices: Vec<usize>,
    sols: Vec<Vec<Vec<T>>>,
}

/// Price solutions at `y`, the profile obtained from grid index `base` by moving player `i` to position `pos`.
fn sols_at<T: Scalar>(
    game: &GameInstance<T>,
    table: Option<(&SolTable<T>, usize)>,
    i: usize,
    pos: usize,
    y: &[Vec<T>],
    tol: &Tolerances,
) -> Result<Vec<Vec<T>>> {
    match table {
        Some((t, base)) => {
            let mut digits = unrank(base, &t.radices);
            digits[i] = pos;
            Ok(t.sols[rank(&digits, &t.radices)].clone())
        }
        None => price_solutions(game, y, tol),
    }
}

fn anticipative_scan<T: Scalar>(
    game: &GameInstance<T>,
    i: usize,
    x: &[Vec<T>],
    p: &[T],
    consistent: bool,
    cfg: &SolverConfig,
    table: Option<(&SolTable<T>, usize)>,
) -> Result<Scan<T>> {
    let tol = &cfg.tol;
    let incumbent = game.payoff(i, x, p);
    let grid = game.player_grid(i);
    let (positions, complete) = scan_positions(grid.len(), cfg.deviation_budget, cfg.seed ^ i as u64);
    let eq = T::lit(tol.eq);
    let mut best = None;
    for pos in positions {
        let y = GameInstance::with_action(x, i, &grid[pos]);
        for q in sols_at(game, table, i, pos, &y, tol)? {
            if consistent && q.iter().zip(p).any(|(&a, &b)| (a - b).abs() > eq) {
                continue;
            }
            let gain = game.payoff(i, &y, &q) - incumbent;
            if !gain.is_finite() {
                return Err(Error::Evaluation(format!("payoff of player {} at x = {y:?}", i + 1)));
            }
            keep_best(
                &mut best,
                Witness {
                    player: Some(i),
                    action: grid[pos].clone(),
                    price: q,
                    gain,
                },
            );
        }
    }
    Ok(Scan { best, complete })
}

fn taking_scan<T: Scalar>(
    game: &GameInstance<T>,
    i: usize,
    x: &[Vec<T>],
    p: &[T],
    restrict: bool,
    cfg: &SolverConfig,
) -> Result<(Scan<T>, bool)> {
    let incumbent = game.payoff(i, x, p);
    let gamma;
    let (set, full): (&[Vec<T>], bool) = if restrict {
        gamma = gamma_set(game, p, i, x)?;
        let full = gamma.len() == game.player_grid(i).len();
        (&gamma, full)
    } else {
        (game.player_grid(i), true)
    };
    let (positions, complete) = scan_positions(set.len(), cfg.deviation_budget, cfg.seed ^ i as u64);
    let mut best = None;
    for pos in positions {
        let y = GameInstance::with_action(x, i, &set[pos]);
        let gain = game.payoff(i, &y, p) - incumbent;
        if !gain.is_finite() {
            return Err(Error::Evaluation(format!("payoff of player {} at x = {y:?}", i + 1)));
        }
        keep_best(
            &mut best,
            Witness {
                player: Some(i),
                action: set[pos].clone(),
                price: p.to_vec(),
                gain,
            },
        );
    }
    Ok((Scan { best, complete }, full))
}

/// Price player's gap: `f(x, p) - min f(x, ·)` on the grid of `M(x)`, or `|p - r(x)|_∞` for a price rule.
fn price_player_scan<T: Scalar>(game: &GameInstance<T>, x: &[Vec<T>], p: &[T]) -> Result<Witness<T>> {
    let pp = game.price_problem();
    if let Some(rule) = &pp.closed_form {
        let r = rule.eval(x);
        let gap = r
            .iter()
            .zip(p)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        return Ok(Witness {
            player: None,
            action: r.clone(),
            price: r,
            gain: gap,
        });
    }
    let incumbent = pp.f(x, p);
    let mut best: Option<Witness<T>> = None;
    for q in pp.candidates(x) {
        let v = pp.f(x, &q);
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("f(x, p) at x = {x:?}, p = {q:?}")));
        }
        keep_best(
            &mut best,
            Witness {
                player: None,
                action: q.clone(),
                price: q,
                gain: incumbent - v,
            },
        );
    }
    best.ok_or_else(|| Error::InfeasiblePrice { x: format!("{x:?}") })
}

fn assemble<T: Scalar>(
    game: &GameInstance<T>,
    kind: EquilibriumKind,
    point: FeasiblePoint<T>,
    scans: Vec<Scan<T>>,
    price: Option<Witness<T>>,
    gamma_full: Option<Vec<bool>>,
    cfg: &SolverConfig,
) -> EquilibriumCertificate<T> {
    let thr = threshold(game, cfg);
    let per_player_gap: Vec<T> = scans
        .iter()
        .map(|s| s.best.as_ref().map_or(T::zero(), |w| w.gain))
        .collect();
    let complete = scans.iter().all(|s| s.complete);
    let mut witness: Option<Witness<T>> = None;
    for s in scans {
        if let Some(w) = s.best {
            keep_best(&mut witness, w);
        }
    }
    let price_player_gap = price.as_ref().map(|w| w.gain);
    if let Some(w) = price {
        keep_best(&mut witness, w);
    }
    let refuted = per_player_gap
        .iter()
        .chain(price_player_gap.iter())
        .any(|&g| g.is_nan() || g > thr);
    let verdict = if refuted {
        Verdict::Refuted
    } else if !complete {
        Verdict::Inconclusive
    } else {
        Verdict::Certified
    };
    EquilibriumCertificate {
        kind,
        point,
        per_player_gap,
        price_player_gap,
        tolerances: cfg.tol,
        threshold: thr,
        verdict,
        witness,
        gamma_full,
    }
}

fn not_feasible<T: Scalar>(what: &str, x: &[Vec<T>], p: &[T]) -> Error {
    Error::NotFeasible(format!("(x, p) = ({x:?}, {p:?}) is not in {what}"))
}

fn anticipative_check<T: Scalar>(
    game: &GameInstance<T>,
    kind: EquilibriumKind,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
    table: Option<(&SolTable<T>, usize)>,
) -> Result<EquilibriumCertificate<T>> {
    let consistent = kind == EquilibriumKind::E2Consistent;
    let point = if consistent {
        let conj = vec![p.to_vec(); game.n_players()];
        if !member_f2(game, x, &conj, &cfg.tol)? {
            return Err(not_feasible("F2", x, p));
        }
        FeasiblePoint::consistent(x.to_vec(), conj, cfg.tol.eq)?
    } else {
        if !member_f1(game, x, p, &cfg.tol) {
            return Err(not_feasible("F1", x, p));
        }
        FeasiblePoint::single(x.to_vec(), p.to_vec(), SetTag::F1)?
    };
    let scans = (0..game.n_players())
        .into_par_iter()
        .map(|i| anticipative_scan(game, i, x, p, consistent, cfg, table))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(game, kind, point, scans, None, None, cfg))
}

fn taking_check<T: Scalar>(
    game: &GameInstance<T>,
    kind: EquilibriumKind,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    if !game.formulation().is_taking() {
        return Err(Error::Usage(format!(
            "price-taking checks need a taking formulation, game is {}",
            game.formulation()
        )));
    }
    if !member_a(game, x, p) {
        return Err(not_feasible("A", x, p));
    }
    let restrict = kind == EquilibriumKind::Tm;
    let results = (0..game.n_players())
        .into_par_iter()
        .map(|i| taking_scan(game, i, x, p, restrict, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (scans, full): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let price = price_player_scan(game, x, p)?;
    let point = FeasiblePoint::single(x.to_vec(), p.to_vec(), SetTag::A)?;
    Ok(assemble(
        game,
        kind,
        point,
        scans,
        Some(price),
        restrict.then_some(full),
        cfg,
    ))
}

/// Certificate against deviations `(x_i, p_i)` with `p_i ∈ SOL[S(x_i, x*^{-i})]`.
pub fn check_e1<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    anticipative_check(game, EquilibriumKind::E1, x, p, cfg, None)
}

/// Like [`check_e1`] with the own-action shared term, and no consistency restriction.
pub fn check_e2<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    anticipative_check(game, EquilibriumKind::E2, x, p, cfg, None)
}

/// Certificate against deviations in `Ω̄_i`: the deviation price must also equal `p*`.
pub fn check_e2_consistent<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    anticipative_check(game, EquilibriumKind::E2Consistent, x, p, cfg, None)
}

/// Price-taking certificate with deviations over the whole grid of `X_i`.
pub fn check_t<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    taking_check(game, EquilibriumKind::T, x, p, cfg)
}

/// Price-taking certificate with deviations restricted to `Γ_i(p*, x*^{-i})`.
pub fn check_tm<T: Scalar>(
    game: &GameInstance<T>,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    taking_check(game, EquilibriumKind::Tm, x, p, cfg)
}

/// Dispatches to the check matching `kind`.
pub fn check<T: Scalar>(
    game: &GameInstance<T>,
    kind: EquilibriumKind,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
) -> Result<EquilibriumCertificate<T>> {
    match kind {
        EquilibriumKind::E1 | EquilibriumKind::E2 | EquilibriumKind::E2Consistent => {
            anticipative_check(game, kind, x, p, cfg, None)
        }
        EquilibriumKind::T | EquilibriumKind::Tm => taking_check(game, kind, x, p, cfg),
    }
}

/// Runs the matching check on every feasible grid point and returns the certified ones,
/// ordered by joint grid index and then price.
pub fn enumerate_equilibria<T: Scalar>(
    game: &GameInstance<T>,
    kind: EquilibriumKind,
    cfg: &SolverConfig,
) -> Result<Vec<EquilibriumCertificate<T>>> {
    cfg.validate()?;
    let joint = game.joint_size();
    let per_point = match kind {
        EquilibriumKind::T | EquilibriumKind::Tm => game.price_problem().lattice.size(),
        _ => 1,
    };
    let required = joint.saturating_mul(per_point);
    if required > cfg.enumeration_budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: cfg.enumeration_budget,
        });
    }
    if kind == EquilibriumKind::E2Consistent && game.formulation() != Formulation::AnticipativeE2Consistent {
        return Err(Error::Usage(format!(
            "consistent-conjecture checks need the anticipative-e2 formulation, game is {}",
            game.formulation()
        )));
    }
    let total = joint as usize;
    let anticipative = !matches!(kind, EquilibriumKind::T | EquilibriumKind::Tm);
    let table = if anticipative {
        Some(SolTable {
            radices: game.joint_radices(),
            sols: (0..total)
                .into_par_iter()
                .map(|idx| price_solutions(game, &game.profile_at(idx), &cfg.tol))
                .collect::<Result<_>>()?,
        })
    } else {
        None
    };
    let found: Vec<Vec<EquilibriumCertificate<T>>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = game.profile_at(idx);
            let prices = match &table {
                Some(t) => t.sols[idx].clone(),
                None => game.price_problem().candidates(&x),
            };
            let mut out = Vec::new();
            for p in prices {
                // grid profiles with prices from SOL are in F1 (and F2 with one common price)
                let cert = if anticipative {
                    anticipative_scans(game, kind, &x, &p, cfg, table.as_ref().map(|t| (t, idx)))?
                } else {
                    taking_check(game, kind, &x, &p, cfg)?
                };
                if cert.is_certified() {
                    out.push(cert);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn anticipative_scans<T: Scalar>(
    game: &GameInstance<T>,
    kind: EquilibriumKind,
    x: &[Vec<T>],
    p: &[T],
    cfg: &SolverConfig,
    table: Option<(&SolTable<T>, usize)>,
) -> Result<EquilibriumCertificate<T>> {
    let consistent = kind == EquilibriumKind::E2Consistent;
    let point = if consistent {
        FeasiblePoint::consistent(x.to_vec(), vec![p.to_vec(); game.n_players()], cfg.tol.eq)?
    } else {
        FeasiblePoint::single(x.to_vec(), p.to_vec(), SetTag::F1)?
    };
    let scans = (0..game.n_players())
        .map(|i| anticipative_scan(game, i, x, p, consistent, cfg, table))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(game, kind, point, scans, None, None, cfg))
}

/// `true` when `a` and `b` name the same grid point up to the membership slack.
pub fn same_point<T: Scalar>(a: &FeasiblePoint<T>, b: &FeasiblePoint<T>) -> bool {
    let close = |u: &[T], v: &[T]| {
        u.len() == v.len() && u.iter().zip(v).all(|(&s, &t)| (s - t).abs() <= feas_slack(s))
    };
    a.x.len() == b.x.len()
        && a.x.iter().zip(&b.x).all(|(u, v)| close(u, v))
        && close(a.price(), b.price())
}
