//! Generation expansion planning as a price-coupling game.
//!
//! Each company is a player whose decision is its capacity `x_c` plus, per
//! period, reserve `x_o`, day-ahead energy `e` and real-time energy `r`. The
//! ISO is the price player and sets the reserve, energy and real-time prices
//! from closed-form rules.

mod prices;
mod scenario;

use std::sync::Arc;

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::game::{
    ClosedFormPrice, Formulation, GameInstance, PlayerSpec, PriceProblem, PriceRule, SharedTerm,
};
use crate::grid::ActionBox;
use crate::potential::construct_sum_potential;
use crate::scalar::Scalar;
use crate::solver::{solve_e2_consistent, solve_t1_best_response, SolveResult};
use crate::verifier::{check_e2_consistent, check_t, EquilibriumCertificate};

pub use prices::{
    eldc_eval, market_clearing_price, merit_order_price, reserve_price, MarginalCost, MarketKind,
    Offer,
};
pub use scenario::{Bounds, Company, GepScenario};

/// One company's decisions over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanyDecision<T> {
    pub x_c: T,
    pub x_o: Vec<T>,
    pub e: Vec<T>,
    pub r: Vec<T>,
}

impl<T: Scalar> CompanyDecision<T> {
    /// Reads the flat layout `[x_c, x_o_1..T, e_1..T, r_1..T]`.
    pub fn from_slice(v: &[T], horizon: usize) -> Result<Self> {
        if v.len() != decision_dim(horizon) {
            return Err(Error::Usage(format!(
                "decision vector has {} entries, expected {}",
                v.len(),
                decision_dim(horizon)
            )));
        }
        Ok(CompanyDecision {
            x_c: v[0],
            x_o: v[1..1 + horizon].to_vec(),
            e: v[1 + horizon..1 + 2 * horizon].to_vec(),
            r: v[1 + 2 * horizon..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = vec![self.x_c];
        v.extend(&self.x_o);
        v.extend(&self.e);
        v.extend(&self.r);
        v
    }

    pub fn horizon(&self) -> usize {
        self.e.len()
    }
}

/// Length of a flattened [`CompanyDecision`].
pub fn decision_dim(horizon: usize) -> usize {
    1 + 3 * horizon
}

/// The ISO output per period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceVectorGep<T> {
    pub reserve: Vec<T>,
    pub energy: Vec<T>,
    pub real_time: Vec<T>,
}

impl<T: Scalar> PriceVectorGep<T> {
    /// Reads the layout `[P_1..T, MCP_1..T, RTP_1..T]`.
    pub fn from_slice(p: &[T], horizon: usize) -> Result<Self> {
        if p.len() != 3 * horizon {
            return Err(Error::Usage(format!(
                "price vector has {} entries, expected {}",
                p.len(),
                3 * horizon
            )));
        }
        Ok(PriceVectorGep {
            reserve: p[..horizon].to_vec(),
            energy: p[horizon..2 * horizon].to_vec(),
            real_time: p[2 * horizon..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.reserve.clone();
        v.extend(&self.energy);
        v.extend(&self.real_time);
        v
    }
}

/// The three ISO rules as a closed-form price of the joint decision.
pub struct GepPrices {
    scenario: GepScenario,
    mcs: Vec<MarginalCost>,
}

impl GepPrices {
    pub fn new(scenario: &GepScenario) -> Self {
        GepPrices {
            mcs: prices::marginal_costs(scenario),
            scenario: scenario.clone(),
        }
    }

    pub fn evaluate<T: Scalar>(&self, decisions: &[CompanyDecision<T>]) -> Result<PriceVectorGep<T>> {
        let s = &self.scenario;
        if decisions.len() != s.n_companies() {
            return Err(Error::Usage("one decision per company required".into()));
        }
        let mut out = PriceVectorGep {
            reserve: Vec::with_capacity(s.horizon),
            energy: Vec::with_capacity(s.horizon),
            real_time: Vec::with_capacity(s.horizon),
        };
        for t in 0..s.horizon {
            let total: T = decisions.iter().map(|d| d.x_o[t]).sum();
            out.reserve.push(reserve_price(s, total.max(T::zero()), t)?);
            out.energy
                .push(prices::clearing_price(s, &self.mcs, decisions, t, MarketKind::Energy)?);
            out.real_time
                .push(prices::clearing_price(s, &self.mcs, decisions, t, MarketKind::RealTime)?);
        }
        Ok(out)
    }

    /// A box containing every price the rules can produce on the decision grids.
    fn range(&self) -> (Vec<f64>, Vec<f64>) {
        let s = &self.scenario;
        let n = s.horizon;
        let scale = s.horizon as f64 * (1.0 - s.rho_avg) * s.outage_cost;
        let lo_reserve: f64 = s.companies.iter().map(|c| c.reserve_bounds.lower.max(0.0)).sum();
        let hi_reserve: f64 = s.companies.iter().map(|c| c.reserve_bounds.upper.max(0.0)).sum();
        let ends = [lo_reserve, hi_reserve].map(|y| {
            scale * prices::eldc_eval(&s.eldc_breakpoints, s.existing_capacity.max(0.0) + y).unwrap_or(0.0)
        });
        let reserve = (ends[0].min(ends[1]), ends[0].max(ends[1]));

        let with_shortfall = |vals: Vec<f64>| {
            let top = |v: f64| v + s.scarcity_adder.unwrap_or(10.0 * v.abs());
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|&v| v.max(top(v))).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let mut energy = Vec::new();
        let mut real_time = Vec::new();
        for (c, mc) in s.companies.iter().zip(&self.mcs) {
            let es = c.energy_bounds.axis();
            let rs = c.rt_bounds.axis();
            energy.extend(es.iter().map(|&e| mc.at(e)));
            for &e in &es {
                real_time.extend(rs.iter().map(|&r| mc.at(e + r)));
            }
        }
        let energy = with_shortfall(energy);
        let real_time = with_shortfall(real_time);
        let mut lower = Vec::with_capacity(3 * n);
        let mut upper = Vec::with_capacity(3 * n);
        for (lo, hi) in [reserve, energy, real_time] {
            lower.extend(std::iter::repeat(lo).take(n));
            upper.extend(std::iter::repeat(hi).take(n));
        }
        (lower, upper)
    }
}

impl<T: Scalar> ClosedFormPrice<T> for GepPrices {
    fn price(&self, x: &[Vec<T>]) -> Vec<T> {
        let n = self.scenario.horizon;
        x.iter()
            .map(|xi| CompanyDecision::from_slice(xi, n))
            .collect::<Result<Vec<_>>>()
            .and_then(|d| self.evaluate(&d))
            .map(|p| p.to_vec())
            .unwrap_or_else(|_| vec![T::nan(); 3 * n])
    }

    fn describe(&self) -> String {
        format!(
            "ISO rules: reserve from ELDC, merit-order energy and real-time prices over {} periods",
            self.scenario.horizon
        )
    }
}

fn company_constraints(c: &Company, horizon: usize) -> Vec<Expr> {
    let xc = || Expr::own(0);
    let xo = |t: usize| Expr::own(1 + t);
    let e = |t: usize| Expr::own(1 + horizon + t);
    let r = |t: usize| Expr::own(1 + 2 * horizon + t);
    let mut out = Vec::new();
    for t in 0..horizon {
        out.push(-xo(t));
        out.push(xo(t) - xc());
        out.push(e(t) - (xc() - xo(t)));
        out.push(r(t) - (xc() - e(t)));
    }
    for t in 0..horizon.saturating_sub(1) {
        let delta = (e(t + 1) + r(t + 1)) - (e(t) + r(t));
        if let Some(up) = c.ramp_up.filter(|v| v.is_finite()) {
            out.push(delta.clone() - Expr::c(up));
        }
        if let Some(down) = c.ramp_down.filter(|v| v.is_finite()) {
            out.push(Expr::c(down) - delta);
        }
    }
    out
}

fn company_box<T: Scalar>(c: &Company, horizon: usize) -> Result<ActionBox<T>> {
    let mut lower = vec![T::lit(c.capacity_bounds.lower)];
    let mut upper = vec![T::lit(c.capacity_bounds.upper)];
    let mut points = vec![c.capacity_bounds.points];
    for b in [&c.reserve_bounds, &c.energy_bounds, &c.rt_bounds] {
        lower.extend(std::iter::repeat(T::lit(b.lower)).take(horizon));
        upper.extend(std::iter::repeat(T::lit(b.upper)).take(horizon));
        points.extend(std::iter::repeat(b.points).take(horizon));
    }
    ActionBox::new(lower, upper, points)
}

fn shared_revenue(horizon: usize) -> Expr {
    (0..horizon)
        .map(|t| {
            Expr::price(t) * Expr::own(1 + t)
                + Expr::price(horizon + t) * Expr::own(1 + horizon + t)
                + Expr::price(2 * horizon + t) * Expr::own(1 + 2 * horizon + t)
        })
        .reduce(|a, b| a + b)
        .expect("horizon is at least 1")
}

fn own_cost(c: &Company, horizon: usize) -> Expr {
    let capital = c.capital_cost.substitute_arg(&Expr::own(0));
    let fuel = (0..horizon)
        .map(|t| {
            c.fuel_cost
                .substitute_arg(&(Expr::own(1 + horizon + t) + Expr::own(1 + 2 * horizon + t)))
        })
        .reduce(|a, b| a + b)
        .expect("horizon is at least 1");
    -(capital + fuel)
}

/// Compiles a scenario into a game with the ISO as closed-form price player.
pub fn build_gep_game<T: Scalar>(
    scenario: &GepScenario,
    formulation: Formulation,
) -> Result<GameInstance<T>> {
    match formulation {
        Formulation::TakingT1 | Formulation::AnticipativeE2Consistent => {}
        other => {
            return Err(Error::Usage(format!(
                "GEP games support the t1 and e2 formulations, not {other}"
            )))
        }
    }
    scenario.validate()?;
    let n = scenario.horizon;
    let players = scenario
        .companies
        .iter()
        .enumerate()
        .map(|(i, c)| PlayerSpec::new(i, company_box(c, n)?, own_cost(c, n), company_constraints(c, n)))
        .collect::<Result<Vec<_>>>()?;
    let rule = GepPrices::new(scenario);
    let (lo, hi) = rule.range();
    let lattice = ActionBox::new(
        lo.into_iter().map(T::lit).collect(),
        hi.into_iter().map(T::lit).collect(),
        vec![2; 3 * n],
    )?;
    let price = PriceProblem::closed_form_only(lattice, PriceRule::Custom(Arc::new(rule)))?;
    GameInstance::new(players, SharedTerm::new(shared_revenue(n)), price, formulation)
}

/// Outcome of sampled midpoint-convexity tests on the cost curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    /// `(company, curve)` pairs that failed, curve being `"capital"` or `"fuel"`.
    pub violations: Vec<(usize, &'static str)>,
    pub samples: usize,
}

impl ConvexityReport {
    pub fn all_convex(&self) -> bool {
        self.violations.is_empty()
    }
}

fn midpoint_convex(f: &Expr, lo: f64, hi: f64, samples: usize) -> bool {
    if hi <= lo {
        return true;
    }
    let at = |q: f64| f.eval(&Env::<f64>::new(&[], &[]).with_arg(q));
    let k = (samples as f64).sqrt().ceil().max(2.0) as usize;
    let pts: Vec<f64> = (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect();
    pts.iter().all(|&a| {
        pts.iter().all(|&b| {
            let m = at(0.5 * (a + b));
            let avg = 0.5 * (at(a) + at(b));
            m <= avg + 1e-9 * (1.0 + avg.abs())
        })
    })
}

/// Midpoint-convexity of `C_i` over the capacity range and `F_i` over the production range.
pub fn convexity_check(scenario: &GepScenario, samples: usize) -> ConvexityReport {
    let mut violations = Vec::new();
    for (i, c) in scenario.companies.iter().enumerate() {
        let cb = &c.capacity_bounds;
        if !midpoint_convex(&c.capital_cost, cb.lower, cb.upper, samples) {
            violations.push((i, "capital"));
        }
        let lo = c.energy_bounds.lower + c.rt_bounds.lower;
        let hi = c.energy_bounds.upper + c.rt_bounds.upper;
        if !midpoint_convex(&c.fuel_cost, lo, hi, samples) {
            violations.push((i, "fuel"));
        }
    }
    ConvexityReport { violations, samples }
}

/// Result of a GEP solve in both raw and decoded form.
#[derive(Debug, Clone)]
pub struct GepOutcome<T> {
    pub result: SolveResult<T>,
    pub certificate: EquilibriumCertificate<T>,
    pub decisions: Vec<CompanyDecision<T>>,
    pub prices: PriceVectorGep<T>,
    /// Price-taking solves only.
    pub convexity: Option<ConvexityReport>,
}

fn decode<T: Scalar>(
    scenario: &GepScenario,
    result: SolveResult<T>,
    certificate: EquilibriumCertificate<T>,
    convexity: Option<ConvexityReport>,
) -> Result<GepOutcome<T>> {
    let n = scenario.horizon;
    let decisions = result
        .point
        .x
        .iter()
        .map(|xi| CompanyDecision::from_slice(xi, n))
        .collect::<Result<Vec<_>>>()?;
    let prices = PriceVectorGep::from_slice(result.point.price(), n)?;
    Ok(GepOutcome {
        result,
        certificate,
        decisions,
        prices,
        convexity,
    })
}

/// Damped best response with ISO price updates each sweep, certified against `T`.
pub fn solve_gep_price_taking<T: Scalar>(
    scenario: &GepScenario,
    cfg: &SolverConfig,
) -> Result<GepOutcome<T>> {
    let game = build_gep_game::<T>(scenario, Formulation::TakingT1)?;
    let result = solve_t1_best_response(&game, cfg)?;
    let cert = check_t(&game, &result.point.x, result.point.price(), cfg)?;
    let convexity = convexity_check(scenario, cfg.potential_samples);
    decode(scenario, result, cert, Some(convexity))
}

/// Maximizes total anticipated revenue minus total cost over `F2`, certified with consistent conjectures.
pub fn solve_gep_anticipative<T: Scalar>(
    scenario: &GepScenario,
    cfg: &SolverConfig,
) -> Result<GepOutcome<T>> {
    let game = build_gep_game::<T>(scenario, Formulation::AnticipativeE2Consistent)?;
    let pi = construct_sum_potential(&game)?;
    let result = solve_e2_consistent(&game, &pi, cfg)?;
    let cert = check_e2_consistent(&game, &result.point.x, result.point.price(), cfg)?;
    decode(scenario, result, cert, None)
}
