//! The ISO price rules: reserve price from the ELDC and merit-order energy and real-time prices.

use crate::error::{Error, Result};
use crate::expr::{pwl_eval, Env, Expr, Var};
use crate::game::feas_slack;
use crate::scalar::{cmp_scalar, Scalar};

use super::scenario::GepScenario;
use super::CompanyDecision;

/// ELDC value at available capacity `y`, clamped beyond the breakpoints.
pub fn eldc_eval<T: Scalar>(breakpoints: &[(f64, f64)], y: T) -> Result<T> {
    if y < T::zero() {
        return Err(Error::Domain(format!("ELDC argument {y} is negative")));
    }
    if breakpoints.is_empty() {
        return Err(Error::Usage("ELDC has no breakpoints".into()));
    }
    Ok(pwl_eval(breakpoints, y))
}

/// `P_t = T (1 - ρ) ELDC(C0 + X_ot) a`.
pub fn reserve_price<T: Scalar>(scenario: &GepScenario, total_reserve: T, t: usize) -> Result<T> {
    if total_reserve < T::zero() {
        return Err(Error::Domain(format!("total reserve {total_reserve} is negative")));
    }
    if t >= scenario.horizon {
        return Err(Error::Domain(format!("period {} beyond horizon {}", t + 1, scenario.horizon)));
    }
    let y = T::lit(scenario.existing_capacity) + total_reserve;
    let v = eldc_eval(&scenario.eldc_breakpoints, y.max(T::zero()))?;
    Ok(T::lit(scenario.horizon as f64) * (T::one() - T::lit(scenario.rho_avg)) * v * T::lit(scenario.outage_cost))
}

/// One company's submission to a merit-order market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer<T> {
    pub marginal_cost: T,
    pub quantity: T,
}

/// Marginal-unit price: accumulate offers in ascending marginal cost until `target` is met.
///
/// Shortfall prices at the top marginal cost plus `adder` (default ten times its magnitude).
pub fn merit_order_price<T: Scalar>(offers: &[Offer<T>], target: T, adder: Option<T>) -> Result<T> {
    if offers.is_empty() {
        return Err(Error::Usage("merit order needs at least one offer".into()));
    }
    if target < T::zero() {
        return Err(Error::Domain(format!("target {target} is negative")));
    }
    let mut order: Vec<usize> = (0..offers.len()).collect();
    order.sort_by(|&a, &b| cmp_scalar(offers[a].marginal_cost, offers[b].marginal_cost));
    let reach = target - feas_slack(target);
    let mut running = T::zero();
    for &k in &order {
        running = running + offers[k].quantity;
        if running >= reach {
            return Ok(offers[k].marginal_cost);
        }
    }
    let top = offers[*order.last().unwrap()].marginal_cost;
    Ok(top + adder.unwrap_or_else(|| T::lit(10.0) * top.abs()))
}

/// `F'(q)`, symbolic when possible, else a forward difference over `step`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalCost {
    Exact(Expr),
    Forward { fuel: Expr, step: f64 },
}

impl MarginalCost {
    pub fn of(fuel: &Expr, step: f64) -> Self {
        match fuel.derivative(&Var::Arg) {
            Some(d) => MarginalCost::Exact(d),
            None => MarginalCost::Forward {
                fuel: fuel.clone(),
                step: if step > 0.0 { step } else { 1e-6 },
            },
        }
    }

    pub fn at<T: Scalar>(&self, q: T) -> T {
        let eval = |e: &Expr, v: T| e.eval(&Env::new(&[], &[]).with_arg(v));
        match self {
            MarginalCost::Exact(d) => eval(d, q),
            MarginalCost::Forward { fuel, step } => {
                let h = T::lit(*step);
                (eval(fuel, q + h) - eval(fuel, q)) / h
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MarketKind {
    /// Offers `e_t` priced at `F'(e_t)`, cleared against the load.
    Energy,
    /// Offers `r_t` priced at `F'(e_t + r_t)`, cleared against `Σ ρ_i e_t`.
    RealTime,
}

pub(crate) fn marginal_costs(scenario: &GepScenario) -> Vec<MarginalCost> {
    scenario
        .companies
        .iter()
        .map(|c| MarginalCost::of(&c.fuel_cost, c.energy_bounds.step()))
        .collect()
}

pub(crate) fn clearing_price<T: Scalar>(
    scenario: &GepScenario,
    mcs: &[MarginalCost],
    decisions: &[CompanyDecision<T>],
    t: usize,
    kind: MarketKind,
) -> Result<T> {
    let adder = scenario.scarcity_adder.map(T::lit);
    match kind {
        MarketKind::Energy => {
            let offers: Vec<Offer<T>> = decisions
                .iter()
                .zip(mcs)
                .map(|(d, mc)| Offer {
                    marginal_cost: mc.at(d.e[t]),
                    quantity: d.e[t],
                })
                .collect();
            merit_order_price(&offers, T::lit(scenario.loads[t]), adder)
        }
        MarketKind::RealTime => {
            let offers: Vec<Offer<T>> = decisions
                .iter()
                .zip(mcs)
                .map(|(d, mc)| Offer {
                    marginal_cost: mc.at(d.e[t] + d.r[t]),
                    quantity: d.r[t],
                })
                .collect();
            let target = decisions
                .iter()
                .zip(&scenario.companies)
                .map(|(d, c)| T::lit(c.forced_outage_rate) * d.e[t])
                .sum::<T>()
                .max(T::zero());
            merit_order_price(&offers, target, adder)
        }
    }
}

/// `MCP_t` or `RTP_t` for the given company decisions.
pub fn market_clearing_price<T: Scalar>(
    scenario: &GepScenario,
    decisions: &[CompanyDecision<T>],
    t: usize,
    kind: MarketKind,
) -> Result<T> {
    if decisions.len() != scenario.n_companies() {
        return Err(Error::Usage("one decision per company required".into()));
    }
    if t >= scenario.horizon {
        return Err(Error::Domain(format!("period {} beyond horizon {}", t + 1, scenario.horizon)));
    }
    clearing_price(scenario, &marginal_costs(scenario), decisions, t, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn offers(costs: &[f64], qty: &[f64]) -> Vec<Offer<f64>> {
        costs
            .iter()
            .zip(qty)
            .map(|(&c, &q)| Offer {
                marginal_cost: c,
                quantity: q,
            })
            .collect()
    }

    #[test]
    fn eldc_interpolates_and_clamps() {
        let bp = [(0.0, 1.0), (100.0, 0.0)];
        assert_eq!(eldc_eval(&bp, 50.0).unwrap(), 0.5);
        assert_eq!(eldc_eval(&bp, 250.0).unwrap(), 0.0);
        let three = [(0.0, 1.0), (10.0, 0.6), (30.0, 0.1), (50.0, 0.0)];
        for &(y, v) in &three {
            assert_eq!(eldc_eval(&three, y).unwrap(), v);
        }
        assert!(matches!(eldc_eval(&bp, -1.0), Err(Error::Domain(_))));
    }

    fn scenario(horizon: usize, rho: f64, a: f64, c0: f64, bp: Vec<(f64, f64)>) -> GepScenario {
        let mut s = GepScenario::from_json(super::super::scenario::tests::TOY).unwrap();
        s.horizon = horizon;
        s.loads = vec![0.0; horizon];
        s.rho_avg = rho;
        s.outage_cost = a;
        s.existing_capacity = c0;
        s.eldc_breakpoints = bp;
        s
    }

    #[test]
    fn reserve_price_cases() {
        let s = scenario(1, 0.0, 1.0, 0.0, vec![(0.0, 1.0), (100.0, 0.0)]);
        assert_eq!(reserve_price(&s, 50.0, 0).unwrap(), 0.5);
        let clamp = scenario(1, 0.0, 2.0, 0.0, vec![(0.0, 1.0), (100.0, 0.25)]);
        assert_eq!(reserve_price(&clamp, 500.0, 0).unwrap(), 0.5);
        // 8760 * 0.9 * 0.01 * 10
        let year = scenario(8760, 0.1, 10.0, 0.0, vec![(0.0, 0.01), (1.0, 0.01)]);
        assert!((reserve_price(&year, 0.5f64, 0).unwrap() - 788.4).abs() < 1e-9);
        assert!(matches!(reserve_price(&s, -1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn reserve_price_nonincreasing() {
        let s = scenario(3, 0.05, 4.0, 2.0, vec![(0.0, 1.0), (5.0, 0.7), (9.0, 0.1), (15.0, 0.0)]);
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let v = reserve_price(&s, k as f64 * 0.1, 0).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn textbook_merit_order() {
        let o = offers(&[10.0, 20.0, 30.0], &[5.0, 5.0, 5.0]);
        assert_eq!(merit_order_price(&o, 8.0, None).unwrap(), 20.0);
        assert_eq!(merit_order_price(&o, 0.0, None).unwrap(), 10.0);
        assert_eq!(merit_order_price(&o, 15.0, None).unwrap(), 30.0);
        assert_eq!(merit_order_price(&o, 16.0, None).unwrap(), 330.0);
        assert_eq!(merit_order_price(&o, 16.0, Some(1.0)).unwrap(), 31.0);
        let shuffled = offers(&[30.0, 10.0, 20.0], &[5.0, 5.0, 5.0]);
        assert_eq!(merit_order_price(&shuffled, 8.0, None).unwrap(), 20.0);
        assert!(matches!(merit_order_price::<f64>(&[], 1.0, None), Err(Error::Usage(_))));
    }

    /// Independent accumulation: the cheapest prefix of offers whose quantity reaches the target.
    fn oracle(costs: &[f64], qty: &[f64], target: f64) -> f64 {
        let mut levels: Vec<f64> = costs.to_vec();
        levels.sort_by(f64::total_cmp);
        for &level in &levels {
            let supplied: f64 = costs
                .iter()
                .zip(qty)
                .filter(|(&c, _)| c <= level)
                .map(|(_, &q)| q)
                .sum();
            if supplied >= target {
                return level;
            }
        }
        11.0 * levels.last().unwrap().abs().max(*levels.last().unwrap())
    }

    #[test]
    fn quadratic_costs_match_accumulation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.gen_range(1..6);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.5)).collect();
            // F_i(q) = b q + c q^2, so F_i' = b + 2 c q
            let mc: Vec<f64> = (0..n).map(|i| b[i] + 2.0 * c[i] * q[i]).collect();
            let total: f64 = q.iter().sum();
            let target = total * rng.gen_range(0.05..0.95);
            let o = offers(&mc, &q);
            assert_eq!(merit_order_price(&o, target, None).unwrap(), oracle(&mc, &q, target));
        }
    }

    #[test]
    fn merit_order_nondecreasing_in_target() {
        let o = offers(&[3.0, 1.0, 7.0, 2.0], &[1.0, 2.5, 0.5, 4.0]);
        let mut last = f64::NEG_INFINITY;
        for k in 0..=90 {
            let v = merit_order_price(&o, k as f64 * 0.1, None).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn marginal_cost_symbolic_and_forward() {
        let quad = MarginalCost::of(&Expr::parse("q + 0.1 * q^2").unwrap(), 0.5);
        assert!(matches!(quad, MarginalCost::Exact(_)));
        assert!((quad.at(2.0f64) - 1.4).abs() < 1e-12);
        let kinked = MarginalCost::of(&Expr::parse("pwl(q, 0, 0, 2, 1, 4, 5)").unwrap(), 0.5);
        assert!(matches!(kinked, MarginalCost::Forward { .. }));
        assert!((kinked.at(1.0f64) - 0.5).abs() < 1e-12);
        assert!((kinked.at(2.0f64) - 2.0).abs() < 1e-12);
    }
}
