use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::ActionBox;

/// Interval and grid resolution for one decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64, points: usize) -> Self {
        Bounds { lower, upper, points }
    }

    pub fn fixed(v: f64) -> Self {
        Bounds::new(v, v, 2)
    }

    fn check(&self, path: &str) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::schema(path, "bounds must be finite"));
        }
        if self.lower > self.upper {
            return Err(Error::schema(path, "lower exceeds upper"));
        }
        if self.points < 2 {
            return Err(Error::schema(format!("{path}.points"), "at least 2 grid points required"));
        }
        Ok(())
    }

    pub(crate) fn axis(&self) -> Vec<f64> {
        ActionBox::new(vec![self.lower], vec![self.upper], vec![self.points])
            .map(|b| b.axis(0))
            .unwrap_or_default()
    }

    pub(crate) fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Company {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    /// `C_i(q)` of the capacity `q`.
    pub capital_cost: Expr,
    /// `F_i(q)` of the produced quantity `q = e + r`.
    pub fuel_cost: Expr,
    pub forced_outage_rate: f64,
    /// MW per period; absent means unlimited.
    #[serde(default)]
    pub ramp_up: Option<f64>,
    #[serde(default)]
    pub ramp_down: Option<f64>,
    pub capacity_bounds: Bounds,
    pub reserve_bounds: Bounds,
    pub energy_bounds: Bounds,
    pub rt_bounds: Bounds,
}

/// A generation expansion scenario. Quantities are MW, prices currency per MWh,
/// and periods have unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GepScenario {
    pub horizon: usize,
    pub companies: Vec<Company>,
    pub loads: Vec<f64>,
    /// `(load, fraction)` pairs with increasing load and nonincreasing fraction.
    pub eldc_breakpoints: Vec<(f64, f64)>,
    pub rho_avg: f64,
    pub outage_cost: f64,
    pub existing_capacity: f64,
    /// Added to the top marginal cost on shortfall; default ten times that cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scarcity_adder: Option<f64>,
}

fn only_arg(e: &Expr) -> bool {
    !e.any_var(|v| !matches!(v, Var::Arg))
}

impl GepScenario {
    pub fn from_json(src: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(src);
        let s: GepScenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::schema(path, e.into_inner().to_string())
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::schema("horizon", "must be at least 1"));
        }
        if self.loads.len() != self.horizon {
            return Err(Error::schema(
                "loads",
                format!("expected {} entries, got {}", self.horizon, self.loads.len()),
            ));
        }
        if let Some(t) = self.loads.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::schema(format!("loads[{t}]"), "loads must be finite and nonnegative"));
        }
        if self.companies.is_empty() {
            return Err(Error::schema("companies", "at least one company required"));
        }
        if !(0.0..1.0).contains(&self.rho_avg) {
            return Err(Error::schema("rho_avg", "must lie in [0, 1)"));
        }
        for (name, v) in [("outage_cost", self.outage_cost), ("existing_capacity", self.existing_capacity)] {
            if !v.is_finite() {
                return Err(Error::schema(name, "must be finite"));
            }
        }
        if let Some(a) = self.scarcity_adder {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::schema("scarcity_adder", "must be finite and nonnegative"));
            }
        }
        let bp = &self.eldc_breakpoints;
        if bp.is_empty() {
            return Err(Error::schema("eldc_breakpoints", "at least one breakpoint required"));
        }
        for (k, &(y, v)) in bp.iter().enumerate() {
            if !(y.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::schema(format!("eldc_breakpoints[{k}]"), "values must lie in [0, 1]"));
            }
            if k > 0 && y <= bp[k - 1].0 {
                return Err(Error::schema(format!("eldc_breakpoints[{k}]"), "loads must be strictly increasing"));
            }
            if k > 0 && v > bp[k - 1].1 {
                return Err(Error::schema(format!("eldc_breakpoints[{k}]"), "values must be nonincreasing"));
            }
        }
        for (i, c) in self.companies.iter().enumerate() {
            let path = |f: &str| format!("companies[{i}].{f}");
            if !only_arg(&c.capital_cost) {
                return Err(Error::schema(path("capital_cost"), "may only use the argument q"));
            }
            if !only_arg(&c.fuel_cost) {
                return Err(Error::schema(path("fuel_cost"), "may only use the argument q"));
            }
            if !(0.0..1.0).contains(&c.forced_outage_rate) {
                return Err(Error::schema(path("forced_outage_rate"), "must lie in [0, 1)"));
            }
            for (f, r) in [("ramp_up", c.ramp_up), ("ramp_down", c.ramp_down)] {
                if r.is_some_and(f64::is_nan) {
                    return Err(Error::schema(path(f), "must be a number"));
                }
            }
            if let (Some(d), Some(u)) = (c.ramp_down, c.ramp_up) {
                if d > u {
                    return Err(Error::schema(path("ramp_down"), "exceeds ramp_up"));
                }
            }
            c.capacity_bounds.check(&path("capacity_bounds"))?;
            c.reserve_bounds.check(&path("reserve_bounds"))?;
            c.energy_bounds.check(&path("energy_bounds"))?;
            c.rt_bounds.check(&path("rt_bounds"))?;
        }
        Ok(())
    }

    pub fn n_companies(&self) -> usize {
        self.companies.len()
    }
}
